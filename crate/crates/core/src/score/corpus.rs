//! Scoring every firm-quarter against the same firm's call four quarters
//! earlier, plus the score-table file format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;

use super::{
    discrete_mt_score, semantic_mt_score, Direction, EmbeddedSet, MovingTargetsScore, ScoreConfig, ScoreError,
    ScoreMethod, ScoreOutcome, SkipReason, TargetMatch,
};
use crate::corpus::{FirmId, YearQuarter};
use crate::embed::{embed_labels, EmbeddingCache, EmbeddingVector, EncoderClient};
use crate::extract::{Section, TargetSet};

pub const SCORE_TABLE_HEADER: [&str; 9] =
    ["firm", "year", "quarter", "method", "tau", "value", "n_prev", "n_curr", "skipped_reason"];

/// A previous-year target's match, keyed by the scored firm-quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub firm: FirmId,
    pub period: YearQuarter,
    pub method: ScoreMethod,
    pub target: TargetMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub method: ScoreMethod,
    pub tau: Option<f64>,
    pub direction: Direction,
    pub calls: usize,
    pub scoreable: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1).
    pub sd: Option<f64>,
    /// Mean merged (cross-section union) target count per call.
    pub targets_per_call: f64,
    pub presentation_per_call: f64,
    pub qa_per_call: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScores {
    pub scores: Vec<MovingTargetsScore>,
    pub matches: Vec<MatchRecord>,
    pub summary: ScoreSummary,
}

/// Embeds every distinct label once, through the cache.
fn embed_all(
    sets: &[TargetSet],
    client: &dyn EncoderClient,
    cache: &EmbeddingCache,
    batch_size: usize,
) -> Result<HashMap<String, EmbeddingVector>, ScoreError> {
    let labels: Vec<String> = sets
        .iter()
        .flat_map(|s| s.labels.iter().map(|l| l.text.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let vectors = embed_labels(&labels, client, cache, batch_size)?;
    Ok(labels.into_iter().zip(vectors).collect())
}

/// Encoder and cache used by the semantic method.
pub struct Embedder<'a> {
    pub client: &'a dyn EncoderClient,
    pub cache: &'a EmbeddingCache,
    pub batch_size: usize,
}

/// Scores every call in `sets` (one extraction method) against the same
/// firm's call four quarters earlier. `unextractable` lists calls whose
/// extraction failed; they appear as skipped rows. Output is sorted by firm
/// then period.
pub fn score_corpus(
    sets: &[TargetSet],
    unextractable: &[(FirmId, YearQuarter)],
    method: ScoreMethod,
    embedder: Option<Embedder<'_>>,
    config: &ScoreConfig,
) -> Result<CorpusScores, ScoreError> {
    let tau = (method == ScoreMethod::Semantic).then_some(config.tau);
    let by_key: BTreeMap<(&FirmId, YearQuarter), &TargetSet> =
        sets.iter().map(|s| ((&s.firm, s.period), s)).collect();
    let failed: BTreeSet<(&FirmId, YearQuarter)> = unextractable.iter().map(|(f, p)| (f, *p)).collect();

    let vectors = match (method, embedder) {
        (ScoreMethod::Semantic, Some(e)) => embed_all(sets, e.client, e.cache, e.batch_size)?,
        (ScoreMethod::Semantic, None) => {
            return Err(ScoreError::Embed(crate::embed::EmbedError::InvalidVector(
                "semantic scoring needs an encoder".into(),
            )))
        }
        (ScoreMethod::Discrete, _) => HashMap::new(),
    };
    let lookup = |set: &TargetSet| -> Vec<EmbeddingVector> {
        set.merged_texts().iter().map(|t| vectors[*t].clone()).collect()
    };

    let keys: BTreeSet<(&FirmId, YearQuarter)> = by_key.keys().copied().chain(failed.iter().copied()).collect();
    let outcomes: Vec<Result<ScoreOutcome, ScoreError>> = keys
        .into_par_iter()
        .map(|(firm, period)| {
            let skip = |reason| {
                Ok(ScoreOutcome {
                    score: MovingTargetsScore::skipped(firm.clone(), period, method, tau, reason),
                    matches: Vec::new(),
                })
            };
            let Some(current) = by_key.get(&(firm, period)) else {
                return skip(SkipReason::Unextractable);
            };
            let prior = period.shift_quarters(-4);
            let Some(previous) = by_key.get(&(firm, prior)) else {
                return skip(if failed.contains(&(firm, prior)) {
                    SkipReason::PriorUnextractable
                } else {
                    SkipReason::NoPriorTranscript
                });
            };
            match method {
                ScoreMethod::Discrete => Ok(discrete_mt_score(current, previous)),
                ScoreMethod::Semantic => {
                    let (cv, pv) = (lookup(current), lookup(previous));
                    semantic_mt_score(
                        EmbeddedSet {
                            set: current,
                            vectors: &cv,
                        },
                        EmbeddedSet {
                            set: previous,
                            vectors: &pv,
                        },
                        config,
                    )
                }
            }
        })
        .collect();

    let mut scores = Vec::with_capacity(outcomes.len());
    let mut matches = Vec::new();
    for outcome in outcomes {
        let ScoreOutcome { score, matches: m } = outcome?;
        matches.extend(m.into_iter().map(|target| MatchRecord {
            firm: score.firm.clone(),
            period: score.period,
            method,
            target,
        }));
        scores.push(score);
    }
    let summary = summarize(sets, &scores, method, tau);
    Ok(CorpusScores {
        scores,
        matches,
        summary,
    })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn summarize(sets: &[TargetSet], scores: &[MovingTargetsScore], method: ScoreMethod, tau: Option<f64>) -> ScoreSummary {
    let values: Vec<f64> = scores.iter().filter_map(|s| s.value).collect();
    let mut skipped = BTreeMap::new();
    for reason in scores.iter().filter_map(|s| s.skipped) {
        *skipped.entry(reason).or_insert(0) += 1;
    }
    let m = mean(&values);
    let sd = m.filter(|_| values.len() > 1).map(|m| {
        (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
    });
    let per_call = |f: &dyn Fn(&TargetSet) -> usize| {
        mean(&sets.iter().map(|s| f(s) as f64).collect::<Vec<_>>()).unwrap_or(0.0)
    };
    ScoreSummary {
        method,
        tau,
        direction: method.native_direction(),
        calls: sets.len(),
        scoreable: values.len(),
        skipped,
        mean: m,
        sd,
        targets_per_call: per_call(&|s| s.merged_texts().len()),
        presentation_per_call: per_call(&|s| s.count(Section::Presentation)),
        qa_per_call: per_call(&|s| s.count(Section::AnalystQa)),
    }
}

/// Writes score rows with full-precision values. Skipped rows leave `value`
/// blank; discrete rows leave `tau` blank.
pub fn write_score_table(out: impl Write, scores: &[MovingTargetsScore]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_TABLE_HEADER)?;
    for s in scores {
        w.write_record([
            s.firm.to_string(),
            s.period.year().to_string(),
            s.period.quarter().to_string(),
            s.method.to_string(),
            s.tau.map(|t| format!("{t:?}")).unwrap_or_default(),
            s.value.map(|v| format!("{v:?}")).unwrap_or_default(),
            s.n_prev.to_string(),
            s.n_curr.to_string(),
            s.skipped.map(|r| r.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreTableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("score table line {line}: {message}")]
    Row { line: usize, message: String },
}

/// Reads a score table written by [`write_score_table`].
pub fn read_score_table(input: impl Read) -> Result<Vec<MovingTargetsScore>, ScoreTableError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SCORE_TABLE_HEADER {
        return Err(ScoreTableError::Row {
            line: 1,
            message: format!("unexpected header, want {}", SCORE_TABLE_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| ScoreTableError::Row { line, message };
        let field = |k: usize| rec.get(k).unwrap_or("");
        let opt_f64 = |k: usize| -> Result<Option<f64>, ScoreTableError> {
            let f = field(k);
            if f.is_empty() {
                Ok(None)
            } else {
                f.parse().map(Some).map_err(|_| bad(format!("bad number `{f}`")))
            }
        };
        let firm = FirmId::new(field(0)).map_err(|e| bad(e.to_string()))?;
        let year = field(1).parse().map_err(|_| bad("bad year".into()))?;
        let quarter = field(2).parse().map_err(|_| bad("bad quarter".into()))?;
        let period = YearQuarter::new(year, quarter).map_err(|e| bad(e.to_string()))?;
        let method: ScoreMethod = field(3).parse().map_err(bad)?;
        let skipped = match field(8) {
            "" => None,
            s => Some(s.parse::<SkipReason>().map_err(bad)?),
        };
        out.push(MovingTargetsScore {
            firm,
            period,
            method,
            tau: opt_f64(4)?,
            value: opt_f64(5)?,
            n_prev: field(6).parse().map_err(|_| bad("bad n_prev".into()))?,
            n_curr: field(7).parse().map_err(|_| bad("bad n_curr".into()))?,
            direction: method.native_direction(),
            skipped,
        });
    }
    Ok(out)
}
