//! Moving Targets scores.
//!
//! The semantic score compares each previous-year target with every current
//! target by cosine similarity, keeps the best match per previous target
//! (max-pooling over current targets), maps matches at or above `tau` to full
//! retention, and averages over the previous-year targets. A value of 1 means
//! every earlier target is still present, possibly reworded.
//!
//! The discrete score is the fraction of previous-year targets whose
//! normalized text is absent from the current set.

mod corpus;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{FirmId, YearQuarter};
use crate::embed::{cosine, EmbedError, EmbeddingVector};
use crate::extract::TargetSet;

pub use corpus::{
    read_score_table, score_corpus, write_score_table, CorpusScores, Embedder, MatchRecord, ScoreSummary,
    ScoreTableError, SCORE_TABLE_HEADER,
};

/// Default similarity cutoff for counting a target as retained.
pub const DEFAULT_TAU: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMethod {
    Semantic,
    Discrete,
}

impl ScoreMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMethod::Semantic => "semantic",
            ScoreMethod::Discrete => "discrete",
        }
    }

    /// The orientation the raw formula produces.
    pub fn native_direction(self) -> Direction {
        match self {
            ScoreMethod::Semantic => Direction::Retention,
            ScoreMethod::Discrete => Direction::Missing,
        }
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semantic" => Ok(Self::Semantic),
            "discrete" => Ok(Self::Discrete),
            other => Err(format!("unknown score method `{other}`")),
        }
    }
}

/// Orientation of a score: `Retention` (1 = all targets kept) or `Missing`
/// (1 = all targets dropped). `Missing = 1 - Retention`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Retention,
    Missing,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Retention => "retention",
            Direction::Missing => "missing",
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "retention" => Ok(Self::Retention),
            "missing" => Ok(Self::Missing),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// No call four quarters earlier.
    NoPriorTranscript,
    /// The earlier call produced no targets.
    EmptyPrevious,
    /// This call's extraction failed.
    Unextractable,
    /// The earlier call's extraction failed.
    PriorUnextractable,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::NoPriorTranscript => "no_prior_transcript",
            SkipReason::EmptyPrevious => "empty_previous",
            SkipReason::Unextractable => "unextractable",
            SkipReason::PriorUnextractable => "prior_unextractable",
        }
    }
}

impl FromStr for SkipReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SkipReason::NoPriorTranscript,
            SkipReason::EmptyPrevious,
            SkipReason::Unextractable,
            SkipReason::PriorUnextractable,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| format!("unknown skip reason `{s}`"))
    }
}

/// How to score a nonempty previous set against an empty current set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyCurrentRule {
    /// Every previous target's best match is -1, the cosine minimum.
    #[default]
    MinusOne,
    /// The score is 0.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    pub tau: f64,
    pub empty_current: EmptyCurrentRule,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            empty_current: EmptyCurrentRule::MinusOne,
        }
    }
}

/// One firm-quarter score record. `value` is `None` when the record was
/// skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingTargetsScore {
    pub firm: FirmId,
    pub period: YearQuarter,
    pub method: ScoreMethod,
    /// Similarity cutoff; `None` for the discrete method.
    pub tau: Option<f64>,
    pub value: Option<f64>,
    pub n_prev: usize,
    pub n_curr: usize,
    pub direction: Direction,
    pub skipped: Option<SkipReason>,
}

impl MovingTargetsScore {
    pub fn skipped(
        firm: FirmId,
        period: YearQuarter,
        method: ScoreMethod,
        tau: Option<f64>,
        reason: SkipReason,
    ) -> Self {
        Self {
            firm,
            period,
            method,
            tau,
            value: None,
            n_prev: 0,
            n_curr: 0,
            direction: method.native_direction(),
            skipped: Some(reason),
        }
    }

    /// The value expressed in `direction`.
    pub fn oriented(&self, direction: Direction) -> Option<f64> {
        self.value
            .map(|v| if direction == self.direction { v } else { 1.0 - v })
    }

    /// A copy re-expressed in `direction`.
    pub fn reoriented(&self, direction: Direction) -> Self {
        Self {
            value: self.oriented(direction),
            direction,
            ..self.clone()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{labels} labels but {vectors} vectors")]
    Misaligned { labels: usize, vectors: usize },
    #[error("tau must lie in (0, 1], got {0}")]
    InvalidTau(f64),
}

/// Cosine similarities, rows = current targets, columns = previous targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged similarity rows");
        Self {
            rows: rows.len(),
            cols,
            values: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// Entry `(i, j)` is `cosine(current[i], previous[j])`.
pub fn similarity_matrix(
    current: &[EmbeddingVector],
    previous: &[EmbeddingVector],
) -> Result<SimilarityMatrix, EmbedError> {
    let mut values = Vec::with_capacity(current.len() * previous.len());
    for c in current {
        for p in previous {
            values.push(cosine(c, p)?);
        }
    }
    Ok(SimilarityMatrix {
        rows: current.len(),
        cols: previous.len(),
        values,
    })
}

/// Best match of each previous target over the current targets. With no
/// current targets every column pools to -1.
pub fn max_pool(matrix: &SimilarityMatrix) -> Vec<f64> {
    (0..matrix.cols)
        .map(|j| {
            (0..matrix.rows)
                .map(|i| matrix.get(i, j))
                .fold(-1.0, f64::max)
        })
        .collect()
}

/// Best-matching row per column, `None` for an empty matrix.
fn argmax_pool(matrix: &SimilarityMatrix) -> Vec<Option<usize>> {
    (0..matrix.cols)
        .map(|j| {
            (0..matrix.rows).fold(None, |best: Option<usize>, i| match best {
                Some(b) if matrix.get(b, j) >= matrix.get(i, j) => Some(b),
                _ => Some(i),
            })
        })
        .collect()
}

/// `1` when `s >= tau`, else `s`.
pub fn apply_threshold(s: f64, tau: f64) -> f64 {
    if s >= tau {
        1.0
    } else {
        s
    }
}

/// The retention score from embedded targets, or `None` when there are no
/// previous targets.
pub fn semantic_value(
    current: &[EmbeddingVector],
    previous: &[EmbeddingVector],
    config: &ScoreConfig,
) -> Result<Option<f64>, EmbedError> {
    if previous.is_empty() {
        return Ok(None);
    }
    if current.is_empty() && config.empty_current == EmptyCurrentRule::Zero {
        return Ok(Some(0.0));
    }
    let pooled = max_pool(&similarity_matrix(current, previous)?);
    let total: f64 = pooled.iter().map(|&s| apply_threshold(s, config.tau)).sum();
    Ok(Some(total / pooled.len() as f64))
}

/// A target set with one embedding per entry of [`TargetSet::merged_texts`].
#[derive(Debug, Clone, Copy)]
pub struct EmbeddedSet<'a> {
    pub set: &'a TargetSet,
    pub vectors: &'a [EmbeddingVector],
}

/// How one previous-year target fared against the current call.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatch {
    pub previous: String,
    pub best_match: Option<String>,
    pub similarity: f64,
    /// `g` of the best similarity; below 1 marks a dropped or altered target.
    pub retained: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub score: MovingTargetsScore,
    pub matches: Vec<TargetMatch>,
}

fn check_tau(tau: f64) -> Result<(), ScoreError> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(ScoreError::InvalidTau(tau))
    }
}

/// Semantic score of `current` against the call four quarters earlier.
/// Section lists are merged before scoring.
pub fn semantic_mt_score(
    current: EmbeddedSet<'_>,
    previous: EmbeddedSet<'_>,
    config: &ScoreConfig,
) -> Result<ScoreOutcome, ScoreError> {
    check_tau(config.tau)?;
    let curr_texts = current.set.merged_texts();
    let prev_texts = previous.set.merged_texts();
    for (texts, vectors) in [(&curr_texts, current.vectors), (&prev_texts, previous.vectors)] {
        if texts.len() != vectors.len() {
            return Err(ScoreError::Misaligned {
                labels: texts.len(),
                vectors: vectors.len(),
            });
        }
    }
    let method = ScoreMethod::Semantic;
    let mut score = MovingTargetsScore {
        firm: current.set.firm.clone(),
        period: current.set.period,
        method,
        tau: Some(config.tau),
        value: None,
        n_prev: prev_texts.len(),
        n_curr: curr_texts.len(),
        direction: Direction::Retention,
        skipped: None,
    };
    if prev_texts.is_empty() {
        score.skipped = Some(SkipReason::EmptyPrevious);
        return Ok(ScoreOutcome {
            score,
            matches: Vec::new(),
        });
    }

    let matrix = similarity_matrix(current.vectors, previous.vectors)?;
    let pooled = max_pool(&matrix);
    let best = argmax_pool(&matrix);
    let matches: Vec<TargetMatch> = prev_texts
        .iter()
        .zip(pooled.iter().zip(best))
        .map(|(prev, (&s, arg))| TargetMatch {
            previous: (*prev).to_string(),
            best_match: arg.map(|i| curr_texts[i].to_string()),
            similarity: s,
            retained: apply_threshold(s, config.tau),
        })
        .collect();
    score.value = semantic_value(current.vectors, previous.vectors, config)?;
    Ok(ScoreOutcome { score, matches })
}

/// Fraction of previous targets whose normalized text is absent now,
/// `1 - |previous ∩ current| / |previous|`.
pub fn discrete_mt_score(current: &TargetSet, previous: &TargetSet) -> ScoreOutcome {
    let curr_texts = current.merged_texts();
    let prev_texts = previous.merged_texts();
    let now: HashSet<&str> = curr_texts.iter().copied().collect();
    let matches: Vec<TargetMatch> = prev_texts
        .iter()
        .map(|p| {
            let found = now.contains(p);
            TargetMatch {
                previous: (*p).to_string(),
                best_match: found.then(|| (*p).to_string()),
                similarity: if found { 1.0 } else { 0.0 },
                retained: if found { 1.0 } else { 0.0 },
            }
        })
        .collect();
    let kept = matches.iter().filter(|m| m.best_match.is_some()).count();
    let method = ScoreMethod::Discrete;
    let score = MovingTargetsScore {
        firm: current.firm.clone(),
        period: current.period,
        method,
        tau: None,
        value: (!prev_texts.is_empty()).then(|| 1.0 - kept as f64 / prev_texts.len() as f64),
        n_prev: prev_texts.len(),
        n_curr: curr_texts.len(),
        direction: Direction::Missing,
        skipped: prev_texts.is_empty().then_some(SkipReason::EmptyPrevious),
    };
    ScoreOutcome { score, matches }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{ExtractionMethod, Section, TargetLabel};

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec(), "m").unwrap()
    }

    fn set(texts: &[&str]) -> TargetSet {
        TargetSet {
            firm: FirmId::new("F").unwrap(),
            period: YearQuarter::new(2021, 1).unwrap(),
            method: ExtractionMethod::Llm,
            labels: texts
                .iter()
                .map(|t| TargetLabel::new(*t, Section::Presentation, 0))
                .collect(),
        }
    }

    #[test]
    fn similarity_examples() {
        let basis = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let m = similarity_matrix(&basis, &basis).unwrap();
        assert_eq!((m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)), (1.0, 0.0, 0.0, 1.0));

        let m = similarity_matrix(&[], &basis).unwrap();
        assert_eq!((m.rows(), m.cols()), (0, 2));

        let m = similarity_matrix(&[v(&[1.0, 1.0])], &basis).unwrap();
        assert!((m.get(0, 0) - 0.7071067811865475).abs() < 1e-15);
        assert!((m.get(0, 1) - 0.7071067811865475).abs() < 1e-15);
    }

    #[test]
    fn max_pool_examples() {
        let m = SimilarityMatrix::from_rows(vec![vec![0.2, 0.9], vec![0.8, 0.1]], 2);
        assert_eq!(max_pool(&m), vec![0.8, 0.9]);
        let empty = SimilarityMatrix::from_rows(vec![], 2);
        assert_eq!(max_pool(&empty), vec![-1.0, -1.0]);
        assert_eq!(max_pool(&SimilarityMatrix::from_rows(vec![vec![0.5]], 1)), vec![0.5]);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(apply_threshold(0.70, 0.65), 1.0);
        assert_eq!(apply_threshold(0.65, 0.65), 1.0);
        assert_eq!(apply_threshold(0.60, 0.65), 0.60);
    }

    #[test]
    fn semantic_hand_evaluation() {
        // Previous pooled similarities (0.9, 0.5) at tau 0.65 -> (1 + 0.5) / 2.
        let a = 0.5f64;
        let current = [v(&[1.0, 0.0, 0.0]), v(&[0.0, a, (1.0 - a * a).sqrt()])];
        let b = 0.9f64;
        let previous = [v(&[b, (1.0 - b * b).sqrt(), 0.0]), v(&[0.0, 1.0, 0.0])];
        let pooled = max_pool(&similarity_matrix(&current, &previous).unwrap());
        assert!((pooled[0] - 0.9).abs() < 1e-12 && (pooled[1] - 0.5).abs() < 1e-12);
        let value = semantic_value(&current, &previous, &ScoreConfig::default()).unwrap().unwrap();
        assert!((value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identical_sets_score_one() {
        let s = set(&["pricing", "market share"]);
        let vecs = [v(&[1.0, 2.0]), v(&[-3.0, 1.0])];
        let out = semantic_mt_score(
            EmbeddedSet { set: &s, vectors: &vecs },
            EmbeddedSet { set: &s, vectors: &vecs },
            &ScoreConfig::default(),
        )
        .unwrap();
        assert_eq!(out.score.value, Some(1.0));
        assert_eq!(out.matches[1].best_match.as_deref(), Some("market share"));
    }

    #[test]
    fn empty_current_rules() {
        let prev = set(&["pricing"]);
        let curr = set(&[]);
        let pv = [v(&[1.0])];
        let out = semantic_mt_score(
            EmbeddedSet { set: &curr, vectors: &[] },
            EmbeddedSet { set: &prev, vectors: &pv },
            &ScoreConfig::default(),
        )
        .unwrap();
        assert_eq!(out.score.value, Some(-1.0));
        assert_eq!(out.matches[0].best_match, None);

        let zero = ScoreConfig {
            empty_current: EmptyCurrentRule::Zero,
            ..ScoreConfig::default()
        };
        assert_eq!(semantic_value(&[], &pv, &zero).unwrap(), Some(0.0));
    }

    #[test]
    fn empty_previous_is_skipped() {
        let prev = set(&[]);
        let curr = set(&["pricing"]);
        let out = semantic_mt_score(
            EmbeddedSet { set: &curr, vectors: &[v(&[1.0])] },
            EmbeddedSet { set: &prev, vectors: &[] },
            &ScoreConfig::default(),
        )
        .unwrap();
        assert_eq!(out.score.value, None);
        assert_eq!(out.score.skipped, Some(SkipReason::EmptyPrevious));
        assert_eq!(discrete_mt_score(&curr, &prev).score.skipped, Some(SkipReason::EmptyPrevious));
    }

    #[test]
    fn misaligned_vectors_rejected() {
        let s = set(&["pricing"]);
        let err = semantic_mt_score(
            EmbeddedSet { set: &s, vectors: &[] },
            EmbeddedSet { set: &s, vectors: &[v(&[1.0])] },
            &ScoreConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ScoreError::Misaligned { .. }));
        let bad_tau = ScoreConfig {
            tau: 0.0,
            ..ScoreConfig::default()
        };
        assert!(matches!(
            semantic_mt_score(
                EmbeddedSet { set: &s, vectors: &[v(&[1.0])] },
                EmbeddedSet { set: &s, vectors: &[v(&[1.0])] },
                &bad_tau
            ),
            Err(ScoreError::InvalidTau(_))
        ));
    }

    #[test]
    fn discrete_examples() {
        let d = |c: &[&str], p: &[&str]| discrete_mt_score(&set(c), &set(p)).score.value.unwrap();
        assert!((d(&["a"], &["a", "b", "c"]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d(&["a", "b", "c"], &["a", "b"]), 0.0);
        assert_eq!(d(&[], &["x"]), 1.0);
    }

    #[test]
    fn orientation() {
        let mut s = MovingTargetsScore::skipped(
            FirmId::new("F").unwrap(),
            YearQuarter::new(2021, 1).unwrap(),
            ScoreMethod::Semantic,
            Some(0.65),
            SkipReason::EmptyPrevious,
        );
        assert_eq!(s.oriented(Direction::Missing), None);
        s.value = Some(0.8);
        assert!((s.oriented(Direction::Missing).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(s.oriented(Direction::Retention), Some(0.8));
        assert_eq!(s.reoriented(Direction::Missing).direction, Direction::Missing);
    }
}
