use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{Pipeline, RunConfig, ENCODER_KEY_ENV, EXTRACTOR_KEY_ENV};
use super::CliError;
use crate::backtest::{plot_data_csv, run_backtest, tab3_csv, tab3_text, tab4_csv, MethodBacktest};
use crate::corpus::{load_factors, load_returns, load_transcript, FirmId, Transcript, YearQuarter};
use crate::embed::{EmbeddingCache, EncoderClient, HashingEncoder, HttpEncoder, OfflineEncoder, HASHING_MODEL_ID};
use crate::extract::{
    extract_targets_baseline, extract_targets_llm, DropTally, ExtractorClient, HttpChatClient, RecordingClient,
    ReplayClient, ReplayStore, TargetSet,
};
use crate::score::{read_score_table, score_corpus, write_score_table, CorpusScores, Embedder, ScoreConfig, ScoreSummary};
use crate::transport::{RetryPolicy, TokenBucket};

/// What a command produced. Non-empty `failures` means partial success.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub notices: Vec<String>,
    pub failures: Vec<String>,
}

impl Outcome {
    fn write(&mut self, path: PathBuf, body: &str) -> Result<(), CliError> {
        crate::write_atomic(&path, body.as_bytes()).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }
}

const DIAGNOSTICS_FILE: &str = "diagnostics.json";

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Input {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != DIAGNOSTICS_FILE))
        .collect();
    files.sort();
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn target_file_name(firm: &FirmId, period: YearQuarter) -> String {
    format!("{firm}_{}Q{}.json", period.year(), period.quarter())
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Runs each selected pipeline; fails outright only if every one fails.
fn per_pipeline(
    config: &RunConfig,
    mut f: impl FnMut(Pipeline, &mut Outcome) -> Result<(), CliError>,
) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let pipelines = config.method.pipelines();
    let mut errors = Vec::new();
    for p in &pipelines {
        if let Err(e) = f(*p, &mut outcome) {
            errors.push((*p, e));
        }
    }
    if errors.len() == pipelines.len() {
        return Err(errors.remove(0).1);
    }
    for (p, e) in errors {
        outcome.failures.push(format!("{}: {}", p.label(), e.render()));
    }
    Ok(outcome)
}

fn extractor_client(config: &RunConfig) -> Result<Box<dyn ExtractorClient>, CliError> {
    let settings = &config.extractor;
    let store = ReplayStore::new(&settings.responses_dir);
    if settings.offline {
        return Ok(Box::new(ReplayClient::new(store, &settings.model_id)));
    }
    let endpoint = config.require_extractor_endpoint()?;
    let limiter = settings
        .rate_limit_per_second
        .map(|r| Arc::new(TokenBucket::new(r, r.max(1.0))));
    let http = HttpChatClient::new(endpoint, &settings.model_id, std::env::var(EXTRACTOR_KEY_ENV).ok(), limiter)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(Box::new(RecordingClient::new(http, store)))
}

enum CallResult {
    Extracted {
        set: TargetSet,
        dropped: DropTally,
        duplicates_removed: usize,
    },
    Failed {
        call: Option<(FirmId, YearQuarter)>,
        code: &'static str,
        message: String,
    },
}

/// Extracts targets for every transcript and writes one file per call.
pub fn cmd_extract(config: &RunConfig) -> Result<Outcome, CliError> {
    let files = json_files(&config.transcripts_dir)?;
    let transcripts: Vec<(String, Result<Transcript, String>)> = files
        .iter()
        .map(|p| (file_name(p), load_transcript(p).map_err(|e| e.to_string())))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.extractor.parallelism)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let retry = RetryPolicy {
        max_attempts: config.extractor.max_attempts,
        ..RetryPolicy::default()
    };

    per_pipeline(config, |pipeline, outcome| {
        let client = match pipeline {
            Pipeline::Llm => Some(extractor_client(config)?),
            Pipeline::Baseline => None,
        };
        let results: Vec<(&String, CallResult)> = pool.install(|| {
            transcripts
                .par_iter()
                .map(|(name, t)| {
                    let result = match (t, &client) {
                        (Err(message), _) => CallResult::Failed {
                            call: None,
                            code: "corrupt_transcript",
                            message: message.clone(),
                        },
                        (Ok(t), None) => CallResult::Extracted {
                            set: extract_targets_baseline(t),
                            dropped: DropTally::new(),
                            duplicates_removed: 0,
                        },
                        (Ok(t), Some(client)) => match extract_targets_llm(t, client.as_ref(), &retry) {
                            Ok(x) => CallResult::Extracted {
                                set: x.targets,
                                dropped: x.dropped,
                                duplicates_removed: x.duplicates_removed,
                            },
                            Err(e) => CallResult::Failed {
                                call: Some((t.firm.clone(), t.period)),
                                code: "extraction_failed",
                                message: e.to_string(),
                            },
                        },
                    };
                    (name, result)
                })
                .collect()
        });

        let dir = config.targets_dir(pipeline);
        let mut seen = BTreeMap::new();
        let mut dropped = DropTally::new();
        let mut duplicates = 0;
        let mut failures = Vec::new();
        let mut unextractable = Vec::new();
        let mut extracted = 0;
        for (name, result) in results {
            match result {
                CallResult::Extracted {
                    set,
                    dropped: d,
                    duplicates_removed,
                } => {
                    if let Some(first) = seen.insert((set.firm.clone(), set.period), name.clone()) {
                        failures.push(json!({"file": name, "code": "duplicate_call", "message": format!("same firm-quarter as {first}")}));
                        continue;
                    }
                    for (k, v) in d {
                        *dropped.entry(k).or_insert(0) += v;
                    }
                    duplicates += duplicates_removed;
                    outcome.write(dir.join(target_file_name(&set.firm, set.period)), &set.to_json())?;
                    extracted += 1;
                }
                CallResult::Failed { call, code, message } => {
                    if let Some((firm, period)) = call {
                        // Never leave an earlier run's output for a call that now fails.
                        let _ = std::fs::remove_file(dir.join(target_file_name(&firm, period)));
                        unextractable.push(json!({"firm": firm.as_str(), "year": period.year(), "quarter": period.quarter()}));
                    }
                    failures.push(json!({"file": name, "code": code, "message": message}));
                }
            }
        }
        for f in &failures {
            outcome
                .failures
                .push(format!("{} {}: {}", pipeline.label(), f["file"].as_str().unwrap_or(""), f["message"].as_str().unwrap_or("")));
        }
        let diagnostics = json!({
            "method": pipeline.label(),
            "model_id": if pipeline == Pipeline::Llm { Value::from(config.extractor.model_id.as_str()) } else { Value::Null },
            "transcripts": transcripts.len(),
            "extracted": extracted,
            "dropped_labels": dropped.iter().map(|(k, v)| (k.as_str().to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "duplicates_removed": duplicates,
            "unextractable": unextractable,
            "failures": failures,
        });
        outcome.write(dir.join(DIAGNOSTICS_FILE), &(serde_json::to_string_pretty(&diagnostics).expect("json") + "\n"))?;
        println!("{}: extracted {extracted} of {} calls", pipeline.label(), transcripts.len());
        Ok(())
    })
}

fn load_target_sets(config: &RunConfig, pipeline: Pipeline, outcome: &mut Outcome) -> Result<Vec<TargetSet>, CliError> {
    let dir = config.targets_dir(pipeline);
    if !dir.is_dir() {
        return Err(CliError::NoTargetSets(dir));
    }
    let mut sets = Vec::new();
    for path in json_files(&dir)? {
        let parsed = std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|s| TargetSet::from_json(&s).map_err(|e| e.to_string()));
        match parsed {
            Ok(set) if set.method == pipeline.extraction() => sets.push(set),
            Ok(set) => outcome.failures.push(format!(
                "{}: {} holds {} targets",
                pipeline.label(),
                file_name(&path),
                set.method
            )),
            Err(e) => outcome.failures.push(format!("{}: {}: {e}", pipeline.label(), file_name(&path))),
        }
    }
    if sets.is_empty() {
        return Err(CliError::NoTargetSets(dir));
    }
    Ok(sets)
}

fn load_unextractable(config: &RunConfig, pipeline: Pipeline) -> Vec<(FirmId, YearQuarter)> {
    let path = config.targets_dir(pipeline).join(DIAGNOSTICS_FILE);
    let Some(doc) = std::fs::read_to_string(path).ok().and_then(|s| serde_json::from_str::<Value>(&s).ok()) else {
        return Vec::new();
    };
    doc["unextractable"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|v| {
            let firm = FirmId::new(v["firm"].as_str()?).ok()?;
            let period = YearQuarter::new(v["year"].as_i64()? as i32, v["quarter"].as_u64()? as u8).ok()?;
            Some((firm, period))
        })
        .collect()
}

fn encoder_client(config: &RunConfig) -> Result<Box<dyn EncoderClient>, CliError> {
    let settings = &config.encoder;
    if config.extractor.offline {
        return Ok(Box::new(OfflineEncoder::new(&settings.model_id)));
    }
    if settings.model_id == HASHING_MODEL_ID {
        return Ok(Box::new(HashingEncoder));
    }
    let endpoint = config.require_encoder_endpoint()?.expect("checked above");
    let limiter = config
        .extractor
        .rate_limit_per_second
        .map(|r| Arc::new(TokenBucket::new(r, r.max(1.0))));
    let http = HttpEncoder::new(
        endpoint,
        &settings.model_id,
        std::env::var(ENCODER_KEY_ENV).ok(),
        limiter,
        RetryPolicy::default(),
    )
    .map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(Box::new(http))
}

fn summary_json(pipeline: Pipeline, s: &ScoreSummary) -> String {
    let doc = json!({
        "extraction": pipeline.label(),
        "method": s.method.as_str(),
        "tau": s.tau,
        "direction": s.direction.as_str(),
        "calls": s.calls,
        "scoreable": s.scoreable,
        "skipped": s.skipped.iter().map(|(k, v)| (k.as_str().to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "mean": s.mean.map(round4),
        "sd": s.sd.map(round4),
        "targets_per_call": round4(s.targets_per_call),
        "presentation_targets_per_call": round4(s.presentation_per_call),
        "analyst_qa_targets_per_call": round4(s.qa_per_call),
    });
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

pub(crate) const MATCHES_HEADER: [&str; 8] =
    ["firm", "year", "quarter", "method", "previous", "best_match", "similarity", "retained"];

fn matches_csv(scores: &CorpusScores) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MATCHES_HEADER)?;
    for m in &scores.matches {
        w.write_record([
            m.firm.to_string(),
            m.period.year().to_string(),
            m.period.quarter().to_string(),
            m.method.to_string(),
            m.target.previous.clone(),
            m.target.best_match.clone().unwrap_or_default(),
            format!("{:?}", m.target.similarity),
            format!("{:?}", m.target.retained),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("flush to vec")).expect("utf8"))
}

/// Scores every firm-quarter and writes the score table, per-target match
/// records, and a summary block.
pub fn cmd_score(config: &RunConfig) -> Result<Outcome, CliError> {
    let score_config = ScoreConfig {
        tau: config.tau,
        empty_current: config.empty_current,
    };
    per_pipeline(config, |pipeline, outcome| {
        let sets = load_target_sets(config, pipeline, outcome)?;
        let unextractable = load_unextractable(config, pipeline);
        let cache = EmbeddingCache::new(&config.encoder.cache_dir);
        let client = match pipeline {
            Pipeline::Llm => Some(encoder_client(config)?),
            Pipeline::Baseline => None,
        };
        let embedder = client.as_deref().map(|client| Embedder {
            client,
            cache: &cache,
            batch_size: config.encoder.batch_size,
        });
        let scores = score_corpus(&sets, &unextractable, pipeline.score_method(), embedder, &score_config)
            .map_err(|e| CliError::Failed(format!("scoring failed: {e}")))?;
        if scores.summary.scoreable == 0 {
            return Err(CliError::NoScoreable(pipeline.label().into()));
        }

        let dir = config.scores_dir(pipeline);
        let mut table = Vec::new();
        write_score_table(&mut table, &scores.scores).map_err(|e| CliError::Failed(e.to_string()))?;
        outcome.write(dir.join("scores.csv"), &String::from_utf8(table).expect("utf8"))?;
        let matches = matches_csv(&scores).map_err(|e| CliError::Failed(e.to_string()))?;
        outcome.write(dir.join("matches.csv"), &matches)?;
        outcome.write(dir.join("summary.json"), &summary_json(pipeline, &scores.summary))?;
        let s = &scores.summary;
        println!(
            "{}: {} of {} calls scoreable, mean {}",
            pipeline.label(),
            s.scoreable,
            s.calls,
            s.mean.map_or("n/a".into(), |m| format!("{:.4}", m))
        );
        Ok(())
    })
}

fn portfolios_csv(r: &MethodBacktest) -> String {
    let mut out = String::from("month,Q1,Q2,Q3,Q4,Q5,n_Q1,n_Q2,n_Q3,n_Q4,n_Q5\n");
    for (month, counts) in &r.portfolios.members {
        out.push_str(&month.to_string());
        for q in 1..=5 {
            out.push(',');
            if let Some(v) = r.portfolios.quintile(q).get(*month) {
                out.push_str(&format!("{v:.8}"));
            }
        }
        for n in counts {
            out.push_str(&format!(",{n}"));
        }
        out.push('\n');
    }
    out
}

/// Runs the portfolio and regression tests for each method's scores.
pub fn cmd_backtest(config: &RunConfig) -> Result<Outcome, CliError> {
    if !config.returns.is_file() {
        return Err(CliError::MissingReturns(config.returns.clone()));
    }
    if !config.factors.is_file() {
        return Err(CliError::MissingFactors(config.factors.clone()));
    }
    let returns = load_returns(&config.returns).map_err(|e| CliError::Input {
        path: config.returns.clone(),
        message: e.to_string(),
    })?;
    let factors = load_factors(&config.factors).map_err(|e| CliError::Input {
        path: config.factors.clone(),
        message: e.to_string(),
    })?;

    let mut results = Vec::new();
    let mut outcome = per_pipeline(config, |pipeline, outcome| {
        let path = config.scores_dir(pipeline).join("scores.csv");
        let file = std::fs::File::open(&path).map_err(|_| CliError::NoScores(path.clone()))?;
        let scores: Vec<_> = read_score_table(file)
            .map_err(|e| CliError::Input {
                path: path.clone(),
                message: e.to_string(),
            })?
            .iter()
            .map(|s| s.reoriented(config.direction))
            .collect();
        let result = run_backtest(pipeline.label(), config.direction, &scores, &returns, &factors, &config.backtest)
            .map_err(|e| CliError::Failed(format!("backtest: {e}")))?;
        if let Err(e) = &result.fama_macbeth {
            outcome.failures.push(format!("{}: fama-macbeth: {e}", pipeline.label()));
        }
        results.push(result);
        Ok(())
    })?;

    let dir = config.backtest_dir();
    outcome.write(dir.join("tab3.csv"), &tab3_csv(&results))?;
    outcome.write(dir.join("tab3.txt"), &tab3_text(&results))?;
    outcome.write(dir.join("tab4.csv"), &tab4_csv(&results))?;
    for r in &results {
        outcome.write(dir.join(format!("portfolios_{}.csv", r.label)), &portfolios_csv(r))?;
    }
    let plot = dir.join("fig2.csv");
    match plot_data_csv(&results) {
        Some(body) => outcome.write(plot, &body)?,
        None => {
            let _ = std::fs::remove_file(&plot);
            outcome
                .notices
                .push("single method: comparison plot data omitted".into());
        }
    }
    print!("{}", tab3_text(&results));
    Ok(outcome)
}

/// Tallies previous-year targets that were not fully retained.
pub fn cmd_report_frequencies(config: &RunConfig) -> Result<Outcome, CliError> {
    per_pipeline(config, |pipeline, outcome| {
        let path = config.scores_dir(pipeline).join("matches.csv");
        let file = std::fs::File::open(&path).map_err(|_| CliError::NoScores(path.clone()))?;
        let bad = |message: String| CliError::Input {
            path: path.clone(),
            message,
        };
        let mut rdr = csv::Reader::from_reader(file);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != MATCHES_HEADER {
            return Err(bad("unexpected header".into()));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let retained: f64 = rec[7].parse().map_err(|_| bad(format!("bad retained value `{}`", &rec[7])))?;
            if retained < 1.0 {
                *counts.entry(rec[4].to_string()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(config.top_k);

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "target", "frequency"]).map_err(|e| CliError::Failed(e.to_string()))?;
        for (i, (target, n)) in ranked.iter().enumerate() {
            w.write_record([(i + 1).to_string(), target.clone(), n.to_string()])
                .map_err(|e| CliError::Failed(e.to_string()))?;
            println!("{} {:>3} {:>6}  {target}", pipeline.label(), i + 1, n);
        }
        let body = String::from_utf8(w.into_inner().expect("flush to vec")).expect("utf8");
        outcome.write(config.reports_dir().join(format!("{}_dropped_targets.csv", pipeline.label())), &body)?;
        Ok(())
    })
}
