//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::backtest::{BacktestOptions, DEFAULT_MIN_MONTHS};
use crate::embed::{DEFAULT_BATCH_SIZE, HASHING_MODEL_ID};
use crate::extract::ExtractionMethod;
use crate::score::{Direction, EmptyCurrentRule, ScoreMethod, DEFAULT_TAU};

pub const DEFAULT_EXTRACTOR_MODEL: &str = "gemini-2.5-pro";
pub const DEFAULT_ENCODER_MODEL: &str = "text-embedding-3-large";
pub const EXTRACTOR_KEY_ENV: &str = "MT_EXTRACTOR_API_KEY";
pub const ENCODER_KEY_ENV: &str = "MT_ENCODER_API_KEY";

/// An extraction method paired with the score formula applied to its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pipeline {
    Llm,
    Baseline,
}

impl Pipeline {
    pub fn label(self) -> &'static str {
        self.extraction().as_str()
    }

    pub fn extraction(self) -> ExtractionMethod {
        match self {
            Pipeline::Llm => ExtractionMethod::Llm,
            Pipeline::Baseline => ExtractionMethod::Baseline,
        }
    }

    pub fn score_method(self) -> ScoreMethod {
        match self {
            Pipeline::Llm => ScoreMethod::Semantic,
            Pipeline::Baseline => ScoreMethod::Discrete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelection {
    Llm,
    Baseline,
    #[default]
    Both,
}

impl MethodSelection {
    /// Baseline first, matching the panel order of the reports.
    pub fn pipelines(self) -> Vec<Pipeline> {
        match self {
            MethodSelection::Llm => vec![Pipeline::Llm],
            MethodSelection::Baseline => vec![Pipeline::Baseline],
            MethodSelection::Both => vec![Pipeline::Baseline, Pipeline::Llm],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorSettings {
    pub model_id: String,
    pub endpoint: Option<String>,
    pub responses_dir: PathBuf,
    pub offline: bool,
    pub parallelism: usize,
    pub rate_limit_per_second: Option<f64>,
    pub max_attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSettings {
    pub model_id: String,
    pub endpoint: Option<String>,
    pub cache_dir: PathBuf,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub transcripts_dir: PathBuf,
    pub returns: PathBuf,
    pub factors: PathBuf,
    pub extractor: ExtractorSettings,
    pub encoder: EncoderSettings,
    pub tau: f64,
    pub direction: Direction,
    pub empty_current: EmptyCurrentRule,
    pub method: MethodSelection,
    pub out_dir: PathBuf,
    pub top_k: usize,
    pub backtest: BacktestOptions,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    out_dir: Option<PathBuf>,
    method: Option<MethodSelection>,
    top_k: Option<usize>,
    #[serde(default)]
    corpus: CorpusSection,
    #[serde(default)]
    extractor: ExtractorSection,
    #[serde(default)]
    encoder: EncoderSection,
    #[serde(default)]
    score: ScoreSection,
    #[serde(default)]
    backtest: BacktestSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusSection {
    transcripts_dir: Option<PathBuf>,
    returns: Option<PathBuf>,
    factors: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractorSection {
    model_id: Option<String>,
    endpoint: Option<String>,
    responses_dir: Option<PathBuf>,
    offline: Option<bool>,
    parallelism: Option<usize>,
    rate_limit_per_second: Option<f64>,
    max_attempts: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncoderSection {
    model_id: Option<String>,
    endpoint: Option<String>,
    cache_dir: Option<PathBuf>,
    batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreSection {
    tau: Option<f64>,
    direction: Option<String>,
    empty_current: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BacktestSection {
    min_months: Option<usize>,
    newey_west_lags: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<MethodSelection>,
    pub tau: Option<f64>,
    pub direction: Option<Direction>,
    pub offline: bool,
    pub out_dir: Option<PathBuf>,
    pub top_k: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    /// Loads `path` (if given), resolving relative paths against its
    /// directory, then applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let (file, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                let file: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                    path: p.to_path_buf(),
                    message: e.message().to_string(),
                })?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let resolve = |p: Option<PathBuf>, default: &str| {
            let p = p.unwrap_or_else(|| PathBuf::from(default));
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let parse = |field: &str, v: Option<String>| -> Result<Option<Direction>, ConfigError> {
            v.map(|s| s.parse().map_err(|e| ConfigError::Invalid(format!("{field}: {e}"))))
                .transpose()
        };
        let empty_current = match file.score.empty_current.as_deref() {
            None | Some("minus_one") => EmptyCurrentRule::MinusOne,
            Some("zero") => EmptyCurrentRule::Zero,
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "score.empty_current: expected `minus_one` or `zero`, got `{other}`"
                )))
            }
        };

        let config = RunConfig {
            transcripts_dir: resolve(file.corpus.transcripts_dir, "transcripts"),
            returns: resolve(file.corpus.returns, "returns.csv"),
            factors: resolve(file.corpus.factors, "factors.csv"),
            extractor: ExtractorSettings {
                model_id: file.extractor.model_id.unwrap_or_else(|| DEFAULT_EXTRACTOR_MODEL.into()),
                endpoint: file.extractor.endpoint,
                responses_dir: resolve(file.extractor.responses_dir, "responses"),
                offline: overrides.offline || file.extractor.offline.unwrap_or(false),
                parallelism: file.extractor.parallelism.unwrap_or(4),
                rate_limit_per_second: file.extractor.rate_limit_per_second,
                max_attempts: file.extractor.max_attempts.unwrap_or(3),
            },
            encoder: EncoderSettings {
                model_id: file.encoder.model_id.unwrap_or_else(|| DEFAULT_ENCODER_MODEL.into()),
                endpoint: file.encoder.endpoint,
                cache_dir: resolve(file.encoder.cache_dir, "embeddings"),
                batch_size: file.encoder.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
            },
            tau: overrides.tau.or(file.score.tau).unwrap_or(DEFAULT_TAU),
            direction: overrides
                .direction
                .or(parse("score.direction", file.score.direction)?)
                .unwrap_or(Direction::Retention),
            empty_current,
            method: overrides.method.or(file.method).unwrap_or_default(),
            out_dir: overrides
                .out_dir
                .clone()
                .unwrap_or_else(|| resolve(file.out_dir, "out")),
            top_k: overrides.top_k.or(file.top_k).unwrap_or(20),
            backtest: BacktestOptions {
                min_months: file.backtest.min_months.unwrap_or(DEFAULT_MIN_MONTHS),
                newey_west_lags: file.backtest.newey_west_lags,
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(ConfigError::Invalid(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.extractor.parallelism == 0 {
            return invalid("extractor.parallelism must be at least 1");
        }
        if self.extractor.max_attempts == 0 {
            return invalid("extractor.max_attempts must be at least 1");
        }
        if matches!(self.extractor.rate_limit_per_second, Some(r) if r.is_nan() || r <= 0.0) {
            return invalid("extractor.rate_limit_per_second must be positive");
        }
        if self.encoder.batch_size == 0 {
            return invalid("encoder.batch_size must be at least 1");
        }
        if self.top_k == 0 {
            return invalid("top_k must be at least 1");
        }
        if self.backtest.min_months < 2 {
            return invalid("backtest.min_months must be at least 2");
        }
        Ok(())
    }

    /// Network settings needed by `extract` for the selected methods.
    pub fn require_extractor_endpoint(&self) -> Result<&str, ConfigError> {
        self.extractor.endpoint.as_deref().ok_or_else(|| {
            ConfigError::Invalid("extractor.endpoint is required for LLM extraction unless running offline".into())
        })
    }

    /// Network settings needed by `score` for semantic scoring. The local
    /// hashing encoder needs none.
    pub fn require_encoder_endpoint(&self) -> Result<Option<&str>, ConfigError> {
        if self.extractor.offline || self.encoder.model_id == HASHING_MODEL_ID {
            return Ok(None);
        }
        self.encoder.endpoint.as_deref().map(Some).ok_or_else(|| {
            ConfigError::Invalid("encoder.endpoint is required for semantic scoring unless running offline".into())
        })
    }

    pub fn targets_dir(&self, p: Pipeline) -> PathBuf {
        self.out_dir.join("targets").join(p.label())
    }

    pub fn scores_dir(&self, p: Pipeline) -> PathBuf {
        self.out_dir.join("scores").join(p.label())
    }

    pub fn backtest_dir(&self) -> PathBuf {
        self.out_dir.join("backtest")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }
}
