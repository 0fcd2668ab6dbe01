//! Command-line driver. Stages communicate through files under the output
//! directory so each can be rerun on its own:
//!
//! ```text
//! extract            -> targets/{method}/{firm}_{year}Q{q}.json, diagnostics.json
//! score              -> scores/{method}/scores.csv, matches.csv, summary.json
//! backtest           -> backtest/tab3.csv, tab3.txt, tab4.csv, fig2.csv, portfolios_{method}.csv
//! report-frequencies -> reports/{method}_dropped_targets.csv
//! ```

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_backtest, cmd_extract, cmd_report_frequencies, cmd_score, Outcome};
pub use config::{
    ConfigError, EncoderSettings, ExtractorSettings, MethodSelection, Overrides, Pipeline, RunConfig,
    DEFAULT_ENCODER_MODEL, DEFAULT_EXTRACTOR_MODEL, ENCODER_KEY_ENV, EXTRACTOR_KEY_ENV,
};

use crate::score::Direction;

#[derive(Debug, Parser)]
#[command(name = "moving-targets", version, about = "Measure drift in earnings-call performance targets")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodSelection>,
    /// Similarity cutoff in (0, 1].
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Orientation of scores in the backtest: retention or missing.
    #[arg(long, global = true, value_parser = parse_direction)]
    pub direction: Option<Direction>,
    /// Serve model calls from recordings and caches only.
    #[arg(long, global = true)]
    pub offline: bool,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Rows in the dropped-target frequency table.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Extract target labels from transcripts.
    Extract,
    /// Score each call against the same firm's call a year earlier.
    Score,
    /// Quintile portfolios, factor alphas and Fama-MacBeth regressions.
    Backtest,
    /// Most frequently dropped targets.
    ReportFrequencies,
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse()
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            method: self.method,
            tau: self.tau,
            direction: self.direction,
            offline: self.offline,
            out_dir: self.out_dir.clone(),
            top_k: self.top_k,
        }
    }
}

/// A failed command. `code` is a stable identifier for scripts.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing returns data: {0}")]
    MissingReturns(PathBuf),
    #[error("missing factor data: {0}")]
    MissingFactors(PathBuf),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no target sets under {0}; run extract first")]
    NoTargetSets(PathBuf),
    #[error("no scoreable firm-quarters for {0}")]
    NoScoreable(String),
    #[error("score table missing: {0}; run score first")]
    NoScores(PathBuf),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid_config",
            CliError::MissingReturns(_) => "missing_returns_data",
            CliError::MissingFactors(_) => "missing_factor_data",
            CliError::Input { .. } => "bad_input",
            CliError::Output { .. } => "write_failed",
            CliError::NoTargetSets(_) => "missing_target_sets",
            CliError::NoScoreable(_) => "no_scoreable_calls",
            CliError::NoScores(_) => "missing_scores",
            CliError::Failed(_) => "failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingReturns(_) | CliError::MissingFactors(_) => 2,
            _ => 1,
        }
    }

    /// `error[<code>]: <message>` on one line.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.code())
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let config = match RunConfig::load(cli.config.as_deref(), &cli.overrides()) {
        Ok(c) => c,
        Err(e) => {
            let e = CliError::from(e);
            eprintln!("{}", e.render());
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Extract => cmd_extract(&config),
        Command::Score => cmd_score(&config),
        Command::Backtest => cmd_backtest(&config),
        Command::ReportFrequencies => cmd_report_frequencies(&config),
    };
    match result {
        Ok(outcome) => {
            for note in &outcome.notices {
                eprintln!("notice: {note}");
            }
            for failure in &outcome.failures {
                eprintln!("error[partial_failure]: {}", failure.replace(['\n', '\r'], " "));
            }
            if outcome.failures.is_empty() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{}", e.render());
            e.exit_code()
        }
    }
}
