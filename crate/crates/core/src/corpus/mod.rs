//! Transcripts, returns, factor data, and the firm-month panel.

mod calendar;
mod panel;
mod tables;
mod transcript;

pub use calendar::{shift_quarters, YearMonth, YearQuarter};
pub use panel::{
    build_panel, compounded_return, holding_windows, Controls, HoldingWindow, Panel, PanelDiagnostics,
    PanelObservation, DEFAULT_HOLD_MONTHS,
};
pub use tables::{
    load_factors, load_returns, FactorRow, FactorSeries, ReturnRow, ReturnsTable, FACTORS_HEADER, RETURNS_HEADER,
};
pub use transcript::{load_transcript, FirmId, Role, Transcript, Utterance};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: cannot parse `{value}` in column `{column}`")]
    ParseNumber { line: usize, column: String, value: String },
    #[error("duplicate key {0}")]
    DuplicateKey(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("non-contiguous months: {found} follows {after}")]
    NonContiguousMonths { after: String, found: String },
    #[error("quarter must be 1..=4, got {0}")]
    InvalidQuarter(i64),
    #[error("invalid month `{0}` (expected YYYY-MM)")]
    InvalidMonth(String),
    #[error("invalid period `{0}` (expected YYYYQn)")]
    InvalidPeriod(String),
    #[error("firm id must be non-empty")]
    EmptyFirmId,
    #[error("transcript has no utterances")]
    EmptyTranscript,
    #[error("utterance {0} has empty text")]
    EmptyUtterance(usize),
    #[error("duplicate utterance index {0}")]
    DuplicateIndex(usize),
    #[error("negative utterance index {0}")]
    NegativeIndex(i64),
    #[error("non-contiguous indices: expected {expected}, found {found}")]
    NonContiguousIndices { expected: usize, found: usize },
}
