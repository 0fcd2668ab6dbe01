//! Target-label extraction from transcripts.
//!
//! Two extractors produce [`TargetSet`]s: the LLM extractor (one prompt per
//! call, replayable from a recorded-response store) and a rule-based
//! baseline that harvests keyword spans without context.

mod baseline;
mod client;
mod llm;
mod prompt;
mod response;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{FirmId, YearQuarter};

pub use baseline::{extract_targets_baseline, qa_start_index};
pub use client::{
    digest_key, ExtractorClient, HttpChatClient, RecordingClient, ReplayClient, ReplayStore,
};
pub use llm::{extract_targets_llm, ExtractError, LlmExtraction};
pub use prompt::{build_extraction_prompt, serialize_dialog, INPUTS_SLOT, PROMPT_TEMPLATE};
pub use response::{
    parse_extraction_response, serialize_response, DropReason, DropTally, ParseError, ParsedTargets,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Presentation,
    AnalystQa,
}

impl Section {
    pub const ALL: [Section; 2] = [Section::Presentation, Section::AnalystQa];

    pub fn key(self) -> &'static str {
        match self {
            Section::Presentation => "presentation",
            Section::AnalystQa => "analyst_qa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    Llm,
    Baseline,
}

impl ExtractionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionMethod::Llm => "llm",
            ExtractionMethod::Baseline => "baseline",
        }
    }
}

impl fmt::Display for ExtractionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(Self::Llm),
            "baseline" => Ok(Self::Baseline),
            other => Err(format!("unknown extraction method `{other}`")),
        }
    }
}

/// A normalized performance-target label and where it was mentioned.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetLabel {
    pub text: String,
    pub section: Section,
    pub source_index: usize,
}

impl TargetLabel {
    pub fn new(text: impl Into<String>, section: Section, source_index: usize) -> Self {
        Self {
            text: text.into(),
            section,
            source_index,
        }
    }
}

/// The targets extracted from one firm-quarter call.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub firm: FirmId,
    pub period: YearQuarter,
    pub method: ExtractionMethod,
    pub labels: Vec<TargetLabel>,
}

impl TargetSet {
    pub fn section(&self, section: Section) -> impl Iterator<Item = &TargetLabel> {
        self.labels.iter().filter(move |l| l.section == section)
    }

    pub fn count(&self, section: Section) -> usize {
        self.section(section).count()
    }

    /// Union of both sections' label texts, first occurrence order. Scoring
    /// works on this merged list.
    pub fn merged_texts(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.labels
            .iter()
            .map(|l| l.text.as_str())
            .filter(|t| seen.insert(*t))
            .collect()
    }

    /// On-disk form: the response document plus firm, period, and method.
    pub fn to_json(&self) -> String {
        let mut doc: serde_json::Value =
            serde_json::from_str(&serialize_response(&self.labels)).expect("response json");
        let obj = doc.as_object_mut().expect("object");
        obj.insert("firm".into(), self.firm.as_str().into());
        obj.insert("year".into(), self.period.year().into());
        obj.insert("quarter".into(), self.period.quarter().into());
        obj.insert("method".into(), self.method.as_str().into());
        serde_json::to_string_pretty(&doc).expect("target set serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, ParseError> {
        #[derive(Deserialize)]
        struct Meta {
            firm: FirmId,
            year: i32,
            quarter: u8,
            method: ExtractionMethod,
        }
        let meta: Meta = serde_json::from_str(json).map_err(ParseError::Json)?;
        let period =
            YearQuarter::new(meta.year, meta.quarter).map_err(|e| ParseError::Invalid(e.to_string()))?;
        let parsed = parse_extraction_response(json, usize::MAX)?;
        if !parsed.dropped.is_empty() {
            return Err(ParseError::Invalid(format!(
                "stored target set contains invalid labels: {:?}",
                parsed.dropped
            )));
        }
        Ok(Self {
            firm: meta.firm,
            period,
            method: meta.method,
            labels: parsed.labels,
        })
    }
}

/// A reason a label text breaks the label rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    Empty,
    Digit,
    Percent,
    Currency,
}

impl Violation {
    pub fn as_str(self) -> &'static str {
        match self {
            Violation::Empty => "empty",
            Violation::Digit => "digit",
            Violation::Percent => "percent",
            Violation::Currency => "currency",
        }
    }
}

fn is_currency_symbol(c: char) -> bool {
    matches!(c,
        '$' | '\u{00A2}'..='\u{00A5}' | '\u{058F}' | '\u{060B}' | '\u{09F2}' | '\u{09F3}'
        | '\u{0E3F}' | '\u{17DB}' | '\u{20A0}'..='\u{20C0}' | '\u{FDFC}' | '\u{FE69}'
        | '\u{FF04}' | '\u{FFE0}' | '\u{FFE1}' | '\u{FFE5}' | '\u{FFE6}')
}

/// Rule violations in `text`, in order of first appearance. Empty means valid.
pub fn validate_target_label(text: &str) -> Vec<Violation> {
    if text.trim().is_empty() {
        return vec![Violation::Empty];
    }
    let mut found = Vec::new();
    for c in text.chars() {
        let v = if c.is_numeric() {
            Violation::Digit
        } else if c == '%' || c == '\u{FF05}' || c == '\u{2030}' {
            Violation::Percent
        } else if is_currency_symbol(c) {
            Violation::Currency
        } else {
            continue;
        };
        if !found.contains(&v) {
            found.push(v);
        }
    }
    found
}

/// Trim, collapse internal whitespace, and case-fold.
pub fn normalize_label(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Normalizes every label and drops exact duplicates within each section,
/// keeping the first occurrence.
pub fn normalize_and_dedupe(labels: impl IntoIterator<Item = TargetLabel>) -> Vec<TargetLabel> {
    let mut seen: HashSet<(Section, String)> = HashSet::new();
    labels
        .into_iter()
        .filter_map(|l| {
            let text = normalize_label(&l.text);
            seen.insert((l.section, text.clone())).then_some(TargetLabel { text, ..l })
        })
        .collect()
}
