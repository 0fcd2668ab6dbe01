//! Parsing and serializing the two-list extraction response.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::{normalize_and_dedupe, validate_target_label, Section, TargetLabel, Violation};

/// Why a response item was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Empty,
    Digit,
    Percent,
    Currency,
    IndexOutOfRange,
    MalformedItem,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Empty => "empty",
            DropReason::Digit => "digit",
            DropReason::Percent => "percent",
            DropReason::Currency => "currency",
            DropReason::IndexOutOfRange => "index_out_of_range",
            DropReason::MalformedItem => "malformed_item",
        }
    }
}

impl From<Violation> for DropReason {
    fn from(v: Violation) -> Self {
        match v {
            Violation::Empty => DropReason::Empty,
            Violation::Digit => DropReason::Digit,
            Violation::Percent => DropReason::Percent,
            Violation::Currency => DropReason::Currency,
        }
    }
}

/// Count of violations per kind. An item breaking two rules counts under both.
pub type DropTally = BTreeMap<DropReason, usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTargets {
    /// Valid, normalized, per-section-deduplicated labels; presentation first.
    pub labels: Vec<TargetLabel>,
    pub dropped: DropTally,
    pub dropped_items: usize,
    pub duplicates_removed: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("unparseable response: {0}")]
    Json(#[source] serde_json::Error),
    #[error("response is missing top-level key `{0}`")]
    MissingKey(&'static str),
    #[error("top-level key `{0}` is not a list")]
    NotAList(&'static str),
    #[error("{0}")]
    Invalid(String),
}

/// Locates the JSON object in a raw completion, tolerating code fences or
/// surrounding prose.
fn json_body(raw: &str) -> &str {
    let trimmed = raw.trim();
    if trimmed.starts_with('{') {
        return trimmed;
    }
    match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(start), Some(end)) if end > start => &trimmed[start..=end],
        _ => trimmed,
    }
}

/// Parses an extraction response. Items that fail the label rules or point
/// outside the transcript are dropped and tallied.
pub fn parse_extraction_response(raw: &str, transcript_len: usize) -> Result<ParsedTargets, ParseError> {
    let doc: Value = serde_json::from_str(json_body(raw)).map_err(ParseError::Json)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| ParseError::Invalid("response is not a JSON object".into()))?;

    let mut dropped = DropTally::new();
    let mut dropped_items = 0;
    let mut kept = Vec::new();
    for section in Section::ALL {
        let key = section.key();
        let items = obj
            .get(key)
            .ok_or(ParseError::MissingKey(key))?
            .as_array()
            .ok_or(ParseError::NotAList(key))?;
        for item in items {
            let target = item.get("target").and_then(Value::as_str);
            let index = item.get("index").and_then(Value::as_u64);
            let (Some(target), Some(index)) = (target, index) else {
                *dropped.entry(DropReason::MalformedItem).or_default() += 1;
                dropped_items += 1;
                continue;
            };
            let mut reasons: Vec<DropReason> =
                validate_target_label(target).into_iter().map(DropReason::from).collect();
            if index as usize >= transcript_len || index > usize::MAX as u64 {
                reasons.push(DropReason::IndexOutOfRange);
            }
            if reasons.is_empty() {
                kept.push(TargetLabel::new(target, section, index as usize));
            } else {
                dropped_items += 1;
                for r in reasons {
                    *dropped.entry(r).or_default() += 1;
                }
            }
        }
    }
    let before = kept.len();
    let labels = normalize_and_dedupe(kept);
    Ok(ParsedTargets {
        duplicates_removed: before - labels.len(),
        labels,
        dropped,
        dropped_items,
    })
}

/// Writes labels back into the response format, presentation list first.
pub fn serialize_response(labels: &[TargetLabel]) -> String {
    #[derive(Serialize)]
    struct Item<'a> {
        target: &'a str,
        index: usize,
    }
    let list = |section: Section| -> Vec<Item<'_>> {
        labels
            .iter()
            .filter(|l| l.section == section)
            .map(|l| Item {
                target: &l.text,
                index: l.source_index,
            })
            .collect()
    };
    let doc = serde_json::json!({
        "presentation": list(Section::Presentation),
        "analyst_qa": list(Section::AnalystQa),
    });
    serde_json::to_string_pretty(&doc).expect("response serializes")
}
