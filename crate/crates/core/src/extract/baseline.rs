//! Keyword-span baseline standing in for entity-recognition extraction.
//!
//! Spans are `[determiner] [generic adjective] keyword` with no look at the
//! surrounding noun phrase, so segment qualifiers ("Data Center revenue")
//! collapse to the bare keyword and generic nouns ("year", "units") pass
//! through as targets.

use crate::corpus::{Role, Transcript};

use super::{normalize_and_dedupe, validate_target_label, ExtractionMethod, Section, TargetLabel, TargetSet};

const KEYWORDS: &[&str] = &[
    "revenue", "revenues", "sales", "earnings", "income", "profit", "margin", "margins", "growth", "units", "year",
    "quarter", "share", "shares", "dollars", "range", "increase", "decline", "guidance", "cash", "demand",
];

const DETERMINERS: &[&str] = &["the", "a", "an", "that", "this"];

const GENERIC_ADJECTIVES: &[&str] = &["record", "strong", "solid", "total", "overall", "higher", "lower"];

/// Index of the first Q&A utterance: the first analyst turn, or an operator
/// turn announcing "Operator Instructions", whichever comes first.
pub fn qa_start_index(transcript: &Transcript) -> Option<usize> {
    transcript.utterances().iter().find_map(|u| {
        let starts_qa = match u.role {
            Role::Analyst => true,
            Role::Operator => u.text.to_lowercase().contains("operator instructions"),
            Role::Executive => false,
        };
        starts_qa.then_some(u.index)
    })
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '%' || c == '$'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn spans(text: &str) -> Vec<String> {
    let toks = tokens(text);
    let mut out = Vec::new();
    for (i, tok) in toks.iter().enumerate() {
        if !KEYWORDS.contains(&tok.as_str()) {
            continue;
        }
        let mut start = i;
        if start > 0 && GENERIC_ADJECTIVES.contains(&toks[start - 1].as_str()) {
            start -= 1;
        }
        if start > 0 && DETERMINERS.contains(&toks[start - 1].as_str()) {
            start -= 1;
        }
        out.push(toks[start..=i].join(" "));
    }
    out
}

pub fn extract_targets_baseline(transcript: &Transcript) -> TargetSet {
    let qa_start = qa_start_index(transcript).unwrap_or(usize::MAX);
    let candidates = transcript
        .utterances()
        .iter()
        .filter(|u| u.role != Role::Operator)
        .flat_map(|u| {
            let section = if u.index >= qa_start {
                Section::AnalystQa
            } else {
                Section::Presentation
            };
            spans(&u.text)
                .into_iter()
                .filter(|s| validate_target_label(s).is_empty())
                .map(move |s| TargetLabel::new(s, section, u.index))
        });
    TargetSet {
        firm: transcript.firm.clone(),
        period: transcript.period,
        method: ExtractionMethod::Baseline,
        labels: normalize_and_dedupe(candidates),
    }
}
