use serde::Serialize;

use crate::corpus::Transcript;

/// The extraction prompt. The `<inputs>` line is a slot that receives the
/// serialized transcript.
pub const PROMPT_TEMPLATE: &str = include_str!("prompt_template.txt");

/// The slot line inside [`PROMPT_TEMPLATE`].
pub const INPUTS_SLOT: &str = "<inputs>earnings-call transcript as indexed JSON dialog</inputs>";

#[derive(Serialize)]
struct DialogItem<'a> {
    index: usize,
    speaker: &'a str,
    text: &'a str,
}

/// Indexed JSON dialog: a JSON array with one `{index, speaker, text}` object
/// per line.
pub fn serialize_dialog(transcript: &Transcript) -> String {
    let items: Vec<String> = transcript
        .utterances()
        .iter()
        .map(|u| {
            serde_json::to_string(&DialogItem {
                index: u.index,
                speaker: &u.speaker,
                text: &u.text,
            })
            .expect("dialog item serializes")
        })
        .collect();
    format!("[\n{}\n]", items.join(",\n"))
}

pub fn build_extraction_prompt(transcript: &Transcript) -> String {
    let filled = format!("<inputs>\n{}\n</inputs>", serialize_dialog(transcript));
    PROMPT_TEMPLATE.replacen(INPUTS_SLOT, &filled, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FirmId, YearQuarter};

    fn transcript() -> Transcript {
        Transcript::from_dialog(
            FirmId::new("ACME").unwrap(),
            YearQuarter::new(2020, 1).unwrap(),
            [
                ("Operator", "Welcome to the \"ACME\" call."),
                ("Jane Roe - Executives", "Gross margin expanded."),
            ],
        )
        .unwrap()
    }

    #[test]
    fn template_has_exactly_one_slot() {
        assert_eq!(PROMPT_TEMPLATE.matches(INPUTS_SLOT).count(), 1);
    }

    #[test]
    fn prompt_contents() {
        let p = build_extraction_prompt(&transcript());
        assert!(p.contains("- Deduplicate near-duplicates to one normalized target per section\n"));
        assert!(p.contains(r#"{"index":0,"speaker":"Operator","text":"Welcome to the \"ACME\" call."}"#));
        assert!(!p.contains(INPUTS_SLOT));
        assert_eq!(p, build_extraction_prompt(&transcript()));
    }
}
