use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, YearQuarter};

/// Opaque firm identifier, typically a ticker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FirmId(String);

impl FirmId {
    pub fn new(id: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(CorpusError::EmptyFirmId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for FirmId {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FirmId> for String {
    fn from(value: FirmId) -> Self {
        value.0
    }
}

impl fmt::Display for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Executive,
    Analyst,
    Operator,
}

impl Role {
    /// Infers the role from a speaker tag such as `"Jane Doe - Executives"`.
    /// Unrecognised tags are treated as management speakers.
    pub fn from_speaker(speaker: &str) -> Role {
        let s = speaker.trim();
        if s.ends_with("- Analysts") || s.ends_with("- Analyst") {
            Role::Analyst
        } else if s.eq_ignore_ascii_case("operator") || s.to_ascii_lowercase().starts_with("operator") {
            Role::Operator
        } else {
            Role::Executive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Utterance {
    pub index: usize,
    pub speaker: String,
    pub role: Role,
    pub text: String,
}

/// One firm-quarter earnings call as an ordered, zero-indexed dialog.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub firm: FirmId,
    pub period: YearQuarter,
    utterances: Vec<Utterance>,
}

#[derive(Deserialize)]
struct RawUtterance {
    index: i64,
    speaker: String,
    text: String,
}

#[derive(Deserialize)]
struct RawTranscript {
    firm: String,
    year: i32,
    quarter: u8,
    utterances: Vec<RawUtterance>,
}

impl Transcript {
    /// Builds a transcript from `(speaker, text)` pairs, indexing them from 0.
    pub fn from_dialog<S: Into<String>, T: Into<String>>(
        firm: FirmId,
        period: YearQuarter,
        dialog: impl IntoIterator<Item = (S, T)>,
    ) -> Result<Self, CorpusError> {
        let utterances = dialog
            .into_iter()
            .enumerate()
            .map(|(index, (speaker, text))| {
                let speaker = speaker.into();
                Utterance {
                    index,
                    role: Role::from_speaker(&speaker),
                    speaker,
                    text: text.into(),
                }
            })
            .collect();
        Self::validated(firm, period, utterances)
    }

    fn validated(
        firm: FirmId,
        period: YearQuarter,
        utterances: Vec<Utterance>,
    ) -> Result<Self, CorpusError> {
        if utterances.is_empty() {
            return Err(CorpusError::EmptyTranscript);
        }
        for u in &utterances {
            if u.text.trim().is_empty() {
                return Err(CorpusError::EmptyUtterance(u.index));
            }
        }
        Ok(Self {
            firm,
            period,
            utterances,
        })
    }

    /// Parses the JSON document `{firm, year, quarter, utterances: [{index, speaker, text}]}`.
    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let raw: RawTranscript = serde_json::from_str(json)?;
        let firm = FirmId::new(raw.firm)?;
        let period = YearQuarter::new(raw.year, raw.quarter)?;

        let mut items = raw.utterances;
        items.sort_by_key(|u| u.index);
        let mut utterances = Vec::with_capacity(items.len());
        for (expected, u) in items.into_iter().enumerate() {
            if u.index < 0 {
                return Err(CorpusError::NegativeIndex(u.index));
            }
            let index = u.index as usize;
            if index < expected {
                return Err(CorpusError::DuplicateIndex(index));
            }
            if index > expected {
                return Err(CorpusError::NonContiguousIndices { expected, found: index });
            }
            utterances.push(Utterance {
                index,
                role: Role::from_speaker(&u.speaker),
                speaker: u.speaker,
                text: u.text,
            });
        }
        Self::validated(firm, period, utterances)
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Serializes back to the on-disk document format.
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "firm": self.firm.as_str(),
            "year": self.period.year(),
            "quarter": self.period.quarter(),
            "utterances": self.utterances.iter().map(|u| serde_json::json!({
                "index": u.index,
                "speaker": u.speaker,
                "text": u.text,
            })).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("transcript serializes")
    }
}

/// Reads and validates a transcript file.
pub fn load_transcript(path: impl AsRef<Path>) -> Result<Transcript, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Transcript::from_json(&text)
}
