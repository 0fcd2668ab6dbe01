use crate::corpus::Transcript;
use crate::transport::{RetryPolicy, TransportError};

use super::{
    build_extraction_prompt, parse_extraction_response, DropTally, ExtractionMethod, ExtractorClient, ParseError,
    TargetSet,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LlmExtraction {
    pub targets: TargetSet,
    pub dropped: DropTally,
    pub duplicates_removed: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    /// The response could not be parsed even after one re-request.
    #[error("unextractable: {0}")]
    Unextractable(#[source] ParseError),
}

/// One prompt round-trip per call. Transport failures follow `retry`; a
/// parse failure triggers a single re-request.
pub fn extract_targets_llm(
    transcript: &Transcript,
    client: &dyn ExtractorClient,
    retry: &RetryPolicy,
) -> Result<LlmExtraction, ExtractError> {
    let prompt = build_extraction_prompt(transcript);
    let mut parse_attempts = 0;
    loop {
        parse_attempts += 1;
        let raw = retry.run(|| client.complete(&prompt))?;
        match parse_extraction_response(&raw, transcript.len()) {
            Ok(parsed) => {
                return Ok(LlmExtraction {
                    targets: TargetSet {
                        firm: transcript.firm.clone(),
                        period: transcript.period,
                        method: ExtractionMethod::Llm,
                        labels: parsed.labels,
                    },
                    dropped: parsed.dropped,
                    duplicates_removed: parsed.duplicates_removed,
                });
            }
            Err(e) if parse_attempts >= 2 => return Err(ExtractError::Unextractable(e)),
            Err(e) => log::warn!("{} {}: {e}; re-requesting", transcript.firm, transcript.period),
        }
    }
}
