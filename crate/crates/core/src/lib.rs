//! Moving Targets: measuring how firms' stated performance targets drift
//! between earnings calls, and testing whether that drift predicts returns.
//!
//! Pipeline: [`extract`] target labels from transcripts, [`embed`] them,
//! [`score`] each call against the same firm's call four quarters earlier,
//! then [`backtest`] the scores with calendar-time portfolios and
//! Fama-MacBeth regressions. [`cli`] wires the stages together through files.

pub mod backtest;
pub mod cli;
pub mod corpus;
pub mod embed;
pub mod extract;
pub mod score;
pub mod transport;

use std::path::Path;

use sha2::{Digest, Sha256};

/// Hex SHA-256 over the parts, each followed by a NUL separator.
pub fn content_digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Writes via a sibling temp file and rename so readers never see a partial
/// file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    static COUNTER: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
