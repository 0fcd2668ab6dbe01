//! Label embeddings, the on-disk embedding cache, and cosine similarity.

mod cache;
mod client;

use crate::transport::TransportError;

pub use cache::EmbeddingCache;
pub use client::{EncoderClient, HashingEncoder, HttpEncoder, OfflineEncoder, HASHING_MODEL_ID};

pub const DEFAULT_BATCH_SIZE: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("encoder returned {found} vectors for {expected} inputs")]
    CountMismatch { expected: usize, found: usize },
    #[error("cache error at {path}: {message}")]
    Cache { path: String, message: String },
}

/// A dense embedding tagged with the model that produced it. Values are kept
/// as delivered, not normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidVector("empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidVector("non-finite component".into()));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(EmbedError::ZeroNorm);
        }
        Ok(Self {
            values,
            model_id: model_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Embeds `labels` in order, serving hits from `cache` and sending misses to
/// `client` in batches of `batch_size`. New vectors are written back.
pub fn embed_labels(
    labels: &[String],
    client: &dyn EncoderClient,
    cache: &EmbeddingCache,
    batch_size: usize,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let model = client.model_id();
    let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(labels.len());
    let mut misses: Vec<&String> = Vec::new();
    let mut dim: Option<usize> = None;

    let mut check_dim = |v: &EmbeddingVector| -> Result<(), EmbedError> {
        match dim {
            Some(d) if d != v.dim() => Err(EmbedError::DimensionMismatch {
                expected: d,
                found: v.dim(),
            }),
            Some(_) => Ok(()),
            None => {
                dim = Some(v.dim());
                Ok(())
            }
        }
    };

    for label in labels {
        match cache.get(model, label)? {
            Some(v) => {
                check_dim(&v)?;
                out.push(Some(v));
            }
            None => {
                if !misses.contains(&label) {
                    misses.push(label);
                }
                out.push(None);
            }
        }
    }

    let mut fetched = std::collections::HashMap::new();
    for batch in misses.chunks(batch_size.max(1)) {
        let texts: Vec<String> = batch.iter().map(|s| (*s).clone()).collect();
        let vectors = client.embed(&texts)?;
        if vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                found: vectors.len(),
            });
        }
        for (label, v) in texts.into_iter().zip(vectors) {
            check_dim(&v)?;
            cache.put(&label, &v)?;
            fetched.insert(label, v);
        }
    }

    Ok(out
        .into_iter()
        .zip(labels)
        .map(|(hit, label)| hit.unwrap_or_else(|| fetched[label].clone()))
        .collect())
}
