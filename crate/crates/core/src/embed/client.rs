use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::EmbeddingVector;
use crate::transport::{RetryPolicy, TokenBucket, TransportError};

/// A text encoder. Output order matches input order.
pub trait EncoderClient: Send + Sync {
    fn model_id(&self) -> &str;
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, TransportError>;
}

fn vector(values: Vec<f64>, model_id: &str) -> Result<EmbeddingVector, TransportError> {
    EmbeddingVector::new(values, model_id).map_err(|e| TransportError::Fatal(format!("encoder output: {e}")))
}

/// OpenAI-compatible `/embeddings` client.
pub struct HttpEncoder {
    http: reqwest::blocking::Client,
    endpoint: String,
    model_id: String,
    api_key: Option<String>,
    limiter: Option<Arc<TokenBucket>>,
    retry: RetryPolicy,
}

impl HttpEncoder {
    pub fn new(
        endpoint: impl Into<String>,
        model_id: impl Into<String>,
        api_key: Option<String>,
        limiter: Option<Arc<TokenBucket>>,
        retry: RetryPolicy,
    ) -> Result<Self, TransportError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        Ok(Self {
            http,
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            api_key,
            limiter,
            retry,
        })
    }

    fn request(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, TransportError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut req = self
            .http
            .post(&self.endpoint)
            .json(&json!({"model": self.model_id, "input": texts}));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp: Value = req.send()?.error_for_status()?.json()?;
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| TransportError::Fatal("embedding response has no `data`".into()))?;
        let mut indexed = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let values = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| TransportError::Fatal("embedding item has no vector".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| TransportError::Fatal("non-numeric component".into())))
                .collect::<Result<Vec<f64>, _>>()?;
            indexed.push((index, vector(values, &self.model_id)?));
        }
        indexed.sort_by_key(|(i, _)| *i);
        Ok(indexed.into_iter().map(|(_, v)| v).collect())
    }
}

impl EncoderClient for HttpEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, TransportError> {
        self.retry.run(|| self.request(texts))
    }
}

pub const HASHING_MODEL_ID: &str = "hashing-ngram-256";

/// Deterministic local encoder: signed feature hashing of word unigrams and
/// character trigrams into 256 dimensions. Shares words and subwords with
/// paraphrases, so similar labels land close together. Used for offline
/// fixtures and smoke runs; not a semantic model.
#[derive(Debug, Clone, Default)]
pub struct HashingEncoder;

impl HashingEncoder {
    pub const DIM: usize = 256;

    fn fnv1a(bytes: &[u8]) -> u64 {
        bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    fn add(values: &mut [f64], feature: &str, weight: f64) {
        let h = Self::fnv1a(feature.as_bytes());
        let slot = (h % Self::DIM as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        values[slot] += sign * weight;
    }

    pub fn encode(text: &str) -> Vec<f64> {
        let mut values = vec![0.0; Self::DIM];
        let lower = text.to_lowercase();
        for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            Self::add(&mut values, &format!("w:{word}"), 1.0);
            let padded: Vec<char> = format!("#{word}#").chars().collect();
            for tri in padded.windows(3) {
                Self::add(&mut values, &format!("c:{}", tri.iter().collect::<String>()), 0.5);
            }
        }
        if values.iter().all(|v| *v == 0.0) {
            Self::add(&mut values, &format!("s:{lower}"), 1.0);
        }
        values
    }
}

impl EncoderClient for HashingEncoder {
    fn model_id(&self) -> &str {
        HASHING_MODEL_ID
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, TransportError> {
        texts.iter().map(|t| vector(Self::encode(t), HASHING_MODEL_ID)).collect()
    }
}

/// Network-free stand-in: any request is a missing recording. Pair with a
/// pre-populated cache.
#[derive(Debug, Clone)]
pub struct OfflineEncoder {
    model_id: String,
}

impl OfflineEncoder {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
        }
    }
}

impl EncoderClient for OfflineEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, TransportError> {
        Err(TransportError::MissingRecording(format!(
            "embedding for {:?} under model {}",
            texts.first().map(String::as_str).unwrap_or(""),
            self.model_id
        )))
    }
}
