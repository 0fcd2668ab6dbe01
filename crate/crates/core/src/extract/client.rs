//! Extractor clients: a live chat-completion client, a replay client over a
//! recorded-response store, and a recorder that fills the store.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use crate::content_digest;
use crate::transport::{TokenBucket, TransportError};

/// A text-completion backend.
pub trait ExtractorClient: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, TransportError>;
}

/// Store key for a `(model_id, prompt)` pair.
pub fn digest_key(model_id: &str, prompt: &str) -> String {
    content_digest(&[model_id, prompt])
}

/// Directory of recorded responses, one `<digest>.txt` file per prompt.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        std::fs::read_to_string(self.path(key)).ok()
    }

    pub fn put(&self, key: &str, body: &str) -> std::io::Result<()> {
        crate::write_atomic(&self.path(key), body.as_bytes())
    }
}

/// Serves responses from a [`ReplayStore`]; never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    store: ReplayStore,
    model_id: String,
}

impl ReplayClient {
    pub fn new(store: ReplayStore, model_id: impl Into<String>) -> Self {
        Self {
            store,
            model_id: model_id.into(),
        }
    }
}

impl ExtractorClient for ReplayClient {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let key = digest_key(&self.model_id, prompt);
        self.store.get(&key).ok_or(TransportError::MissingRecording(key))
    }
}

/// Wraps a live client: serves recorded responses when present, otherwise
/// forwards and records.
pub struct RecordingClient<C> {
    inner: C,
    store: ReplayStore,
}

impl<C: ExtractorClient> RecordingClient<C> {
    pub fn new(inner: C, store: ReplayStore) -> Self {
        Self { inner, store }
    }
}

impl<C: ExtractorClient> ExtractorClient for RecordingClient<C> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let key = digest_key(self.inner.model_id(), prompt);
        if let Some(hit) = self.store.get(&key) {
            return Ok(hit);
        }
        let body = self.inner.complete(prompt)?;
        self.store
            .put(&key, &body)
            .map_err(|e| TransportError::Fatal(format!("cannot record response: {e}")))?;
        Ok(body)
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpChatClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    model_id: String,
    api_key: Option<String>,
    limiter: Option<Arc<TokenBucket>>,
}

impl HttpChatClient {
    pub fn new(
        endpoint: impl Into<String>,
        model_id: impl Into<String>,
        api_key: Option<String>,
        limiter: Option<Arc<TokenBucket>>,
    ) -> Result<Self, TransportError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        Ok(Self {
            http,
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            api_key,
            limiter,
        })
    }
}

impl ExtractorClient for HttpChatClient {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let body = json!({
            "model": self.model_id,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp: Value = req.send()?.error_for_status()?.json()?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| TransportError::Fatal("completion has no message content".into()))
    }
}
