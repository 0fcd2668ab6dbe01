//! One file per `(model_id, label)` key:
//!
//! ```text
//! model_id<TAB>text-embedding-3-large
//! label<TAB>market share
//! dim<TAB>3
//! 0.0123
//! -0.5
//! 1e-7
//! ```
//!
//! Components use Rust's shortest round-trip float formatting, so reading a
//! file back yields bit-identical values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{EmbedError, EmbeddingVector};
use crate::content_digest;

#[derive(Debug)]
pub struct EmbeddingCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, model_id: &str, label: &str) -> PathBuf {
        self.dir.join(format!("{}.vec", content_digest(&[model_id, label])))
    }

    fn err(path: &Path, message: impl Into<String>) -> EmbedError {
        EmbedError::Cache {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    pub fn get(&self, model_id: &str, label: &str) -> Result<Option<EmbeddingVector>, EmbedError> {
        let path = self.path_for(model_id, label);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Self::err(&path, e.to_string())),
        };
        let (file_model, file_label, values) = decode(&text).map_err(|m| Self::err(&path, m))?;
        if file_model != model_id || file_label != label {
            return Err(Self::err(&path, "key collision: header does not match"));
        }
        EmbeddingVector::new(values, model_id).map(Some)
    }

    pub fn put(&self, label: &str, vector: &EmbeddingVector) -> Result<(), EmbedError> {
        let path = self.path_for(vector.model_id(), label);
        let body = encode(vector.model_id(), label, vector.values());
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        std::fs::create_dir_all(&self.dir).map_err(|e| Self::err(&self.dir, e.to_string()))?;
        crate::write_atomic(&path, body.as_bytes()).map_err(|e| Self::err(&path, e.to_string()))
    }
}

fn encode(model_id: &str, label: &str, values: &[f64]) -> String {
    let mut s = format!("model_id\t{model_id}\nlabel\t{label}\ndim\t{}\n", values.len());
    for v in values {
        writeln!(s, "{v:?}").expect("write to string");
    }
    s
}

fn decode(text: &str) -> Result<(String, String, Vec<f64>), String> {
    let mut lines = text.lines();
    let mut header = |name: &str| -> Result<String, String> {
        lines
            .next()
            .and_then(|l| l.strip_prefix(name)?.strip_prefix('\t').map(str::to_owned))
            .ok_or_else(|| format!("missing `{name}` header"))
    };
    let model = header("model_id")?;
    let label = header("label")?;
    let dim: usize = header("dim")?.parse().map_err(|_| "bad dim".to_string())?;
    let values = lines
        .map(|l| l.trim().parse::<f64>().map_err(|_| format!("bad value `{l}`")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != dim {
        return Err(format!("expected {dim} values, found {}", values.len()));
    }
    Ok((model, label, values))
}
