#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use moving_targets::corpus::{FirmId, YearQuarter};
use moving_targets::embed::EmbeddingVector;
use moving_targets::extract::{ExtractionMethod, Section, TargetLabel, TargetSet};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn firm(s: &str) -> FirmId {
    FirmId::new(s).unwrap()
}

pub fn yq(y: i32, q: u8) -> YearQuarter {
    YearQuarter::new(y, q).unwrap()
}

pub fn target_set(texts: &[&str]) -> TargetSet {
    TargetSet {
        firm: firm("F"),
        period: yq(2021, 1),
        method: ExtractionMethod::Llm,
        labels: texts.iter().map(|t| TargetLabel::new(*t, Section::Presentation, 0)).collect(),
    }
}

/// Letters-only distinct label names.
pub fn label_names(n: usize) -> Vec<String> {
    const WORDS: [&str; 12] = [
        "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet", "kilo", "lima",
    ];
    (0..n).map(|i| WORDS[i % WORDS.len()].repeat(i / WORDS.len() + 1)).collect()
}

pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Unit vectors biased toward a shared direction so some pairs clear
/// typical thresholds.
pub fn clustered_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize, anchor: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let w: f64 = rng.gen_range(0.0..3.0);
            let noise = unit_vector(rng, dim);
            let v: Vec<f64> = anchor.iter().zip(&noise).map(|(a, b)| w * a + b).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

pub fn embed(values: &[Vec<f64>]) -> Vec<EmbeddingVector> {
    values.iter().map(|v| EmbeddingVector::new(v.clone(), "test").unwrap()).collect()
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Runs the CLI binary; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_moving-targets"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}
