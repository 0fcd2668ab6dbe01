mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::*;

/// Copies the fixture corpus into `dest`, keeping only transcripts for which
/// `keep(file_name)` holds, and writes a config pointing at the copy.
fn stage_corpus(dest: &Path, keep: impl Fn(&str) -> bool) -> PathBuf {
    let src = fixtures().join("corpus");
    for dir in ["responses", "embeddings"] {
        fs::create_dir_all(dest.join(dir)).unwrap();
        for entry in fs::read_dir(src.join(dir)).unwrap() {
            let entry = entry.unwrap();
            fs::copy(entry.path(), dest.join(dir).join(entry.file_name())).unwrap();
        }
    }
    fs::create_dir_all(dest.join("transcripts")).unwrap();
    for entry in fs::read_dir(src.join("transcripts")).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().into_owned();
        if keep(&name) {
            fs::copy(entry.path(), dest.join("transcripts").join(&name)).unwrap();
        }
    }
    for file in ["returns.csv", "factors.csv", "run.toml"] {
        fs::copy(src.join(file), dest.join(file)).unwrap();
    }
    dest.join("run.toml")
}

fn run(config: &Path, extra: &[&str], cmd: &str) -> (i32, String, String) {
    let mut args = vec!["--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    args.push(cmd);
    run_cli(&args)
}

fn count_json(dir: &Path) -> usize {
    fs::read_dir(dir)
        .map(|rd| {
            rd.filter(|e| {
                let name = e.as_ref().unwrap().file_name();
                let name = name.to_string_lossy();
                name.ends_with(".json") && name != "diagnostics.json"
            })
            .count()
        })
        .unwrap_or(0)
}

#[test]
fn small_panel_extracts_one_target_set_per_call() {
    let tmp = tempfile::tempdir().unwrap();
    let firms = ["ACME", "BOLT", "CRUX"];
    let config = stage_corpus(tmp.path(), |name| {
        let (firm, rest) = name.split_once('_').unwrap();
        firms.contains(&firm) && (rest.starts_with("2020") || rest.starts_with("2021"))
    });
    let (code, _, stderr) = run(&config, &[], "extract");
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(count_json(&tmp.path().join("out/targets/llm")), 24);
    assert_eq!(count_json(&tmp.path().join("out/targets/baseline")), 24);
}

#[test]
fn corrupt_transcript_is_a_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let config = stage_corpus(tmp.path(), |name| name.starts_with("ACME_2020"));
    fs::write(tmp.path().join("transcripts/ACME_2021Q1.json"), "{ not json").unwrap();
    let (code, _, stderr) = run(&config, &["--method", "llm"], "extract");
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("ACME_2021Q1"), "{stderr}");
    assert_eq!(count_json(&tmp.path().join("out/targets/llm")), 4);
}

#[test]
fn missing_returns_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = stage_corpus(tmp.path(), |name| name.starts_with("ACME"));
    for cmd in ["extract", "score"] {
        assert_eq!(run(&config, &[], cmd).0, 0);
    }
    fs::remove_file(tmp.path().join("returns.csv")).unwrap();
    let (code, _, stderr) = run(&config, &[], "backtest");
    assert_eq!(code, 2);
    assert!(stderr.contains("missing returns data"), "{stderr}");
    assert_eq!(stderr.lines().filter(|l| l.starts_with("error[")).count(), 1, "{stderr}");
}

#[test]
fn invalid_tau_is_rejected() {
    let config = fixtures().join("corpus/run.toml");
    let out = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(&config, &["--tau", "1.5", "--out-dir", out.path().to_str().unwrap()], "score");
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error[invalid_config]"), "{stderr}");
}

#[test]
fn method_selection_controls_outputs() {
    let config = fixtures().join("corpus/run.toml");
    let single = tempfile::tempdir().unwrap();
    let both = tempfile::tempdir().unwrap();
    let mut notices = String::new();
    for cmd in ["extract", "score", "backtest"] {
        let (code, _, stderr) = run(&config, &["--method", "llm", "--out-dir", single.path().to_str().unwrap()], cmd);
        assert_eq!(code, 0, "{stderr}");
        notices.push_str(&stderr);
        let (code, _, stderr) = run(&config, &["--method", "both", "--out-dir", both.path().to_str().unwrap()], cmd);
        assert_eq!(code, 0, "{stderr}");
    }
    assert!(notices.contains("single method: comparison plot data omitted"), "{notices}");
    assert!(!single.path().join("backtest/fig2.csv").exists());
    assert!(both.path().join("backtest/fig2.csv").exists());

    let targets = |root: &Path| {
        count_json(&root.join("targets/llm")) + count_json(&root.join("targets/baseline"))
    };
    assert_eq!(targets(both.path()), 2 * targets(single.path()));
    let portfolios = |root: &Path| {
        fs::read_dir(root.join("backtest"))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("portfolios_"))
            .count()
    };
    assert_eq!(portfolios(both.path()), 2 * portfolios(single.path()));
}

fn read_llm_scores(root: &Path) -> Vec<(String, f64)> {
    let mut reader = csv::Reader::from_path(root.join("scores/llm/scores.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (firm, year, quarter, value) = (col("firm"), col("year"), col("quarter"), col("value"));
    reader
        .records()
        .map(|r| r.unwrap())
        .filter(|r| !r[value].is_empty())
        .map(|r| (format!("{}_{}Q{}", &r[firm], &r[year], &r[quarter]), r[value].parse().unwrap()))
        .collect()
}

#[test]
fn higher_tau_never_raises_retention() {
    let config = fixtures().join("corpus/run.toml");
    let low = tempfile::tempdir().unwrap();
    let high = tempfile::tempdir().unwrap();
    for (dir, tau) in [(&low, "0.65"), (&high, "0.8")] {
        for cmd in ["extract", "score"] {
            let out = dir.path().to_str().unwrap();
            let (code, _, stderr) = run(&config, &["--method", "llm", "--tau", tau, "--out-dir", out], cmd);
            assert_eq!(code, 0, "{stderr}");
        }
    }
    let low = read_llm_scores(low.path());
    let high = read_llm_scores(high.path());
    assert_eq!(low.len(), high.len());
    assert!(!low.is_empty());
    let mut strictly_lower = 0;
    for ((ka, a), (kb, b)) in low.iter().zip(&high) {
        assert_eq!(ka, kb);
        assert!(b <= a, "{ka}: {b} > {a}");
        strictly_lower += usize::from(b < a);
    }
    assert!(strictly_lower > 0);
}

#[test]
fn frequency_report_ranks_dropped_targets() {
    let config = fixtures().join("corpus/run.toml");
    let out = tempfile::tempdir().unwrap();
    for cmd in ["extract", "score", "report-frequencies"] {
        let (code, _, stderr) = run(&config, &["--method", "llm", "--out-dir", out.path().to_str().unwrap()], cmd);
        assert_eq!(code, 0, "{stderr}");
    }
    let text = fs::read_to_string(out.path().join("reports/llm_dropped_targets.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,target,frequency"));
    let freqs: Vec<u64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(!freqs.is_empty() && freqs.len() <= 20);
    assert!(freqs.windows(2).all(|w| w[0] >= w[1]));
}
