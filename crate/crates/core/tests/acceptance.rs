//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::*;
use moving_targets::backtest::{
    design_with_intercept, factor_alpha, fama_macbeth, ols, run_backtest, tab3_csv, BacktestOptions, FactorModel,
    SeriesKind, FM_TERMS,
};
use moving_targets::corpus::{
    Controls, FactorRow, FactorSeries, PanelObservation, ReturnRow, ReturnsTable, Transcript, YearMonth,
};
use moving_targets::embed::{EmbeddingCache, HashingEncoder};
use moving_targets::extract::{
    build_extraction_prompt, extract_targets_baseline, extract_targets_llm, parse_extraction_response,
    serialize_response, DropReason, ReplayClient, ReplayStore, INPUTS_SLOT, PROMPT_TEMPLATE,
};
use moving_targets::score::{
    apply_threshold, discrete_mt_score, score_corpus, semantic_mt_score, Direction, EmbeddedSet, Embedder,
    MovingTargetsScore, ScoreConfig, ScoreMethod, SkipReason,
};
use moving_targets::transport::RetryPolicy;

/// Independent reference: explicit loops for cosine, max-pool, threshold,
/// and mean.
fn oracle_score(current: &[Vec<f64>], previous: &[Vec<f64>], tau: f64) -> f64 {
    let mut total = 0.0;
    for p in previous {
        let mut best = -1.0f64;
        for c in current {
            let (mut dot, mut nc, mut np) = (0.0, 0.0, 0.0);
            for k in 0..p.len() {
                dot += c[k] * p[k];
                nc += c[k] * c[k];
                np += p[k] * p[k];
            }
            let s = dot / (nc.sqrt() * np.sqrt());
            if s > best {
                best = s;
            }
        }
        total += if best >= tau { 1.0 } else { best };
    }
    total / previous.len() as f64
}

fn semantic(current: &[Vec<f64>], previous: &[Vec<f64>], tau: f64) -> f64 {
    let (cn, pn) = (label_names(current.len()), label_names(previous.len()));
    let cs = target_set(&cn.iter().map(String::as_str).collect::<Vec<_>>());
    let ps = target_set(&pn.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    let (cv, pv) = (embed(current), embed(previous));
    let config = ScoreConfig {
        tau,
        ..Default::default()
    };
    semantic_mt_score(
        EmbeddedSet {
            set: &cs,
            vectors: &cv,
        },
        EmbeddedSet {
            set: &ps,
            vectors: &pv,
        },
        &config,
    )
    .unwrap()
    .score
    .value
    .unwrap()
}

fn criterion_1() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dim = 16;
        let anchor = unit_vector(&mut rng, dim);
        let np = rng.gen_range(1..=6);
        let nc = rng.gen_range(0..=6);
        let prev = clustered_vectors(&mut rng, np, dim, &anchor);
        let curr = clustered_vectors(&mut rng, nc, dim, &anchor);
        let tau = *[0.5, 0.65, 0.8].choose(&mut rng).unwrap();
        let got = semantic(&curr, &prev, tau);
        let want = oracle_score(&curr, &prev, tau);
        worst = worst.max((got - want).abs());
    }
    let elapsed = start.elapsed();
    assert!(worst <= 1e-9, "max deviation {worst:e}");
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    format!("1000 instances, max |diff| {worst:.1e}, {:.2}s", elapsed.as_secs_f64())
}

fn criterion_2() -> String {
    assert_eq!(apply_threshold(0.65, 0.65), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let taus: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    for _ in 0..100 {
        let anchor = unit_vector(&mut rng, 12);
        let np = rng.gen_range(1..=6);
        let nc = rng.gen_range(1..=6);
        let prev = clustered_vectors(&mut rng, np, 12, &anchor);
        let curr = clustered_vectors(&mut rng, nc, 12, &anchor);
        let scores: Vec<f64> = taus.iter().map(|t| semantic(&curr, &prev, *t)).collect();
        assert!(scores.windows(2).all(|w| w[1] <= w[0]), "not monotone: {scores:?}");
    }
    "g(0.65; 0.65) = 1; non-increasing over 20 tau values x 100 instances".into()
}

fn criterion_3() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vocab = label_names(12);
    for _ in 0..1000 {
        let pick = |rng: &mut ChaCha8Rng, lo: usize| -> Vec<&str> {
            let n = rng.gen_range(lo..=8);
            vocab.choose_multiple(rng, n).map(String::as_str).collect()
        };
        let prev = pick(&mut rng, 1);
        let curr = pick(&mut rng, 0);
        let inter = prev.iter().filter(|p| curr.contains(p)).count();
        let want = 1.0 - inter as f64 / prev.len() as f64;
        let got = discrete_mt_score(&target_set(&curr), &target_set(&prev)).score.value.unwrap();
        assert!(got == want, "{got} != {want}");
    }
    "1000 random label sets, exact equality".into()
}

fn criterion_4() -> String {
    let labels = ["gross margin", "free cash flow", "market share"];
    let set = target_set(&labels);
    let vectors = embed(&labels.iter().map(|l| HashingEncoder::encode(l)).collect::<Vec<_>>());
    let es = EmbeddedSet {
        set: &set,
        vectors: &vectors,
    };
    let config = ScoreConfig::default();
    assert_eq!(semantic_mt_score(es, es, &config).unwrap().score.value, Some(1.0));
    assert_eq!(discrete_mt_score(&set, &set).score.value, Some(0.0));

    let empty = target_set(&[]);
    let none: Vec<moving_targets::embed::EmbeddingVector> = Vec::new();
    let ee = EmbeddedSet {
        set: &empty,
        vectors: &none,
    };
    assert_eq!(semantic_mt_score(ee, es, &config).unwrap().score.value, Some(-1.0));
    assert_eq!(discrete_mt_score(&empty, &set).score.value, Some(1.0));

    // Previous-empty: skipped and tallied through the corpus scorer.
    let mut prior = target_set(&[]);
    prior.period = yq(2020, 1);
    let current = target_set(&labels);
    let dir = tempfile::tempdir().unwrap();
    let cache = EmbeddingCache::new(dir.path());
    let out = score_corpus(
        &[prior, current],
        &[],
        ScoreMethod::Semantic,
        Some(Embedder {
            client: &HashingEncoder,
            cache: &cache,
            batch_size: 8,
        }),
        &config,
    )
    .unwrap();
    let skipped = out.scores.iter().find(|s| s.period == yq(2021, 1)).unwrap();
    assert_eq!(skipped.skipped, Some(SkipReason::EmptyPrevious));
    assert_eq!(skipped.value, None);
    assert_eq!(out.summary.skipped.get(&SkipReason::EmptyPrevious), Some(&1));
    "identical = 1.0; empty current = -1 (semantic) / 1 (discrete missing); empty previous skipped and tallied".into()
}

fn criterion_5() -> String {
    let golden = std::fs::read_to_string(golden("prompt_template.txt")).unwrap();
    assert_eq!(PROMPT_TEMPLATE, golden, "embedded template differs from golden file");
    let t = Transcript::from_dialog(
        firm("ACME"),
        yq(2021, 2),
        [("Operator", "Welcome."), ("Jane Roe - Executives", "Gross margin expanded.")],
    )
    .unwrap();
    let prompt = build_extraction_prompt(&t);
    let (head, tail) = golden.split_once(INPUTS_SLOT).expect("slot in template");
    assert!(prompt.starts_with(head) && prompt.ends_with(tail), "template text altered");
    assert!(prompt.contains("No numbers, units, currency symbols, or percent signs anywhere"));
    assert!(prompt.contains("\"presentation\"") && prompt.contains("\"analyst_qa\""));
    assert!(prompt.contains("\"text\":\"Gross margin expanded.\""));
    format!("template {} bytes byte-exact; dialog injected at the inputs slot", golden.len())
}

fn criterion_6() -> String {
    let raw = std::fs::read_to_string(fixtures().join("parser/mixed_response.json")).unwrap();
    let parsed = parse_extraction_response(&raw, 10).unwrap();
    let texts: Vec<&str> = parsed.labels.iter().map(|l| l.text.as_str()).collect();
    assert_eq!(texts, ["gross margin", "free cash flow", "market share"]);
    let want = [(DropReason::Digit, 2), (DropReason::Percent, 1)].into_iter().collect();
    assert_eq!(parsed.dropped, want);
    let again = parse_extraction_response(&serialize_response(&parsed.labels), 10).unwrap();
    assert_eq!(again.labels, parsed.labels);
    assert!(again.dropped.is_empty());
    "3 labels kept, tally {digit:2, percent:1}, round trip identity".into()
}

fn synthetic_factors(n: i64, rng: &mut ChaCha8Rng) -> FactorSeries {
    let start: YearMonth = "2010-01".parse().unwrap();
    let d = Normal::new(0.0, 0.03).unwrap();
    FactorSeries::from_rows((0..n).map(|i| {
        (
            start.shift_months(i),
            FactorRow {
                mkt_rf: 0.005 + d.sample(rng),
                smb: d.sample(rng),
                hml: d.sample(rng),
                mom: d.sample(rng),
                liq: d.sample(rng),
                rf: 0.002,
            },
        )
    }))
    .unwrap()
}

fn criterion_7() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = Normal::new(0.0, 1.0).unwrap();

    let x1: Vec<f64> = (0..50).map(|_| d.sample(&mut rng)).collect();
    let x2: Vec<f64> = (0..50).map(|_| d.sample(&mut rng)).collect();
    let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 1.5 - 2.0 * a + 0.5 * b).collect();
    let fit = ols(&y, &design_with_intercept(&[&x1, &x2])).unwrap();
    for (got, want) in fit.coefficients.iter().zip([1.5, -2.0, 0.5]) {
        assert!((got - want).abs() < 1e-10, "ols {got} vs {want}");
    }

    let start: YearMonth = "2015-01".parse().unwrap();
    let mut panel = Vec::new();
    for m in 0..36 {
        for i in 0..25 {
            let mt: f64 = rng.gen_range(0.0..1.0);
            panel.push(PanelObservation {
                firm: firm(&format!("F{i}")),
                month: start.shift_months(m),
                score_period: yq(2015, 1),
                ret: -0.05 * mt,
                excess_ret: None,
                mt,
                controls: Controls {
                    log_size: Some(8.0 + d.sample(&mut rng)),
                    log_bm: Some(d.sample(&mut rng) * 0.5),
                    ret_1_0: Some(d.sample(&mut rng) * 0.05),
                    ret_12_1: Some(d.sample(&mut rng) * 0.2),
                },
            });
        }
    }
    let fm = fama_macbeth(&panel, &BacktestOptions::default()).unwrap();
    let mt = fm.term("MT").unwrap().coefficient;
    assert!((mt + 0.05).abs() < 1e-8, "fm MT {mt}");
    for name in FM_TERMS.iter().skip(1) {
        let c = fm.term(name).unwrap().coefficient;
        assert!(c.abs() < 1e-8, "fm {name} {c}");
    }

    let factors = synthetic_factors(60, &mut rng);
    let series = moving_targets::backtest::MonthlySeries::from_pairs(
        factors.iter().map(|(m, f)| (m, f.rf + 0.002 + f.mkt_rf + 0.4 * f.smb - 0.2 * f.hml)),
    )
    .unwrap();
    let mut worst = 0.0f64;
    for model in [FactorModel::ThreeFactor, FactorModel::FiveFactor] {
        let a = factor_alpha(&series, &factors, model, SeriesKind::LongOnly, &BacktestOptions::default()).unwrap();
        worst = worst.max((a.alpha - 0.002).abs());
    }
    assert!(worst < 1e-10, "alpha off by {worst:e}");
    format!("ols, fama-macbeth (MT {mt:.10}), factor alpha (|err| {worst:.1e})")
}

fn criterion_8() -> String {
    let mut scores = Vec::new();
    let mut returns = ReturnsTable::new();
    let first = yq(2018, 1);
    for i in 0..10 {
        let f = firm(&format!("F{i}"));
        for k in 0..24 {
            scores.push(MovingTargetsScore {
                firm: f.clone(),
                period: first.shift_quarters(k),
                method: ScoreMethod::Semantic,
                tau: Some(0.65),
                value: Some(i as f64 / 10.0),
                n_prev: 1,
                n_curr: 1,
                direction: Direction::Retention,
                skipped: None,
            });
        }
        let ret = match i {
            0 | 1 => 0.01,
            8 | 9 => -0.01,
            _ => 0.004,
        };
        let months = YearMonth::range_inclusive("2017-01".parse().unwrap(), "2024-06".parse().unwrap());
        for (n, m) in months.enumerate() {
            let row = ReturnRow {
                ret,
                market_cap: Some(1e3 * (1.0 + i as f64) * (1.0 + n as f64 / 100.0)),
                book_to_market: Some(0.5 + i as f64 / 20.0),
            };
            returns.insert(f.clone(), m, row).unwrap();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let factors = synthetic_factors(200, &mut rng);
    let result = run_backtest(
        "constructed",
        Direction::Retention,
        &scores,
        &returns,
        &factors,
        &BacktestOptions::default(),
    )
    .unwrap();
    let q1 = result.portfolios.quintile(1);
    let q5 = result.portfolios.quintile(5);
    let spread = moving_targets::backtest::long_short_spread(q5, q1).unwrap();
    assert!(spread.len() >= 24);
    assert!(spread.iter().all(|(_, v)| v == -0.02), "spread not -0.02 every month");
    let excess = &result.alphas.get(FactorModel::Excess)[5];
    assert!((excess.alpha + 0.02).abs() < 1e-12, "excess mean {}", excess.alpha);
    assert_eq!(excess.t_stat, 0.0);
    assert!(excess.degenerate);
    let csv = tab3_csv(std::slice::from_ref(&result));
    let flag = csv
        .lines()
        .find(|l| l.starts_with("constructed,retention,excess,degenerate"))
        .unwrap();
    assert!(flag.ends_with(",1"), "flag missing in report: {flag}");
    format!("{} months of Q5-Q1 = -0.02; excess t = 0 with degenerate flag", spread.len())
}

fn criterion_9() -> String {
    let start = Instant::now();
    let config = fixtures().join("corpus/run.toml");
    let config = config.to_str().unwrap();
    let firms: BTreeSet<String> = std::fs::read_dir(fixtures().join("corpus/transcripts"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().split('_').next().unwrap().to_string())
        .collect();
    assert!(firms.len() >= 3);
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().unwrap();
        let out_dir = out.path().to_str().unwrap();
        for cmd in ["extract", "score", "backtest", "report-frequencies"] {
            let (code, _, stderr) = run_cli(&["--config", config, "--offline", "--out-dir", out_dir, cmd]);
            assert_eq!(code, 0, "{cmd} failed: {stderr}");
        }
        snapshots.push(snapshot(out.path()));
    }
    let elapsed = start.elapsed();
    assert!(!snapshots[0].is_empty());
    assert_eq!(snapshots[0], snapshots[1], "outputs differ between runs");
    for required in ["backtest/tab3.csv", "backtest/tab4.csv", "backtest/fig2.csv", "scores/llm/scores.csv"] {
        assert!(snapshots[0].contains_key(std::path::Path::new(required)), "missing {required}");
    }
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    format!(
        "{} firms, {} output files byte-identical across two runs, {:.1}s",
        firms.len(),
        snapshots[0].len(),
        elapsed.as_secs_f64()
    )
}

fn criterion_10() -> String {
    let dir = fixtures().join("showcase");
    let load = |name: &str| moving_targets::corpus::load_transcript(dir.join("transcripts").join(name)).unwrap();
    let apple = load("AAPL_2010Q2.json");
    let nvidia = load("NVDA_2025Q2.json");

    let base_apple = extract_targets_baseline(&apple).merged_texts().join("|");
    let base_nvidia = extract_targets_baseline(&nvidia);
    let base_nvidia_texts = base_nvidia.merged_texts();
    let generic = base_apple.split('|').any(|t| t == "year" || t == "units");
    assert!(generic, "no generic fragment in baseline output: {base_apple}");
    assert!(base_nvidia_texts.contains(&"revenue"), "no bare revenue: {base_nvidia_texts:?}");
    assert!(!base_nvidia_texts.iter().any(|t| t.contains("data center")));

    let store = ReplayStore::new(dir.join("responses"));
    let client = ReplayClient::new(store.clone(), "fixture-extractor-v1");
    let llm = extract_targets_llm(&nvidia, &client, &RetryPolicy::none()).unwrap();
    let key = moving_targets::extract::digest_key("fixture-extractor-v1", &build_extraction_prompt(&nvidia));
    let raw = store.get(&key).unwrap();
    assert!(raw.contains("Quarterly Data Center revenue"));
    let llm_texts = llm.targets.merged_texts();
    assert!(llm_texts.contains(&"quarterly data center revenue"));
    assert!(llm_texts.contains(&"quarterly compute revenue growth"));
    assert!(!llm_texts.iter().any(|t| *t == "year" || *t == "units" || *t == "revenue"));
    "baseline emits generic/bare terms; recorded LLM response keeps 'Quarterly Data Center revenue'".into()
}

type Criterion = (&'static str, fn() -> String);

fn main() {
    let criteria: [Criterion; 10] = [
        ("scoring oracle equivalence", criterion_1),
        ("threshold boundary and tau monotonicity", criterion_2),
        ("discrete-score identity", criterion_3),
        ("identity and degenerate cases", criterion_4),
        ("prompt fidelity", criterion_5),
        ("parser validation", criterion_6),
        ("econometrics oracles", criterion_7),
        ("portfolio construction", criterion_8),
        ("end-to-end offline determinism", criterion_9),
        ("baseline failure-mode contrast", criterion_10),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {:>2} FAIL  {name}: {}", i + 1, msg.replace('\n', " "));
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
