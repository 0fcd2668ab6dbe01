//! Regenerates the bundled fixtures: a synthetic multi-firm corpus with
//! recorded extractor responses, a pre-populated embedding cache, monthly
//! returns and factors, plus two showcase calls.
//!
//! Usage: cargo run --example generate_fixture [-- <fixtures dir>]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use moving_targets::corpus::{FirmId, Transcript, YearMonth, YearQuarter};
use moving_targets::embed::{EmbeddingCache, EncoderClient, HashingEncoder};
use moving_targets::extract::{build_extraction_prompt, digest_key, parse_extraction_response, ReplayStore};

const EXTRACTOR_MODEL: &str = "fixture-extractor-v1";
const FIRMS: [&str; 10] = ["ACME", "BOLT", "CRUX", "DYNA", "EVER", "FLUX", "GRID", "HALO", "IONX", "JADE"];
const QUARTERS: i64 = 20;

/// Target phrases with an optional paraphrase used in some later calls.
const VOCAB: &[(&str, Option<&str>)] = &[
    ("gross margin", Some("gross margin expansion")),
    ("operating margin", Some("operating margin improvement")),
    ("free cash flow", Some("free cash flow generation")),
    ("market share", Some("market share gains")),
    ("earnings per share", None),
    ("subscriber growth", Some("subscriber additions")),
    ("same-store sales", Some("same-store sales growth")),
    ("order backlog", Some("backlog")),
    ("capital expenditures", Some("capital spending")),
    ("share repurchases", Some("share buybacks")),
    ("dividend growth", None),
    ("cost savings program", Some("cost savings")),
    ("inventory levels", Some("inventory management")),
    ("data center revenue", Some("data center revenue growth")),
    ("cloud revenue", Some("cloud revenue growth")),
    ("services revenue", None),
    ("customer retention", Some("customer retention rate")),
    ("average selling price", Some("average selling prices")),
    ("unit shipments", None),
    ("net interest margin", None),
    ("loan growth", None),
    ("return on equity", None),
    ("operating expenses", Some("operating expense discipline")),
    ("research and development spending", Some("research and development investment")),
    ("international expansion", None),
    ("new product launches", Some("product launch cadence")),
    ("supply chain efficiency", None),
    ("digital sales penetration", Some("digital penetration")),
    ("advertising revenue", None),
    ("recurring revenue", Some("recurring revenue mix")),
    ("working capital", None),
    ("leverage ratio", None),
];

const PRESENTATION_TEMPLATES: &[&str] = &[
    "We continue to focus on {}, and we were pleased with the progress this quarter.",
    "{} came in ahead of our plan, up 7% from a year ago.",
    "Looking ahead, {} remains a key priority for the full year.",
    "We saw solid momentum in {} and expect that to continue.",
    "On {}, results improved again, roughly $1.2 billion on a trailing basis.",
];

const QUESTION_TEMPLATES: &[&str] = &[
    "Can you talk about {} for the rest of the year?",
    "How should we think about {} into next quarter?",
    "Could you give more color on {}?",
];

const ANSWER_TEMPLATES: &[&str] = &[
    "Sure. On {}, we expect continued improvement in the second half.",
    "We are comfortable with where {} is trending, and we will update you next quarter.",
];

struct Call {
    firm: FirmId,
    period: YearQuarter,
    /// Vocabulary index and whether the paraphrase is used.
    targets: Vec<(usize, bool)>,
    /// Planned retention share versus the call a year earlier.
    retention: Option<f64>,
}

fn phrase(idx: usize, paraphrase: bool) -> &'static str {
    let (base, alt) = VOCAB[idx];
    match (paraphrase, alt) {
        (true, Some(a)) => a,
        _ => base,
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().collect::<String>() + c.as_str())
}

fn fill(template: &str, label: &str) -> String {
    if template.starts_with("{}") {
        template.replacen("{}", &capitalize(label), 1)
    } else {
        template.replacen("{}", label, 1)
    }
}

fn styled(label: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..3) {
        0 => label.to_string(),
        1 => capitalize(label),
        _ => label.split(' ').map(capitalize).collect::<Vec<_>>().join(" "),
    }
}

fn plan_calls(rng: &mut ChaCha8Rng) -> Vec<Call> {
    let mut calls = Vec::new();
    for firm in FIRMS {
        let mut pool: Vec<usize> = (0..VOCAB.len()).collect();
        pool.shuffle(rng);
        pool.truncate(12);
        let mut history: Vec<Vec<(usize, bool)>> = Vec::new();
        for k in 0..QUARTERS {
            let period = YearQuarter::new(2019, 1).unwrap().shift_quarters(k);
            let size = rng.gen_range(5..=7);
            let (mut targets, retention) = if k < 4 {
                let mut p = pool.clone();
                p.shuffle(rng);
                (p.into_iter().take(size).map(|i| (i, false)).collect::<Vec<_>>(), None)
            } else {
                let prev = &history[(k - 4) as usize];
                let keep_p: f64 = rng.gen_range(0.3..1.0);
                let mut kept = Vec::new();
                for (i, _) in prev {
                    if rng.gen_bool(keep_p) {
                        kept.push((*i, rng.gen_bool(0.3)));
                    }
                }
                let share = kept.len() as f64 / prev.len() as f64;
                (kept, Some(share))
            };
            let mut fresh: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|i| !targets.iter().any(|(t, _)| t == i))
                .filter(|i| k < 4 || !history[(k - 4) as usize].iter().any(|(t, _)| t == i))
                .collect();
            fresh.shuffle(rng);
            while targets.len() < size {
                match fresh.pop() {
                    Some(i) => targets.push((i, false)),
                    None => break,
                }
            }
            history.push(targets.clone());
            calls.push(Call {
                firm: FirmId::new(firm).unwrap(),
                period,
                targets,
                retention,
            });
        }
    }
    calls
}

/// Builds the transcript and the extractor response a careful model would
/// return for it.
fn render_call(call: &Call, rng: &mut ChaCha8Rng) -> (Transcript, String) {
    let firm = call.firm.as_str();
    let q = format!("{} quarter {}", call.period.year(), call.period.quarter());
    let labels: Vec<&str> = call.targets.iter().map(|(i, p)| phrase(*i, *p)).collect();

    // The last target is sometimes raised only in Q&A.
    let qa_only = labels.len() > 5 && rng.gen_bool(0.3);
    let pres: Vec<&str> = if qa_only { labels[..labels.len() - 1].to_vec() } else { labels.clone() };
    let split = pres.len().div_ceil(2);
    let sentence = |rng: &mut ChaCha8Rng, l: &str| fill(PRESENTATION_TEMPLATES.choose(rng).unwrap(), l);
    let ceo: Vec<String> = pres[..split].iter().map(|l| sentence(rng, l)).collect();
    let cfo: Vec<String> = pres[split..].iter().map(|l| sentence(rng, l)).collect();

    let mut qa_labels = vec![*labels.last().unwrap()];
    if !qa_only || rng.gen_bool(0.5) {
        qa_labels.insert(0, labels[rng.gen_range(0..pres.len())]);
    }
    qa_labels.dedup();

    let mut dialog: Vec<(String, String)> = vec![
        ("Operator".into(), format!("Good day, and welcome to the {firm} {q} earnings conference call.")),
        (
            "Alex Morgan - Executives".into(),
            format!("Thank you, operator. Revenue was $4.1 billion this quarter. {}", ceo.join(" ")),
        ),
        (
            "Jordan Lee - Executives".into(),
            format!("Thanks, Alex. {} We are maintaining our guidance range.", cfo.join(" ")),
        ),
        (
            "Operator".into(),
            "We will now begin the question-and-answer session. [Operator Instructions] Our first question comes from Sam Patel."
                .into(),
        ),
    ];
    let mut qa_items = Vec::new();
    for (n, label) in qa_labels.iter().enumerate() {
        let analyst = if n == 0 { "Sam Patel - Analysts" } else { "Riley Chen - Analysts" };
        dialog.push((analyst.into(), fill(QUESTION_TEMPLATES.choose(rng).unwrap(), label)));
        dialog.push((
            "Alex Morgan - Executives".into(),
            fill(ANSWER_TEMPLATES.choose(rng).unwrap(), label),
        ));
        qa_items.push(json!({"target": styled(label, rng), "index": dialog.len() - 1}));
    }
    dialog.push(("Operator".into(), "This concludes today's conference call. You may now disconnect.".into()));

    let mut pres_items: Vec<serde_json::Value> = Vec::new();
    for (n, label) in pres.iter().enumerate() {
        let index = if n < split { 1 } else { 2 };
        pres_items.push(json!({"target": styled(label, rng), "index": index}));
    }
    // Occasional rule-breaking or duplicate items, as real models produce.
    if rng.gen_bool(0.15) {
        let bad = ["revenue of $4.1 billion", "margin above 40 percent", "growth of 7%"].choose(rng).unwrap();
        pres_items.push(json!({"target": bad, "index": 1}));
    }
    if rng.gen_bool(0.1) {
        pres_items.push(json!({"target": pres[0].to_uppercase(), "index": 1}));
    }

    let transcript = Transcript::from_dialog(call.firm.clone(), call.period, dialog).unwrap();
    let body = serde_json::to_string_pretty(&json!({"presentation": pres_items, "analyst_qa": qa_items})).unwrap();
    let response = if rng.gen_bool(0.2) { format!("```json\n{body}\n```") } else { body };
    (transcript, response)
}

fn write(path: &Path, body: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, body).unwrap();
}

fn transcript_file(t: &Transcript) -> String {
    format!("{}_{}Q{}.json", t.firm, t.period.year(), t.period.quarter())
}

/// Stores the transcript, its recorded response, and embeddings for the
/// response's labels.
fn record(dir: &Path, t: &Transcript, response: &str, cache: &EmbeddingCache) {
    write(&dir.join("transcripts").join(transcript_file(t)), &(t.to_json() + "\n"));
    let store = ReplayStore::new(dir.join("responses"));
    store
        .put(&digest_key(EXTRACTOR_MODEL, &build_extraction_prompt(t)), response)
        .unwrap();
    let parsed = parse_extraction_response(response, t.len()).unwrap();
    let texts: Vec<String> = parsed.labels.iter().map(|l| l.text.clone()).collect();
    for (text, v) in texts.iter().zip(HashingEncoder.embed(&texts).unwrap()) {
        cache.put(text, &v).unwrap();
    }
}

fn market_data(dir: &Path, calls: &[Call], rng: &mut ChaCha8Rng) {
    let start: YearMonth = "2018-01".parse().unwrap();
    let end: YearMonth = "2024-06".parse().unwrap();
    let months: Vec<YearMonth> = YearMonth::range_inclusive(start, end).collect();
    let n = |mu: f64, sd: f64| Normal::new(mu, sd).unwrap();
    let (mkt, smb, hml, mom, liq) = (n(0.006, 0.04), n(0.0, 0.02), n(0.0, 0.02), n(0.004, 0.03), n(0.0, 0.015));

    let mut factor_rows = Vec::new();
    let mut factors = BTreeMap::new();
    for m in &months {
        let row = [
            mkt.sample(rng),
            smb.sample(rng),
            hml.sample(rng),
            mom.sample(rng),
            liq.sample(rng),
            rng.gen_range(0.0005..0.004),
        ]
        .map(|x: f64| (x * 1e6).round() / 1e6);
        factors.insert(*m, row);
        factor_rows.push(format!(
            "{m},{},{},{},{},{},{}",
            row[0], row[1], row[2], row[3], row[4], row[5]
        ));
    }
    write(
        &dir.join("factors.csv"),
        &(String::from("month,mkt_rf,smb,hml,mom,liq,rf\n") + &factor_rows.join("\n") + "\n"),
    );

    let retention: BTreeMap<(&str, YearQuarter), f64> = calls
        .iter()
        .filter_map(|c| c.retention.map(|r| ((c.firm.as_str(), c.period), r)))
        .collect();
    let noise = n(0.0, 0.05);
    let mut lines = vec!["firm,month,ret,mktcap,bm".to_string()];
    for firm in FIRMS {
        let beta = rng.gen_range(0.7..1.3);
        let size_tilt = rng.gen_range(-0.5..0.8);
        let mut cap: f64 = rng.gen_range(9.0f64..12.0).exp();
        let mut bm: f64 = rng.gen_range(0.2..1.5);
        for m in &months {
            let f = factors[m];
            // Score in force: the latest call strictly before this month.
            let call_q = YearQuarter::new(m.prev().year(), (m.prev().month() - 1) / 3 + 1).unwrap();
            let signal = retention.get(&(firm, call_q)).map_or(0.0, |r| 0.03 * (0.65 - r));
            let ret = (0.003 + f[5] + beta * f[0] + size_tilt * f[1] + signal + noise.sample(rng)).max(-0.9);
            let ret = (ret * 1e6).round() / 1e6;
            cap *= 1.0 + ret;
            bm *= (0.02 * noise.sample(rng)).exp();
            lines.push(format!("{firm},{m},{ret},{:.2},{:.4}", cap, bm));
        }
    }
    write(&dir.join("returns.csv"), &(lines.join("\n") + "\n"));
}

fn corpus(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
    let calls = plan_calls(&mut rng);
    let cache = EmbeddingCache::new(dir.join("embeddings"));
    for call in &calls {
        let (t, response) = render_call(call, &mut rng);
        record(dir, &t, &response, &cache);
    }
    market_data(dir, &calls, &mut rng);
    write(
        &dir.join("run.toml"),
        "out_dir = \"out\"\nmethod = \"both\"\ntop_k = 20\n\n\
         [corpus]\ntranscripts_dir = \"transcripts\"\nreturns = \"returns.csv\"\nfactors = \"factors.csv\"\n\n\
         [extractor]\nmodel_id = \"fixture-extractor-v1\"\nresponses_dir = \"responses\"\noffline = true\nparallelism = 4\n\n\
         [encoder]\nmodel_id = \"hashing-ngram-256\"\ncache_dir = \"embeddings\"\n\n\
         [score]\ntau = 0.65\ndirection = \"retention\"\n",
    );
}

fn showcase(dir: &Path) {
    let cache = EmbeddingCache::new(dir.join("embeddings"));
    let apple = Transcript::from_dialog(
        FirmId::new("AAPL").unwrap(),
        YearQuarter::new(2010, 2).unwrap(),
        [
            ("Operator", "Good day, and welcome to the Apple second quarter fiscal 2010 earnings conference call."),
            (
                "Peter Oppenheimer - Executives",
                "We are very pleased to report record revenue for a March quarter. We sold 2.94 million Macs, \
                 a 33% increase in units over the year-ago quarter. iPhone sales of 8.75 million units represented \
                 131% growth over the prior year, and we ended the quarter with strong demand.",
            ),
            (
                "Peter Oppenheimer - Executives",
                "Gross margin was 41.7%, and we generated cash of $2.4 billion during the quarter. \
                 Looking ahead to the June quarter, we expect revenue of about $13 billion to $13.4 billion.",
            ),
            ("Operator", "[Operator Instructions] Our first question comes from Katy Huberty."),
            ("Katy Huberty - Analysts", "Can you talk about iPhone units and channel inventory for the rest of the year?"),
            (
                "Tim Cook - Executives",
                "We ended the quarter within our target range of channel inventory, and we are very pleased \
                 with iPhone unit sales growth this year.",
            ),
        ],
    )
    .unwrap();
    let apple_response = serde_json::to_string_pretty(&json!({
        "presentation": [
            {"target": "Quarterly Mac unit sales growth", "index": 1},
            {"target": "Quarterly iPhone unit sales growth", "index": 1},
            {"target": "Gross margin", "index": 2},
            {"target": "Quarterly revenue outlook", "index": 2}
        ],
        "analyst_qa": [
            {"target": "Channel inventory level", "index": 5},
            {"target": "iPhone unit sales growth", "index": 5}
        ]
    }))
    .unwrap();

    let nvidia = Transcript::from_dialog(
        FirmId::new("NVDA").unwrap(),
        YearQuarter::new(2025, 2).unwrap(),
        [
            ("Operator", "Good afternoon. Welcome to NVIDIA's conference call for the second quarter of fiscal 2025."),
            (
                "Colette Kress - Executives",
                "Data Center revenue of $26.3 billion was a record, up 154% from a year ago and up 16% sequentially, \
                 driven by strong demand for NVIDIA Hopper GPU computing and our networking platforms. \
                 Compute revenue grew more than 2.5 times, and networking revenue grew more than 2 times from the last year.",
            ),
            (
                "Colette Kress - Executives",
                "GAAP gross margins were 75.1%. For the third quarter, total revenue is expected to be $32.5 billion.",
            ),
            ("Operator", "[Operator Instructions] Your first question comes from Vivek Arya."),
            ("Vivek Arya - Analysts", "How should we think about Data Center revenue growth into next year?"),
            (
                "Jensen Huang - Executives",
                "Demand for accelerated computing remains strong, and we expect Data Center revenue to keep growing.",
            ),
        ],
    )
    .unwrap();
    let nvidia_response = serde_json::to_string_pretty(&json!({
        "presentation": [
            {"target": "Quarterly Data Center revenue", "index": 1},
            {"target": "Quarterly Compute revenue growth", "index": 1},
            {"target": "Quarterly Networking revenue growth", "index": 1},
            {"target": "GAAP gross margin", "index": 2},
            {"target": "Quarterly revenue outlook", "index": 2}
        ],
        "analyst_qa": [
            {"target": "Data Center revenue growth", "index": 4},
            {"target": "Accelerated computing demand", "index": 5}
        ]
    }))
    .unwrap();

    record(dir, &apple, &apple_response, &cache);
    record(dir, &nvidia, &nvidia_response, &cache);
}

fn parser_fixture(dir: &Path) {
    let body = serde_json::to_string_pretty(&json!({
        "presentation": [
            {"target": "Gross margin", "index": 1},
            {"target": "Q3 revenue", "index": 1},
            {"target": "Free cash flow", "index": 2},
            {"target": "Operating margin above forty %", "index": 2}
        ],
        "analyst_qa": [
            {"target": "Market share", "index": 4},
            {"target": "Top 5 customer growth", "index": 4}
        ]
    }))
    .unwrap();
    write(&dir.join("mixed_response.json"), &(body + "\n"));
}

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    for sub in ["corpus", "showcase", "parser"] {
        let _ = std::fs::remove_dir_all(root.join(sub));
    }
    corpus(&root.join("corpus"));
    showcase(&root.join("showcase"));
    parser_fixture(&root.join("parser"));
    let count = |p: PathBuf| std::fs::read_dir(p).map_or(0, |d| d.count());
    println!(
        "wrote {} transcripts, {} responses, {} embeddings under {}",
        count(root.join("corpus/transcripts")),
        count(root.join("corpus/responses")),
        count(root.join("corpus/embeddings")),
        root.display()
    );
}
