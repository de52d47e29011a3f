//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit when any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cmo_core::config::Config;
use cmo_core::context::{ContextItem, ContextKind, Provenance};
use cmo_core::diff::{parse_unified_diff, CommitDiff, Fingerprint};
use cmo_core::llm::LlmError;
use cmo_core::optimizer::{optimize, MessageUpdater, OptimizeDeps, UpdateRequest};
use cmo_core::optimizer::{OptimizationResult, OptimizerConfig, StopReason};
use cmo_core::quality::{
    bleu4, combined_metric_score, prepare_finetune_dataset, rouge_l_f1, tokenize, Evaluate, Evaluation, LabeledExample,
    Metric, MetricWeights, QualityError, QualityVector,
};
use cmo_core::retrieval::{
    query_similar, CorpusEntry, CorpusMeta, CorpusStore, Embedder, HashEmbedder, RetrievalConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn reference_combined(sim: f64, llm: u8, w: &MetricWeights<f64>) -> f64 {
    if !w.use_sim {
        return llm as f64;
    }
    let s = sim.clamp(0.0, 1.0);
    (w.sim_coeff * 4.0 * s + w.llm_coeff * llm as f64) / (w.sim_coeff + w.llm_coeff)
}

fn random_weights(rng: &mut ChaCha8Rng) -> MetricWeights<f64> {
    let mut w = MetricWeights {
        sim_coeff: rng.gen_range(0.0..10.0),
        llm_coeff: rng.gen_range(0.0..10.0),
        use_sim: rng.gen_bool(0.8),
    };
    if w.sim_coeff + w.llm_coeff == 0.0 {
        w.llm_coeff = 1.0;
    }
    w
}

fn combined_score() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = Metric::Rationality;
    for i in 0..50 {
        let sim = rng.gen_range(-1.0..1.0);
        let llm = rng.gen_range(0..=4u8);
        let w = random_weights(&mut rng);
        let got = combined_metric_score(m, sim, llm, &w).map_err(|e| e.to_string())?;
        let want = reference_combined(sim, llm, &w);
        ensure((got - want).abs() <= 1e-12, || format!("triple {i}: {got} vs {want}"))?;
    }
    for i in 0..1000 {
        let w = random_weights(&mut rng);
        let (s1, s2) = (rng.gen_range(-1.0..1.0f64), rng.gen_range(-1.0..1.0f64));
        let (l1, l2) = (rng.gen_range(0..=4u8), rng.gen_range(0..=4u8));
        let score = |s, l, w: &MetricWeights<f64>| combined_metric_score(m, s, l, w).unwrap();
        let (lo_s, hi_s) = (s1.min(s2), s1.max(s2));
        let (lo_l, hi_l) = (l1.min(l2), l1.max(l2));
        ensure(score(lo_s, l1, &w) <= score(hi_s, l1, &w) + 1e-12, || {
            format!("case {i}: not monotone in sim")
        })?;
        ensure(score(s1, lo_l, &w) <= score(s1, hi_l, &w) + 1e-12, || {
            format!("case {i}: not monotone in label")
        })?;
        let c = rng.gen_range(0.01..100.0);
        let scaled = MetricWeights {
            sim_coeff: w.sim_coeff * c,
            llm_coeff: w.llm_coeff * c,
            use_sim: w.use_sim,
        };
        let (a, b) = (score(s1, l1, &w), score(s1, l1, &scaled));
        ensure((a - b).abs() <= 1e-12, || {
            format!("case {i}: scaling by {c} moved {a} to {b}")
        })?;
        ensure((0.0..=4.0).contains(&a), || format!("case {i}: {a} out of range"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- 2, 8

/// Appends `[ctx:<kind>]` to the message.
struct Marker;

impl MessageUpdater<f64> for Marker {
    fn update(&self, req: &UpdateRequest<'_, f64>) -> Result<String, LlmError> {
        Ok(format!("{} [ctx:{}]", req.current_message, req.context.kind))
    }
}

/// `base` plus `gains[i]` for the i-th marker in the message.
struct Scripted {
    base: f64,
    gains: Vec<f64>,
}

impl Evaluate<f64> for Scripted {
    fn evaluate(&self, _: &CommitDiff, message: &str) -> Result<Evaluation<f64>, QualityError> {
        let markers = message.matches("[ctx:").count();
        let score = self.base + self.gains[..markers].iter().sum::<f64>();
        let quality = QualityVector::from_array([(score / 4.0).clamp(0.0, 4.0); 4])?;
        Ok(Evaluation {
            score: quality.optimization_score(),
            quality,
            labels: [0; 4],
            sim: None,
            diff_truncated: false,
        })
    }
}

fn small_diff() -> CommitDiff {
    parse_unified_diff("--- a/A.java\n+++ b/A.java\n@@ -1 +1 @@\n-a\n+b\n").unwrap()
}

fn items(kinds: &[ContextKind]) -> Vec<ContextItem> {
    kinds
        .iter()
        .map(|&kind| ContextItem {
            kind,
            payload: format!("payload for {kind}"),
            locator: None,
            provenance: Provenance::new("acceptance"),
        })
        .collect()
}

fn run_scripted(eval: &Scripted, kinds: &[ContextKind], cfg: &OptimizerConfig<f64>) -> OptimizationResult<f64> {
    let deps = OptimizeDeps {
        evaluator: eval,
        updater: &Marker,
        exemplars: &[],
        commit_type: None,
    };
    optimize(&small_diff(), "fix a", &items(kinds), cfg, &deps).unwrap()
}

fn search_trace() -> Result<(), String> {
    let cfg = OptimizerConfig::default();
    let all = ContextKind::INJECTABLE;
    let plus_one = Scripted {
        base: 8.0,
        gains: vec![1.0; 7],
    };
    let r = run_scripted(&plus_one, &all, &cfg);
    ensure(r.score == 15.0, || format!("+1 script reached {}", r.score))?;
    ensure(r.updates.len() <= 7, || format!("{} recorded bests", r.updates.len()))?;
    let again = run_scripted(&plus_one, &all, &cfg);
    ensure(r.trace_jsonl() == again.trace_jsonl(), || {
        "trace differs between runs".into()
    })?;

    // hand replay of the decaying threshold
    let halving = Scripted {
        base: 8.0,
        gains: (0..7).map(|i| 0.5f64.powi(i)).collect(),
    };
    let (n, thr0) = (50.0, 0.05 * 8.0);
    let (mut thr, mut bests, mut predicted) = (thr0, vec![8.0], None);
    for step in 1..=50usize {
        thr = f64::max(thr * (n - step as f64) / n, thr0 / n);
        bests.push(8.0 + halving.gains[..step.min(7)].iter().sum::<f64>());
        let k = bests.len() - 1;
        if k >= 2 && bests[k] - bests[k - 2] < thr {
            predicted = Some(step);
            break;
        }
    }
    let r = run_scripted(&halving, &all, &cfg);
    ensure(r.stop_reason == StopReason::Converged, || {
        format!("stopped with {:?}", r.stop_reason)
    })?;
    ensure(Some(r.steps_used) == predicted, || {
        format!("stopped at {} vs predicted {predicted:?}", r.steps_used)
    })
}

fn never_regress() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for run in 0..50 {
        let adversarial = run % 3 == 0;
        let base = rng.gen_range(0.0..16.0);
        let gains: Vec<f64> = (0..7)
            .map(|_| {
                if adversarial {
                    -rng.gen_range(0.01..4.0)
                } else {
                    rng.gen_range(-4.0..4.0)
                }
            })
            .collect();
        let mut kinds = ContextKind::INJECTABLE.to_vec();
        kinds.shuffle(&mut rng);
        kinds.truncate(rng.gen_range(1..=7));
        let cfg = OptimizerConfig {
            step_limit: rng.gen_range(1..=50),
            p: rng.gen_range(0.0..0.2),
            ..Default::default()
        };
        let eval = Scripted { base, gains };
        let r = run_scripted(&eval, &kinds, &cfg);
        ensure(r.score >= r.initial_score, || {
            format!("run {run}: {} < {}", r.score, r.initial_score)
        })?;
        if r.updates.is_empty() {
            ensure(r.message == "fix a", || {
                format!("run {run}: message changed without an update")
            })?;
        }
        if adversarial {
            ensure(r.updates.is_empty(), || {
                format!("run {run}: adversarial run recorded an update")
            })?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- 3

const WORDS: &[&str] = &[
    "item",
    "stock",
    "price",
    "total",
    "discount",
    "restock",
    "amount",
    "repo",
    "save",
    "find",
    "csv",
    "parse",
    "row",
    "header",
    "audit",
    "log",
    "category",
    "normalize",
    "check",
    "null",
    "list",
    "map",
];

fn random_diff(rng: &mut ChaCha8Rng, i: usize) -> String {
    let mut line = |n: usize| {
        (0..n)
            .map(|_| *WORDS.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let (old, new) = (line(6), line(6));
    format!("--- a/F{i}.java\n+++ b/F{i}.java\n@@ -1 +1 @@\n-{old}\n+{new}\n")
}

fn retrieval() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = HashEmbedder::<f64>::new(64);
    let mut store = CorpusStore::empty(&e, &e).map_err(|x| x.to_string())?;
    for i in 0..200 {
        let diff_text = random_diff(&mut rng, i);
        let message_text = format!("Change {}", WORDS[i % WORDS.len()]);
        store.entries.push(CorpusEntry {
            entry_id: format!("e{i:03}"),
            diff_fingerprint: Fingerprint::of_text(&diff_text),
            diff_embedding: e.embed(&diff_text).map_err(|x| x.to_string())?,
            message_embedding: e.embed(&message_text).map_err(|x| x.to_string())?,
            diff_text,
            message_text,
            meta: CorpusMeta::default(),
        });
    }
    for entry in &store.entries {
        for v in [&entry.diff_embedding, &entry.message_embedding] {
            let norm = v.components().iter().map(|x| x * x).sum::<f64>().sqrt();
            ensure((norm - 1.0).abs() <= 1e-6, || {
                format!("{}: norm {norm}", entry.entry_id)
            })?;
        }
    }

    let cfg = RetrievalConfig::default();
    for q in 0..100 {
        let diff = parse_unified_diff(&random_diff(&mut rng, 1000 + q)).map_err(|x| x.to_string())?;
        let got: Vec<&str> = query_similar(&diff, &store, &e, &cfg)
            .map_err(|x| x.to_string())?
            .iter()
            .map(|r| r.entry.entry_id.as_str())
            .collect();
        let qv = e.embed(&diff.raw_text).map_err(|x| x.to_string())?;
        let mut all: Vec<(f64, &str)> = store
            .entries
            .iter()
            .map(|en| {
                let dot = qv
                    .components()
                    .iter()
                    .zip(en.diff_embedding.components())
                    .map(|(a, b)| a * b)
                    .sum();
                (dot, en.entry_id.as_str())
            })
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        let want: Vec<&str> = all.iter().take(10).map(|x| x.1).collect();
        ensure(got == want, || format!("query {q}: {got:?} vs {want:?}"))?;
    }

    let dir = tempfile::tempdir().map_err(|x| x.to_string())?;
    let path = dir.path().join("corpus.jsonl");
    store.save(&path).map_err(|x| x.to_string())?;
    let loaded = CorpusStore::<f64>::load(&path).map_err(|x| x.to_string())?;
    let bits = |s: &CorpusStore<f64>| -> Vec<u64> {
        s.entries
            .iter()
            .flat_map(|en| {
                en.diff_embedding
                    .components()
                    .iter()
                    .chain(en.message_embedding.components())
            })
            .map(|x| x.to_bits())
            .collect()
    };
    ensure(loaded == store && bits(&loaded) == bits(&store), || {
        "save/load changed the corpus".into()
    })?;
    let bytes = fs::read_to_string(&path).map_err(|x| x.to_string())?;
    ensure(bytes == loaded.to_jsonl(), || {
        "re-serialized corpus differs from file".into()
    })
}

// ---------------------------------------------------------------- 4

fn defaults() -> Result<(), String> {
    let cfg = Config::<f64>::resolve(None, |_| None).map_err(|e| e.to_string())?;
    let got = (
        cfg.optimizer.p,
        cfg.optimizer.step_limit,
        cfg.optimizer.escalation_temperature,
        cfg.optimizer.base_temperature,
        cfg.retrieval.k,
    );
    ensure(got == (0.05, 50, 1.0, 0.0, 10), || {
        format!("defaults resolved to {got:?}")
    })
}

// ---------------------------------------------------------------- 5

fn extraction() -> Result<(), String> {
    let m = common::manifest();
    ensure(m.java_files >= 20, || format!("only {} fixture files", m.java_files))?;
    common::extraction::check_decls()?;
    common::extraction::check_blocks_with_oracle()?;
    common::extraction::check_commits(&common::fixture_repo())
}

// ---------------------------------------------------------------- 6

fn oversampling() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dir = tempfile::tempdir().map_err(|x| x.to_string())?;
    for case in 0..30 {
        let mut labels: Vec<u8> = (0..=4).collect();
        labels.shuffle(&mut rng);
        labels.truncate(rng.gen_range(1..=5));
        let mut input = Vec::new();
        let mut counts = BTreeMap::new();
        for &l in &labels {
            let n = rng.gen_range(1..=20);
            counts.insert(l, n);
            for j in 0..n {
                input.push(LabeledExample {
                    diff_text: format!("diff {l}/{j}"),
                    message_text: format!("message {l}/{j}"),
                    scores: [rng.gen_range(0..=4), l, rng.gen_range(0..=4), rng.gen_range(0..=4)],
                });
            }
        }
        let max = *counts.values().max().unwrap();
        let seed = rng.gen();
        let ds = prepare_finetune_dataset(&input, Metric::Comprehensiveness, seed).map_err(|e| e.to_string())?;
        let mut out_counts = BTreeMap::new();
        for e in &ds.examples {
            *out_counts.entry(e.scores[1]).or_insert(0usize) += 1;
        }
        ensure(
            out_counts.keys().eq(counts.keys()) && out_counts.values().all(|&c| c == max),
            || format!("case {case}: counts {out_counts:?}, input {counts:?}"),
        )?;
        let tally = |xs: &[LabeledExample]| {
            let mut t = BTreeMap::new();
            for x in xs {
                *t.entry(serde_json::to_string(x).unwrap()).or_insert(0usize) += 1;
            }
            t
        };
        let (tin, tout) = (tally(&input), tally(&ds.examples));
        ensure(tin.iter().all(|(k, n)| tout.get(k).is_some_and(|m| m >= n)), || {
            format!("case {case}: output is not a superset of the input")
        })?;
        let (a, b) = (
            dir.path().join(format!("{case}a.jsonl")),
            dir.path().join(format!("{case}b.jsonl")),
        );
        ds.write(&a).map_err(|e| e.to_string())?;
        prepare_finetune_dataset(&input, Metric::Comprehensiveness, seed)
            .and_then(|d| d.write(&b))
            .map_err(|e| e.to_string())?;
        ensure(fs::read(&a).unwrap() == fs::read(&b).unwrap(), || {
            format!("case {case}: files differ")
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------- 7

#[derive(Deserialize)]
struct Pair {
    candidate: String,
    reference: String,
}

/// Lowercased runs of letters, digits and `_`; any other visible character
/// is a token by itself.
fn oracle_tokens(text: &str) -> Vec<String> {
    let re = regex::Regex::new(r"[\p{Alphabetic}\p{N}_]+|\S").unwrap();
    re.find_iter(&text.to_lowercase())
        .map(|m| m.as_str().to_string())
        .collect()
}

fn oracle_bleu(c: &[String], r: &[String]) -> f64 {
    let mut logs = Vec::new();
    for n in 1..=4usize.min(c.len()) {
        let cg: Vec<&[String]> = c.windows(n).collect();
        let mut rg: Vec<&[String]> = r.windows(n).collect();
        let mut hits = 0;
        for g in &cg {
            if let Some(pos) = rg.iter().position(|x| x == g) {
                rg.swap_remove(pos);
                hits += 1;
            }
        }
        if hits == 0 {
            return 0.0;
        }
        logs.push((hits as f64 / cg.len() as f64).ln());
    }
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

fn oracle_lcs(a: &[String], b: &[String], memo: &mut BTreeMap<(usize, usize), usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let key = (a.len(), b.len());
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let v = if a[0] == b[0] {
        1 + oracle_lcs(&a[1..], &b[1..], memo)
    } else {
        oracle_lcs(&a[1..], b, memo).max(oracle_lcs(a, &b[1..], memo))
    };
    memo.insert(key, v);
    v
}

fn oracle_rouge(c: &[String], r: &[String]) -> f64 {
    let l = oracle_lcs(c, r, &mut BTreeMap::new()) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, rc) = (l / c.len() as f64, l / r.len() as f64);
    2.0 * p * rc / (p + rc)
}

fn reference_metrics() -> Result<(), String> {
    let text = fs::read_to_string(common::fixtures().join("reference_pairs.json")).map_err(|e| e.to_string())?;
    let pairs: Vec<Pair> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(pairs.len() == 20, || format!("{} fixture pairs", pairs.len()))?;
    for (i, p) in pairs.iter().enumerate() {
        let (c, r) = (tokenize(&p.candidate), tokenize(&p.reference));
        ensure(
            c == oracle_tokens(&p.candidate) && r == oracle_tokens(&p.reference),
            || format!("pair {i}: tokens differ"),
        )?;
        let (b, ob) = (bleu4(&c, &r), oracle_bleu(&c, &r));
        let (l, ol) = (rouge_l_f1(&c, &r), oracle_rouge(&c, &r));
        ensure((b - ob).abs() <= 1e-6, || format!("pair {i}: bleu {b} vs {ob}"))?;
        ensure((l - ol).abs() <= 1e-6, || format!("pair {i}: rouge-l {l} vs {ol}"))?;
        for side in [&c, &r] {
            ensure(bleu4(side, side) == 1.0 && rouge_l_f1(side, side) == 1.0, || {
                format!("pair {i}: identity below 1")
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, Duration); 8] = [
        ("1 combined metric score", combined_score, Duration::from_secs(1)),
        ("2 search trace", search_trace, Duration::from_secs(5)),
        ("3 retrieval", retrieval, Duration::from_secs(10)),
        ("4 default hyper-parameters", defaults, Duration::MAX),
        ("5 context extraction", extraction, Duration::from_secs(5)),
        ("6 oversampling", oversampling, Duration::from_secs(2)),
        ("7 reference metrics", reference_metrics, Duration::MAX),
        ("8 never regress", never_regress, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = outcome.and_then(|_| ensure(took <= budget, || format!("took {took:?}, budget {budget:?}")));
        match outcome {
            Ok(()) => println!("PASS {name} ({} ms)", took.as_millis()),
            Err(e) => {
                failed += 1;
                println!("FAIL {name} ({} ms): {e}", took.as_millis());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
