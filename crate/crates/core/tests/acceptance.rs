//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, non-zero exit
//! if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_spearman, close, GraphOracle};
use taxembed::bench::{one_vs_all_dot, one_vs_all_graph, run_benchmark};
use taxembed::dataset::{self, DatasetConfig, Mode, ScoredPair, TrainingPair};
use taxembed::eval::{spearman, PairScorer};
use taxembed::metrics::propagate_counts;
use taxembed::synth;
use taxembed::trainer::{self, loss_and_gradient, batch_loss, Batch, DenseRows, Entry};
use taxembed::wsd::{build_sentence_graph, select_senses, SentenceInstance, WsdConfig, WsdToken};
use taxembed::{EmbeddingMatrix, Measure, Result, ScoreMode, SimilaritySpec, TaxonomyGraph, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> (bool, String) {
    let ok = elapsed <= Duration::from_secs(limit_secs);
    (ok, format!("{:.2}s of {limit_secs}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 1. Metric oracle equivalence

fn small_graph(rng: &mut ChaCha8Rng, k: usize) -> TaxonomyGraph {
    let n = rng.random_range(2..=50);
    if k.is_multiple_of(2) {
        synth::random_tree(n, rng)
    } else {
        let roots = rng.random_range(1..=3);
        synth::random_dag(n, 0.3, roots, rng)
    }
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut mismatches = Vec::new();
    let mut compared = 0usize;
    for k in 0..200 {
        let g = small_graph(&mut rng, k);
        let oracle = GraphOracle::new(&g);
        let mut raw = synth::random_counts(&g, 100, &mut rng);
        if raw.iter().all(|&c| c == 0.0) {
            raw[0] = 1.0;
        }
        let ic = propagate_counts(&g, &raw).expect("non-zero mass");
        let specs = [
            SimilaritySpec::new(Measure::Shp, &g, None).unwrap(),
            SimilaritySpec::new(Measure::Lch, &g, None).unwrap(),
            SimilaritySpec::new(Measure::Wup, &g, None).unwrap(),
            SimilaritySpec::new(Measure::Jcn, &g, Some(ic)).unwrap(),
        ];
        for u in 0..g.len() {
            for v in 0..g.len() {
                for spec in &specs {
                    let got = spec.similarity(&g, u, v).unwrap();
                    let want = match spec.measure() {
                        Measure::Shp => oracle.shp(u, v),
                        Measure::Lch => oracle.lch(u, v),
                        Measure::Wup => oracle.wup(u, v),
                        Measure::Jcn => oracle.jcn(&raw, u, v),
                    };
                    compared += 1;
                    if let (Some(a), Some(b)) = (got, want) {
                        if a.is_finite() && b.is_finite() {
                            worst = worst.max((a - b).abs());
                        }
                    }
                    if !close(got, want, 1e-9) && mismatches.len() < 3 {
                        mismatches.push(format!("graph {k} {} ({u},{v}): {got:?} vs {want:?}", spec.measure()));
                    }
                }
            }
        }
    }
    let (fast, timing) = within(start.elapsed(), 30);
    Outcome::new(
        mismatches.is_empty() && fast,
        format!(
            "{compared} values on 200 graphs, max abs error {worst:.1e}, {timing}{}",
            if mismatches.is_empty() {
                String::new()
            } else {
                format!("; mismatches: {}", mismatches.join("; "))
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Gradient check

fn random_batch(rng: &mut ChaCha8Rng, n: usize, with_negatives: bool, with_neighbors: bool) -> Batch {
    let len = rng.random_range(1..=12);
    let entries = (0..len)
        .map(|_| {
            let negative = with_negatives && rng.random_bool(0.5);
            let pick = |rng: &mut ChaCha8Rng| rng.random_range(0..n);
            Entry {
                i: pick(rng),
                j: pick(rng),
                s: if negative { 0.0 } else { rng.random_range(0.0..1.0) },
                neighbor_i: (with_neighbors && rng.random_bool(0.8)).then(|| pick(rng)),
                neighbor_j: (with_neighbors && rng.random_bool(0.8)).then(|| pick(rng)),
                negative,
            }
        })
        .collect();
    Batch { entries }
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = rng.random_range(2..=20);
        let dim = rng.random_range(1..=8);
        let alpha = if k % 2 == 0 { 0.0 } else { 0.01 };
        let l1 = if k % 3 == 0 { 0.0 } else { 1e-3 };
        let batch = random_batch(&mut rng, n, k % 4 < 2, alpha > 0.0);
        // Keep parameters away from zero, where the L1 term has a kink.
        let data: Vec<f64> = (0..n * dim)
            .map(|_| {
                let mag = rng.random_range(0.05..1.0);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let rows = DenseRows { dim, data };
        let (_, grad) = loss_and_gradient(&rows, &batch, alpha, l1);
        for (slot, &r) in grad.rows.iter().enumerate() {
            for c in 0..dim {
                let ix = r * dim + c;
                let mut plus = rows.clone();
                plus.data[ix] += h;
                let mut minus = rows.clone();
                minus.data[ix] -= h;
                let fd = (batch_loss(&plus, &batch, alpha, l1) - batch_loss(&minus, &batch, alpha, l1)) / (2.0 * h);
                let an = grad.row(slot)[c];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    let (fast, timing) = within(start.elapsed(), 10);
    Outcome::new(
        worst < 1e-4 && fast,
        format!("max relative error {worst:.2e} (< 1e-4) over 50 instances, {timing}"),
    )
}

// ---------------------------------------------------------------------------
// 3. End-to-end sanity

fn sanity_config(seed: u64) -> TrainConfig {
    TrainConfig {
        dim: 32,
        epochs: 15,
        seed,
        ..TrainConfig::default()
    }
}

fn model_spearman(m: &EmbeddingMatrix, pairs: &[TrainingPair]) -> f64 {
    let pred: Vec<f64> = pairs
        .iter()
        .map(|p| f64::from(m.score_rows(p.u, p.v, ScoreMode::Dot)))
        .collect();
    let gold: Vec<f64> = pairs.iter().map(|p| p.s).collect();
    spearman(&pred, &gold).unwrap()
}

fn sanity_tree(seed: u64) -> TaxonomyGraph {
    synth::random_tree(100, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let g = sanity_tree(303);
    let spec = SimilaritySpec::new(Measure::Shp, &g, None).unwrap();
    let ds = dataset::build_full(&g, &spec, &DatasetConfig::new(Measure::Shp)).unwrap();
    let t = trainer::train(&ds.pairs, &g, &sanity_config(0), None).unwrap();
    let rho = model_spearman(&t.embeddings, &ds.pairs);
    let (fast, timing) = within(start.elapsed(), 60);
    Outcome::new(
        rho >= 0.9 && fast,
        format!(
            "Spearman {rho:.4} (>= 0.9) on {} pairs, best epoch {}/{}, {timing}",
            ds.pairs.len(),
            t.best_epoch,
            t.history.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Fast versus full dataset

fn restricted(g: &TaxonomyGraph, pairs: &[ScoredPair]) -> BTreeMap<(usize, usize), u64> {
    pairs
        .iter()
        .filter(|p| g.path_length(p.u, p.v).is_some_and(|d| d <= 2))
        .map(|p| ((p.u, p.v), p.raw.to_bits()))
        .collect()
}

fn fast_vs_full() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut exact = 0;
    let mut notes = Vec::new();
    for k in 0..50 {
        let n = rng.random_range(3..=100);
        let g = if k % 2 == 0 {
            synth::random_tree(n, &mut rng)
        } else {
            synth::random_dag(n, 0.2, 1, &mut rng)
        };
        let measure = if k % 4 < 2 { Measure::Shp } else { Measure::Lch };
        let spec = SimilaritySpec::new(measure, &g, None).unwrap();
        let mut cfg = DatasetConfig::new(measure);
        if k % 3 == 0 {
            cfg.top_k = 5;
        }
        let full = dataset::prune(&g, &spec, &cfg.clone().with_mode(Mode::Full)).unwrap();
        let fast = dataset::prune(&g, &spec, &cfg.clone().with_mode(Mode::Fast)).unwrap();
        let fast_map: BTreeMap<(usize, usize), u64> =
            fast.pairs.iter().map(|p| ((p.u, p.v), p.raw.to_bits())).collect();
        if fast_map == restricted(&g, &full.pairs) {
            exact += 1;
        } else if notes.len() < 3 {
            notes.push(format!("graph {k} ({measure}, n={n}) differs"));
        }
    }

    // Training drop on the end-to-end setup, averaged over seeds; both
    // models are scored against the full dataset's pairs and targets.
    let mut drops = Vec::new();
    let mut own_drops = Vec::new();
    for seed in 0..5u64 {
        let g = sanity_tree(303 + seed);
        let spec = SimilaritySpec::new(Measure::Shp, &g, None).unwrap();
        let cfg = DatasetConfig::new(Measure::Shp);
        let full = dataset::build_full(&g, &spec, &cfg).unwrap();
        let fast = dataset::build_fast(&g, &spec, &cfg).unwrap();
        let tc = sanity_config(seed);
        let rho_full = model_spearman(&trainer::train(&full.pairs, &g, &tc, None).unwrap().embeddings, &full.pairs);
        let fast_model = trainer::train(&fast.pairs, &g, &tc, None).unwrap().embeddings;
        drops.push(rho_full - model_spearman(&fast_model, &full.pairs));
        own_drops.push(rho_full - model_spearman(&fast_model, &fast.pairs));
    }
    let mean_drop = drops.iter().sum::<f64>() / drops.len() as f64;
    let own_drop = own_drops.iter().sum::<f64>() / own_drops.len() as f64;
    let (in_time, timing) = within(start.elapsed(), 120);
    let drops_text: Vec<String> = drops.iter().map(|d| format!("{d:.3}")).collect();
    Outcome::new(
        exact == 50 && mean_drop <= 0.07 && in_time,
        format!(
            "{exact}/50 graphs exact; mean Spearman drop {mean_drop:.4} (<= 0.07) over seeds [{}] \
             on the full pairs; {own_drop:.4} when the fast model is scored on its own pairs (informational), {timing}{}",
            drops_text.join(", "),
            if notes.is_empty() {
                String::new()
            } else {
                format!("; {}", notes.join("; "))
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Spearman correctness

fn spearman_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    let mut invariance_broken = 0;
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(3..=60);
        let tied = rng.random_bool(0.5);
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if tied {
                f64::from(rng.random_range(-5i32..=5))
            } else {
                rng.random_range(-10.0..10.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
        if constant(&x) || constant(&y) {
            continue;
        }
        checked += 1;
        let got = spearman(&x, &y).unwrap();
        worst = worst.max((got - brute_spearman(&x, &y)).abs());

        // Strictly monotone maps that are exact on these inputs.
        let scaled: Vec<f64> = x.iter().map(|a| a * 4.0).collect();
        let shifted: Vec<f64> = y.iter().map(|a| if tied { a.powi(3) + 7.0 * a } else { -(-a) * 0.5 }).collect();
        let exp: Vec<f64> = x.iter().map(|a| if tied { a.exp() } else { *a }).collect();
        for (a, b) in [(&scaled, &y), (&x, &shifted), (&exp, &shifted)] {
            if spearman(a, b).unwrap() != got {
                invariance_broken += 1;
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && invariance_broken == 0,
        format!("max deviation {worst:.1e} (<= 1e-12) on 1000 vectors; {invariance_broken} invariance failures"),
    )
}

// ---------------------------------------------------------------------------
// 6. WSD logic

struct Table(HashMap<(String, String), f64>);

impl Table {
    fn new(entries: &[(&str, &str, f64)]) -> Self {
        let mut m = HashMap::new();
        for &(a, b, w) in entries {
            m.insert((a.to_owned(), b.to_owned()), w);
            m.insert((b.to_owned(), a.to_owned()), w);
        }
        Table(m)
    }
}

impl PairScorer for Table {
    fn name(&self) -> String {
        "table".into()
    }

    fn score(&self, u: &str, v: &str) -> Result<Option<f64>> {
        Ok(self.0.get(&(u.to_owned(), v.to_owned())).copied())
    }
}

fn sentence(cols: &[&[&str]]) -> SentenceInstance {
    SentenceInstance {
        id: "fixture".into(),
        tokens: cols
            .iter()
            .enumerate()
            .map(|(i, c)| WsdToken {
                index: i,
                lemma: format!("w{i}"),
                candidates: c.iter().map(|s| (*s).to_owned()).collect(),
                gold: None,
            })
            .collect(),
    }
}

fn wsd_fixtures() -> Outcome {
    let cfg = WsdConfig::default();
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_owned());
        }
    };

    // Hand sums: bank.1 = 0.96 + 0.97 = 1.93; bank.2 = 0.99; river.1 = 0.96
    // + 0.99 = 1.95; money.1 = 0.97; money.2 = 0 (0.90 is below threshold).
    let inst = sentence(&[&["bank.1", "bank.2"], &["river.1"], &["money.1", "money.2"]]);
    let table = Table::new(&[
        ("bank.1", "river.1", 0.96),
        ("bank.1", "money.1", 0.97),
        ("bank.2", "river.1", 0.99),
        ("bank.2", "money.2", 0.90),
        ("river.1", "money.2", 0.95),
    ]);
    let g = build_sentence_graph(&inst, &cfg, &table).unwrap();
    let c = g.centrality();
    check("bank.1 degree", (c[0][0] - 1.93).abs() < 1e-12);
    check("bank.2 degree", (c[0][1] - 0.99).abs() < 1e-12);
    check("river.1 degree", (c[1][0] - 1.95).abs() < 1e-12);
    check("money.1 degree", (c[2][0] - 0.97).abs() < 1e-12);
    check("threshold excludes 0.90 and 0.95", c[2][1] == 0.0 && g.edges.len() == 3);
    let chosen = select_senses(&g, &inst);
    check(
        "argmax",
        chosen == [Some("bank.1".into()), Some("river.1".into()), Some("money.1".into())],
    );

    // Lowering the threshold admits 0.95 and flips nothing for bank.
    let low = build_sentence_graph(&inst, &WsdConfig { threshold: 0.94 }, &table).unwrap();
    check("lower threshold adds one edge", low.edges.len() == 4);

    // No edges at all: every token takes its first candidate.
    let lonely = sentence(&[&["x.2", "x.1"], &["y.3", "y.1", "y.2"]]);
    let g = build_sentence_graph(&lonely, &cfg, &Table::new(&[])).unwrap();
    check(
        "first-synset fallback",
        select_senses(&g, &lonely) == [Some("x.2".into()), Some("y.3".into())],
    );

    // Exact tie between two non-zero degrees goes to the earlier candidate.
    let tie = sentence(&[&["a.1", "a.2"], &["b.1"]]);
    let g = build_sentence_graph(&tie, &cfg, &Table::new(&[("a.1", "b.1", 0.97), ("a.2", "b.1", 0.97)])).unwrap();
    check("tie to first", select_senses(&g, &tie)[0].as_deref() == Some("a.1"));
    let swapped = sentence(&[&["a.2", "a.1"], &["b.1"]]);
    let g = build_sentence_graph(&swapped, &cfg, &Table::new(&[("a.1", "b.1", 0.97), ("a.2", "b.1", 0.97)])).unwrap();
    check("tie follows order", select_senses(&g, &swapped)[0].as_deref() == Some("a.2"));

    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            "hand-summed degrees, threshold exclusion and first-candidate ties reproduced".to_owned()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

// ---------------------------------------------------------------------------
// 7. Efficiency

fn efficiency() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let g = synth::wordnet_like(82_115, &mut rng);
    let spec = SimilaritySpec::new(Measure::Lch, &g, None).unwrap();
    let m = EmbeddingMatrix::random(g.ids().to_vec(), 300, 7).unwrap();
    let mut nodes: Vec<usize> = (0..g.len()).collect();
    nodes.shuffle(&mut rng);
    let queries: Vec<String> = nodes[..20].iter().map(|&i| g.id(i).to_owned()).collect();
    let out = run_benchmark(&g, &spec, &m, &queries, 5).unwrap();

    // Elementwise agreement with per-pair calls: every target for the dense
    // scan, a sample of targets for the graph measure.
    let mut worst_dot = 0.0f64;
    let mut worst_graph = 0.0f64;
    for &q in &nodes[..3] {
        let all = one_vs_all_dot(&m, q);
        for (t, &s) in all.iter().enumerate() {
            worst_dot = worst_dot.max(f64::from((s - m.score_rows(q, t, ScoreMode::Dot)).abs()));
        }
        let all = one_vs_all_graph(&g, &spec, q).unwrap();
        for &t in &nodes[3..303] {
            let pair = spec.similarity(&g, q, t).unwrap().unwrap_or(0.0);
            worst_graph = worst_graph.max((all[t] - pair).abs());
        }
    }

    // Informational: per-pair LCH (one traversal per target), extrapolated.
    let q = nodes[0];
    let sample = &nodes[1..201];
    let t = Instant::now();
    for &v in sample {
        std::hint::black_box(spec.similarity(&g, q, v).unwrap());
    }
    let per_pair_query = t.elapsed().as_secs_f64() / sample.len() as f64 * g.len() as f64;

    let speedup = out.dot.speedup;
    let (in_time, timing) = within(start.elapsed(), 300);
    Outcome::new(
        speedup >= 100.0 && worst_dot <= 1e-6 && worst_graph <= 1e-6 && in_time,
        format!(
            "dot {} vs graph:lch {} per query => speedup {speedup:.2}x (>= 100x); \
             elementwise max error dot {worst_dot:.1e}, graph {worst_graph:.1e}; \
             per-pair lch ~{:.1}s per query ({:.0}x slower than dot, informational); {timing}",
            taxembed::bench::format_secs(out.dot.median_secs),
            taxembed::bench::format_secs(out.graph.median_secs),
            per_pair_query,
            per_pair_query / out.dot.median_secs,
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Determinism

fn cli(dir: &Path, args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_taxembed"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn write_instances(g: &TaxonomyGraph, path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut text = String::new();
    for s in 0..20 {
        if s > 0 {
            text.push('\n');
        }
        for t in 0..rng.random_range(2..6) {
            let k = rng.random_range(1..4);
            let cands: Vec<&str> = (0..k).map(|_| g.id(rng.random_range(0..g.len()))).collect();
            let gold = cands[rng.random_range(0..k)];
            text.push_str(&format!("s{s}\t{t}\tlemma{t}\t{}\t{gold}\n", cands.join(",")));
        }
    }
    std::fs::write(path, text).unwrap();
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: [(&str, &[&str]); 3] = [
        (
            "pairs.tsv",
            &["similarities", "--graph", "g.tsv", "--measure", "shp", "--mode", "fast", "--seed", "5", "-o", "pairs.tsv"],
        ),
        (
            "model.vec",
            &["train", "--graph", "g.tsv", "--pairs", "pairs.tsv", "--dim", "16", "--epochs", "3", "--seed", "5", "-o", "model.vec"],
        ),
        (
            "pred.tsv",
            &["wsd", "--instances", "inst.tsv", "--model", "model.vec", "--threshold", "0.3", "-o", "pred.tsv"],
        ),
    ];
    let run = || -> std::result::Result<Vec<String>, String> {
        cli(d, &["generate", "--kind", "dag", "--nodes", "120", "--seed", "8", "-o", "g.tsv"])?;
        let g = TaxonomyGraph::load_edge_list(d.join("g.tsv")).map_err(|e| e.to_string())?;
        write_instances(&g, &d.join("inst.tsv"));
        let mut identical = Vec::new();
        for (out, args) in steps {
            cli(d, args)?;
            let first = std::fs::read(d.join(out)).map_err(|e| e.to_string())?;
            let manifest = format!("{out}.manifest");
            let kept = d.join(format!("{out}.first.manifest"));
            std::fs::copy(d.join(&manifest), &kept).map_err(|e| e.to_string())?;
            cli(d, &["replay", kept.to_str().unwrap()])?;
            let second = std::fs::read(d.join(out)).map_err(|e| e.to_string())?;
            if first == second {
                identical.push(out.to_owned());
            }
        }
        Ok(identical)
    };
    match run() {
        Ok(identical) => Outcome::new(
            identical.len() == steps.len(),
            format!(
                "byte-identical after manifest replay: {}/{} ({})",
                identical.len(),
                steps.len(),
                identical.join(", ")
            ),
        ),
        Err(e) => Outcome::new(false, format!("command failed: {e}")),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("metric oracle equivalence", metric_oracles),
        ("gradient check", gradient_check),
        ("end-to-end sanity", end_to_end),
        ("fast vs full dataset", fast_vs_full),
        ("spearman correctness", spearman_correctness),
        ("wsd logic", wsd_fixtures),
        ("efficiency", efficiency),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {label} ({name}): {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
