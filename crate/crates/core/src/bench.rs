//! One-vs-all timing: graph traversal against a dense matrix-vector scan.

use std::fmt::{self, Write as _};
use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::TaxonomyGraph;
use crate::metrics::SimilaritySpec;
use crate::trainer::{dot, EmbeddingMatrix};

pub const MIN_REPEATS: usize = 5;
/// Medians below this are dominated by timer resolution.
pub const TIMER_FLOOR_SECS: f64 = 100e-6;
pub const DEFAULT_TOP_K: usize = 10;

/// Similarity of node `v` to every node; unreachable nodes score 0.
pub fn one_vs_all_graph(g: &TaxonomyGraph, spec: &SimilaritySpec, v: usize) -> Result<Vec<f64>> {
    Ok(spec.one_vs_all(g, v)?.into_iter().map(|s| s.unwrap_or(0.0)).collect())
}

/// Row `v` dotted with every row of `m`.
pub fn one_vs_all_dot(m: &EmbeddingMatrix, v: usize) -> Vec<f32> {
    let q = m.row(v);
    let d = m.dim();
    m.as_slice().chunks_exact(d.max(1)).map(|r| dot(q, r)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub method: String,
    /// Median over repeats of the mean time per one-vs-all query.
    pub median_secs: f64,
    pub n_targets: usize,
    pub repeats: usize,
    /// Baseline median divided by this method's median.
    pub speedup: f64,
}

impl BenchReport {
    pub const TSV_HEADER: &'static str = "method\tmedian_secs\tn_targets\trepeats\tspeedup";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{:.9}\t{}\t{}\t{:.3}",
            self.method, self.median_secs, self.n_targets, self.repeats, self.speedup
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub graph: BenchReport,
    pub dot: BenchReport,
    /// Mean fraction of the graph top-k recovered by the dot top-k.
    pub top_k_overlap: f64,
    pub top_k: usize,
}

impl BenchOutcome {
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", BenchReport::TSV_HEADER).unwrap();
        writeln!(s, "{}", self.graph.tsv_row()).unwrap();
        writeln!(s, "{}", self.dot.tsv_row()).unwrap();
        s
    }
}

impl fmt::Display for BenchOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>14} {:>10} {:>8} {:>10}", "method", "median/query", "targets", "repeats", "speedup")?;
        for r in [&self.graph, &self.dot] {
            writeln!(
                f,
                "{:<12} {:>14} {:>10} {:>8} {:>9.1}x",
                r.method,
                format_secs(r.median_secs),
                r.n_targets,
                r.repeats,
                r.speedup
            )?;
        }
        write!(f, "top-{} overlap: {:.3}", self.top_k, self.top_k_overlap)
    }
}

pub fn format_secs(s: f64) -> String {
    if s >= 1.0 {
        format!("{s:.3} s")
    } else if s >= 1e-3 {
        format!("{:.3} ms", s * 1e3)
    } else {
        format!("{:.3} us", s * 1e6)
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs `pass` once as warm-up, then `repeats` more times; returns the
/// median of the per-query means.
fn time_passes(repeats: usize, queries: usize, mut pass: impl FnMut() -> Result<()>) -> Result<f64> {
    pass()?;
    let mut per_query = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        pass()?;
        per_query.push(t.elapsed().as_secs_f64() / queries as f64);
    }
    Ok(median(&mut per_query))
}

fn top_k_indices<T: Copy + PartialOrd>(scores: &[T], k: usize, skip: usize) -> Vec<usize> {
    let mut ix: Vec<usize> = (0..scores.len()).filter(|&i| i != skip).collect();
    ix.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    ix.truncate(k);
    ix
}

fn check_repeats(repeats: usize) -> Result<()> {
    if repeats < MIN_REPEATS {
        return Err(Error::Config(format!("repeats must be at least {MIN_REPEATS}, got {repeats}")));
    }
    Ok(())
}

/// Median seconds per graph one-vs-all query over `nodes`.
pub fn time_graph(g: &TaxonomyGraph, spec: &SimilaritySpec, nodes: &[usize], repeats: usize) -> Result<f64> {
    check_repeats(repeats)?;
    time_passes(repeats, nodes.len().max(1), || {
        for &v in nodes {
            black_box(one_vs_all_graph(g, spec, black_box(v))?);
        }
        Ok(())
    })
}

/// Median seconds per dense one-vs-all query over matrix `rows`.
pub fn time_dot(m: &EmbeddingMatrix, rows: &[usize], repeats: usize) -> Result<f64> {
    check_repeats(repeats)?;
    time_passes(repeats, rows.len().max(1), || {
        for &r in rows {
            black_box(one_vs_all_dot(m, black_box(r)));
        }
        Ok(())
    })
}

/// Resolves query ids to `(graph index, matrix index)` pairs.
pub fn resolve(g: &TaxonomyGraph, m: &EmbeddingMatrix, queries: &[String]) -> Result<Vec<(usize, usize)>> {
    if queries.is_empty() {
        return Err(Error::Config("at least one query node is required".into()));
    }
    if m.len() != g.len() {
        return Err(Error::Validation(format!(
            "embedding matrix has {} rows but the graph has {} nodes",
            m.len(),
            g.len()
        )));
    }
    queries.iter().map(|q| Ok((g.index_of(q)?, m.index_of(q)?))).collect()
}

/// Single-threaded timing of both methods over the same queries. The graph
/// method is the baseline.
pub fn run_benchmark(
    g: &TaxonomyGraph,
    spec: &SimilaritySpec,
    m: &EmbeddingMatrix,
    queries: &[String],
    repeats: usize,
) -> Result<BenchOutcome> {
    check_repeats(repeats)?;
    let resolved = resolve(g, m, queries)?;
    let (nodes, rows): (Vec<usize>, Vec<usize>) = resolved.iter().copied().unzip();
    let graph_secs = time_graph(g, spec, &nodes, repeats)?;
    let dot_secs = time_dot(m, &rows, repeats)?;
    for (name, t) in [("graph", graph_secs), ("dot", dot_secs)] {
        if t < TIMER_FLOOR_SECS {
            log::warn!(
                "{name} median {} is below timer resolution; use more queries",
                format_secs(t)
            );
        }
    }

    let top_k = DEFAULT_TOP_K.min(g.len().saturating_sub(1));
    let mut overlap = 0.0;
    if top_k > 0 {
        for &(gi, mi) in &resolved {
            let gs = one_vs_all_graph(g, spec, gi)?;
            let ds = one_vs_all_dot(m, mi);
            // Compare by node id, since graph and matrix orders may differ.
            let gtop: std::collections::HashSet<&str> =
                top_k_indices(&gs, top_k, gi).into_iter().map(|i| g.id(i)).collect();
            let hits = top_k_indices(&ds, top_k, mi)
                .into_iter()
                .filter(|&i| gtop.contains(m.ids()[i].as_str()))
                .count();
            overlap += hits as f64 / top_k as f64;
        }
        overlap /= resolved.len() as f64;
    }

    let report = |method: &str, secs: f64| BenchReport {
        method: method.to_owned(),
        median_secs: secs,
        n_targets: g.len(),
        repeats,
        speedup: graph_secs / secs,
    };
    Ok(BenchOutcome {
        graph: report(&format!("graph:{}", spec.measure()), graph_secs),
        dot: report("dot", dot_secs),
        top_k_overlap: overlap,
        top_k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub method: String,
    pub workers: usize,
    pub queries_per_sec: f64,
    pub queries_per_sec_per_worker: f64,
}

/// Multi-worker throughput of both methods, queries spread over a dedicated
/// pool of `workers` threads.
pub fn run_parallel_throughput(
    g: &TaxonomyGraph,
    spec: &SimilaritySpec,
    m: &EmbeddingMatrix,
    queries: &[String],
    workers: usize,
) -> Result<Vec<ThroughputReport>> {
    let resolved = resolve(g, m, queries)?;
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let measure = |run: &(dyn Fn() -> Result<()> + Sync)| -> Result<f64> {
        pool.install(run)?;
        let t = Instant::now();
        pool.install(run)?;
        Ok(resolved.len() as f64 / t.elapsed().as_secs_f64())
    };
    let graph_qps = measure(&|| {
        resolved.par_iter().try_for_each(|&(gi, _)| {
            black_box(one_vs_all_graph(g, spec, gi)?);
            Ok(())
        })
    })?;
    let dot_qps = measure(&|| {
        resolved.par_iter().for_each(|&(_, mi)| {
            black_box(one_vs_all_dot(m, mi));
        });
        Ok(())
    })?;
    Ok(vec![
        ThroughputReport {
            method: format!("graph:{}", spec.measure()),
            workers,
            queries_per_sec: graph_qps,
            queries_per_sec_per_worker: graph_qps / workers as f64,
        },
        ThroughputReport {
            method: "dot".into(),
            workers,
            queries_per_sec: dot_qps,
            queries_per_sec_per_worker: dot_qps / workers as f64,
        },
    ])
}
