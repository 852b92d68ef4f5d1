//! Training pairs `(u, v, s)` built from a gold measure.
//!
//! Pipeline: candidate pairs (all pairs, or each node against its
//! second-order neighborhood) -> raw-threshold filter -> per-node top-k ->
//! unity normalization on the survivors -> infinite values clipped to 1 ->
//! seeded shuffle.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{TaxonomyGraph, UNREACHED};
use crate::metrics::{Measure, SimilaritySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every unordered node pair is a candidate.
    Full,
    /// Only pairs within two undirected hops are candidates.
    Fast,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Fast => "fast",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "fast" => Ok(Mode::Fast),
            other => Err(Error::Config(format!("unknown mode `{other}` (expected full or fast)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub raw_threshold: f64,
    pub top_k: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn new(measure: Measure) -> Self {
        Self {
            raw_threshold: measure.default_threshold(),
            top_k: 50,
            mode: Mode::Full,
            seed: 0,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Pruned pair on the raw similarity scale, `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub u: usize,
    pub v: usize,
    pub raw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPair {
    pub u: usize,
    pub v: usize,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub measure: Measure,
    pub threshold: f64,
    pub top_k: usize,
    pub mode: Mode,
    pub seed: u64,
    pub norm_min: f64,
    pub norm_max: f64,
    pub similarity_evaluations: u64,
}

impl DatasetHeader {
    /// Maps a raw similarity onto the normalized scale of this dataset,
    /// clamped to `[0, 1]`; infinite values map to 1.
    pub fn normalize(&self, raw: f64) -> f64 {
        if raw.is_infinite() && raw > 0.0 {
            return 1.0;
        }
        ((raw - self.norm_min) / (self.norm_max - self.norm_min)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub pairs: Vec<TrainingPair>,
}

/// Result of the candidate + threshold + top-k stages.
#[derive(Debug, Clone)]
pub struct Pruned {
    /// Sorted by `(u, v)`.
    pub pairs: Vec<ScoredPair>,
    pub similarity_evaluations: u64,
}

fn rank_desc(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Threshold and top-k selection over one node's candidate partners.
fn keep_top(mut cands: Vec<(usize, f64)>, cfg: &DatasetConfig) -> Vec<(usize, f64)> {
    cands.retain(|&(_, s)| s >= cfg.raw_threshold);
    cands.sort_by(rank_desc);
    cands.truncate(cfg.top_k);
    cands
}

fn candidates_full(g: &TaxonomyGraph, spec: &SimilaritySpec, u: usize) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    if spec.measure().is_path_based() {
        for (v, d) in g.bfs_distances(u).into_iter().enumerate() {
            if v != u && d != UNREACHED {
                out.push((v, spec.from_path_length(d)));
            }
        }
    } else {
        let src = spec.source(g, u);
        for v in (0..g.len()).filter(|&v| v != u) {
            if let Some(s) = src.score(v, None)? {
                out.push((v, s));
            }
        }
    }
    Ok(out)
}

fn candidates_fast(g: &TaxonomyGraph, spec: &SimilaritySpec, u: usize) -> Result<Vec<(usize, f64)>> {
    let src = spec.source(g, u);
    let mut out = Vec::new();
    for (v, d) in g.bounded_bfs(u, 2) {
        if let Some(s) = src.score(v, Some(d))? {
            out.push((v, s));
        }
    }
    Ok(out)
}

/// Candidate generation, threshold and per-node top-k. A pair survives when
/// it is in the top-k list of either endpoint.
pub fn prune(g: &TaxonomyGraph, spec: &SimilaritySpec, cfg: &DatasetConfig) -> Result<Pruned> {
    if cfg.top_k == 0 {
        return Err(Error::Config("top_k must be positive".into()));
    }
    let per_node: Vec<(u64, Vec<(usize, f64)>)> = (0..g.len())
        .into_par_iter()
        .map(|u| {
            let cands = match cfg.mode {
                Mode::Full => candidates_full(g, spec, u)?,
                Mode::Fast => candidates_fast(g, spec, u)?,
            };
            let evaluated = cands.len() as u64;
            Ok((evaluated, keep_top(cands, cfg)))
        })
        .collect::<Result<_>>()?;

    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut similarity_evaluations = 0;
    for (u, (evaluated, kept)) in per_node.into_iter().enumerate() {
        similarity_evaluations += evaluated;
        for (v, raw) in kept {
            merged.entry((u.min(v), u.max(v))).or_insert(raw);
        }
    }
    Ok(Pruned {
        pairs: merged.into_iter().map(|((u, v), raw)| ScoredPair { u, v, raw }).collect(),
        similarity_evaluations,
    })
}

/// Min and max over the finite values.
pub fn normalization_range(values: &[f64]) -> Result<(f64, f64)> {
    let finite = values.iter().copied().filter(|x| x.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo > hi {
        return Err(Error::Validation("no finite values to normalize".into()));
    }
    if lo == hi {
        return Err(Error::DegenerateRange(lo));
    }
    Ok((lo, hi))
}

/// `(x - min) / (max - min)` over the finite values; `+inf` becomes 1.
pub fn unity_normalize(values: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = normalization_range(values)?;
    Ok(values
        .iter()
        .map(|&x| if x.is_finite() { (x - lo) / (hi - lo) } else { 1.0 })
        .collect())
}

fn finish(pruned: Pruned, spec: &SimilaritySpec, cfg: &DatasetConfig) -> Result<Dataset> {
    if pruned.pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let raw: Vec<f64> = pruned.pairs.iter().map(|p| p.raw).collect();
    let (norm_min, norm_max) = normalization_range(&raw)?;
    let scaled = unity_normalize(&raw)?;
    let mut pairs: Vec<TrainingPair> = pruned
        .pairs
        .iter()
        .zip(scaled)
        .map(|(p, s)| TrainingPair { u: p.u, v: p.v, s })
        .collect();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    Ok(Dataset {
        header: DatasetHeader {
            measure: spec.measure(),
            threshold: cfg.raw_threshold,
            top_k: cfg.top_k,
            mode: cfg.mode,
            seed: cfg.seed,
            norm_min,
            norm_max,
            similarity_evaluations: pruned.similarity_evaluations,
        },
        pairs,
    })
}

/// All-pairs construction; `cfg.mode` is ignored.
pub fn build_full(g: &TaxonomyGraph, spec: &SimilaritySpec, cfg: &DatasetConfig) -> Result<Dataset> {
    let cfg = cfg.clone().with_mode(Mode::Full);
    finish(prune(g, spec, &cfg)?, spec, &cfg)
}

/// Second-order-neighborhood construction; `cfg.mode` is ignored.
pub fn build_fast(g: &TaxonomyGraph, spec: &SimilaritySpec, cfg: &DatasetConfig) -> Result<Dataset> {
    let cfg = cfg.clone().with_mode(Mode::Fast);
    finish(prune(g, spec, &cfg)?, spec, &cfg)
}

pub fn build(g: &TaxonomyGraph, spec: &SimilaritySpec, cfg: &DatasetConfig) -> Result<Dataset> {
    match cfg.mode {
        Mode::Full => build_full(g, spec, cfg),
        Mode::Fast => build_fast(g, spec, cfg),
    }
}

impl Dataset {
    pub fn write_to<W: Write>(&self, g: &TaxonomyGraph, mut w: W) -> std::io::Result<()> {
        let h = &self.header;
        writeln!(w, "# measure={}", h.measure)?;
        writeln!(w, "# threshold={}", h.threshold)?;
        writeln!(w, "# top_k={}", h.top_k)?;
        writeln!(w, "# mode={}", h.mode)?;
        writeln!(w, "# seed={}", h.seed)?;
        writeln!(w, "# norm_min={}", h.norm_min)?;
        writeln!(w, "# norm_max={}", h.norm_max)?;
        writeln!(w, "# similarity_evaluations={}", h.similarity_evaluations)?;
        writeln!(w, "# pairs={}", self.pairs.len())?;
        for p in &self.pairs {
            writeln!(w, "{}\t{}\t{}", g.id(p.u), g.id(p.v), p.s)?;
        }
        w.flush()
    }

    pub fn write(&self, g: &TaxonomyGraph, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(g, BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    /// Reads a pairs file, resolving node ids against `g`.
    pub fn read(path: impl AsRef<Path>, g: &TaxonomyGraph) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        let mut pairs = Vec::new();
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line_no = no + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    fields.insert(k.trim().to_owned(), v.trim().to_owned());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [u, v, s] = cols.as_slice() else {
                return Err(Error::parse(path, line_no, "expected `u<TAB>v<TAB>s`"));
            };
            let s: f64 = s
                .parse()
                .map_err(|e| Error::parse(path, line_no, format!("bad similarity: {e}")))?;
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::parse(path, line_no, format!("similarity {s} outside [0, 1]")));
            }
            pairs.push(TrainingPair {
                u: g.index_of(u)?,
                v: g.index_of(v)?,
                s,
            });
        }
        let header = parse_header(&fields).map_err(|msg| Error::parse(path, 0, msg))?;
        Ok(Dataset { header, pairs })
    }
}

fn parse_header(f: &BTreeMap<String, String>) -> std::result::Result<DatasetHeader, String> {
    fn get<T: FromStr>(f: &BTreeMap<String, String>, key: &str) -> std::result::Result<T, String> {
        f.get(key)
            .ok_or_else(|| format!("missing header field `{key}`"))?
            .parse()
            .map_err(|_| format!("bad header field `{key}`"))
    }
    Ok(DatasetHeader {
        measure: get(f, "measure")?,
        threshold: get(f, "threshold")?,
        top_k: get(f, "top_k")?,
        mode: get(f, "mode")?,
        seed: get(f, "seed")?,
        norm_min: get(f, "norm_min")?,
        norm_max: get(f, "norm_max")?,
        similarity_evaluations: get(f, "similarity_evaluations")?,
    })
}
