//! Embedding trainer.
//!
//! One matrix holds a row per graph node. For a batch `B` the objective is
//!
//! ```text
//! 1/|B| * sum_B [ (v_i . v_j - s_ij)^2 - alpha * (v_i . v_n + v_j . v_m) ]
//!     + l1 * sum |theta|   (over the rows the batch touches)
//! ```
//!
//! where `v_n`, `v_m` are sampled graph neighbors of `i` and `j`. Each real
//! pair is accompanied by negative pairs with target 0 whose second node is
//! drawn uniformly from all nodes. Parameters are stored as `f32`; loss and
//! gradients are accumulated in `f64`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::TrainingPair;
use crate::error::{Error, Result};
use crate::eval::spearman;
use crate::graph::TaxonomyGraph;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;
const INIT_RANGE: f32 = 0.05;
const BINARY_MAGIC: &[u8; 8] = b"TXEMB01\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    #[default]
    Dot,
    Cosine,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::Dot => "dot",
            ScoreMode::Cosine => "cosine",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ScoreMode::Dot),
            "cosine" | "cos" => Ok(ScoreMode::Cosine),
            other => Err(Error::Config(format!("unknown score mode `{other}`"))),
        }
    }
}

/// How `negatives` is read: per endpoint of the real pair (2n negatives in
/// total), or as the total count split alternately between endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeMode {
    #[default]
    PerSide,
    Total,
}

impl fmt::Display for NegativeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeMode::PerSide => "per-side",
            NegativeMode::Total => "total",
        })
    }
}

/// Unrolled dot product; shared by every scoring path so that per-pair and
/// one-vs-all results agree bit for bit.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn from_rows(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Validation(format!(
                "{} values cannot fill {} rows of dimension {dim}",
                data.len(),
                ids.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("non-finite embedding value {x}")));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate embedding row `{id}`")));
            }
        }
        Ok(Self { dim, data, ids, index })
    }

    /// Rows drawn uniformly from `(-0.05, 0.05)`.
    pub fn random(ids: Vec<String>, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..ids.len() * dim)
            .map(|_| rng.random_range(-INIT_RANGE..INIT_RANGE))
            .collect();
        Self::from_rows(ids, dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.get(id).ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn score_rows(&self, a: usize, b: usize, mode: ScoreMode) -> f32 {
        let (x, y) = (self.row(a), self.row(b));
        match mode {
            ScoreMode::Dot => dot(x, y),
            ScoreMode::Cosine => {
                let norm = dot(x, x).sqrt() * dot(y, y).sqrt();
                if norm > 0.0 {
                    dot(x, y) / norm
                } else {
                    0.0
                }
            }
        }
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(id) = self.ids.iter().find(|id| id.chars().any(char::is_whitespace)) {
            return Err(Error::Validation(format!(
                "node id `{id}` contains whitespace and cannot be written as text"
            )));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res = (|| {
            writeln!(w, "{} {}", self.len(), self.dim)?;
            for (i, id) in self.ids.iter().enumerate() {
                write!(w, "{id}")?;
                for x in self.row(i) {
                    write!(w, " {x}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn read_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty embedding file"))?
            .map_err(|e| Error::io(path, e))?;
        let (n, dim) = header
            .split_once(' ')
            .and_then(|(n, d)| Some((n.trim().parse::<usize>().ok()?, d.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| Error::parse(path, 1, "expected header `N d`"))?;
        let mut ids = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        for (no, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let id = parts.next().unwrap_or_default();
            let before = data.len();
            for x in parts {
                let x: f32 = x
                    .parse()
                    .map_err(|e| Error::parse(path, no + 2, format!("bad value: {e}")))?;
                data.push(x);
            }
            if data.len() - before != dim {
                return Err(Error::parse(path, no + 2, format!("expected {dim} values")));
            }
            ids.push(id.to_owned());
        }
        if ids.len() != n {
            return Err(Error::parse(path, 1, format!("header says {n} rows, found {}", ids.len())));
        }
        Self::from_rows(ids, dim, data)
    }

    /// Reads either format, sniffing the binary magic.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut head = [0u8; 8];
        let n = File::open(path)
            .and_then(|mut f| f.read(&mut head))
            .map_err(|e| Error::io(path, e))?;
        if n == 8 && &head == BINARY_MAGIC {
            Self::read_binary(path)
        } else {
            Self::read_text(path)
        }
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(16 + self.data.len() * 4);
        buf.extend_from_slice(BINARY_MAGIC);
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for (i, id) in self.ids.iter().enumerate() {
            buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
            for x in self.row(i) {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = || Error::parse(path, 0, "truncated or corrupt binary embeddings");
        let mut cur = bytes.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(bad());
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head)
        };
        if take(8)? != BINARY_MAGIC {
            return Err(Error::parse(path, 0, "not a binary embedding file"));
        }
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut ids = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n.saturating_mul(dim));
        for _ in 0..n {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let id = std::str::from_utf8(take(len)?).map_err(|_| bad())?.to_owned();
            ids.push(id);
            for chunk in take(dim * 4)?.chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
        Self::from_rows(ids, dim, data)
    }
}

/// Dot product or cosine between two embedded nodes.
pub fn score(m: &EmbeddingMatrix, u: &str, v: &str, mode: ScoreMode) -> Result<f32> {
    Ok(m.score_rows(m.index_of(u)?, m.index_of(v)?, mode))
}

/// Read access to parameter rows as `f64`, so the same loss code serves
/// the `f32` trainer and `f64` gradient checks.
pub trait Rows {
    fn dim(&self) -> usize;
    fn load_row(&self, i: usize, out: &mut [f64]);
}

impl Rows for EmbeddingMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn load_row(&self, i: usize, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self.row(i)) {
            *o = f64::from(*x);
        }
    }
}

/// Row-major `f64` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRows {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Rows for DenseRows {
    fn dim(&self) -> usize {
        self.dim
    }

    fn load_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.data[i * self.dim..(i + 1) * self.dim]);
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    pub alpha: f64,
    pub negatives: usize,
    pub negative_mode: NegativeMode,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l1: f64,
    pub seed: u64,
    /// Epochs without improvement before stopping; 0 disables early stopping.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            alpha: 0.01,
            negatives: 3,
            negative_mode: NegativeMode::PerSide,
            batch_size: 100,
            epochs: 15,
            learning_rate: 0.001,
            l1: 1e-5,
            seed: 0,
            early_stop_patience: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 {
            return fail("dimension must be at least 1");
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return fail("alpha must be non-negative");
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return fail("learning rate must be positive");
        }
        if self.l1.is_nan() || self.l1 < 0.0 {
            return fail("l1 must be non-negative");
        }
        Ok(())
    }

    fn epoch_seed(&self, epoch: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(epoch as u64 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub s: f64,
    pub neighbor_i: Option<usize>,
    pub neighbor_j: Option<usize>,
    pub negative: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub entries: Vec<Entry>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct rows referenced by the batch, ascending.
    pub fn touched_rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .entries
            .iter()
            .flat_map(|e| [Some(e.i), Some(e.j), e.neighbor_i, e.neighbor_j])
            .flatten()
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

fn sample_neighbor<R: Rng>(g: &TaxonomyGraph, v: usize, rng: &mut R) -> Option<usize> {
    g.neighbors(v).choose(rng).copied()
}

/// One epoch of batches: positives in shuffled order, each followed by its
/// negatives, every entry carrying one freshly sampled neighbor per
/// endpoint. The last batch may be short.
pub fn make_batches(pairs: &[TrainingPair], g: &TaxonomyGraph, cfg: &TrainConfig, epoch_seed: u64) -> Vec<Batch> {
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let n = g.len();
    let mut entries = Vec::with_capacity(pairs.len() * (1 + 2 * cfg.negatives));
    let mut push = |i: usize, j: usize, s: f64, negative: bool, rng: &mut ChaCha8Rng| {
        let neighbor_i = sample_neighbor(g, i, rng);
        let neighbor_j = sample_neighbor(g, j, rng);
        entries.push(Entry { i, j, s, neighbor_i, neighbor_j, negative });
    };
    for &p in &order {
        let TrainingPair { u, v, s } = pairs[p];
        push(u, v, s, false, &mut rng);
        match cfg.negative_mode {
            NegativeMode::PerSide => {
                for _ in 0..cfg.negatives {
                    let k = rng.random_range(0..n);
                    push(u, k, 0.0, true, &mut rng);
                }
                for _ in 0..cfg.negatives {
                    let l = rng.random_range(0..n);
                    push(v, l, 0.0, true, &mut rng);
                }
            }
            NegativeMode::Total => {
                for t in 0..cfg.negatives {
                    let anchor = if t % 2 == 0 { u } else { v };
                    let k = rng.random_range(0..n);
                    push(anchor, k, 0.0, true, &mut rng);
                }
            }
        }
    }
    entries
        .chunks(cfg.batch_size)
        .map(|c| Batch { entries: c.to_vec() })
        .collect()
}

/// Gradient restricted to the rows a batch touches.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub dim: usize,
    /// Ascending row ids.
    pub rows: Vec<usize>,
    /// `rows.len() * dim` values, row-major.
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn row(&self, slot: usize) -> &[f64] {
        &self.values[slot * self.dim..(slot + 1) * self.dim]
    }
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one entry without the L1 part.
fn entry_loss(e: &Entry, local: &[f64], slot: &BTreeMap<usize, usize>, dim: usize, alpha: f64) -> f64 {
    let row = |r: usize| &local[slot[&r] * dim..(slot[&r] + 1) * dim];
    let (vi, vj) = (row(e.i), row(e.j));
    let resid = dot64(vi, vj) - e.s;
    let mut reg = 0.0;
    if let Some(n) = e.neighbor_i {
        reg += dot64(vi, row(n));
    }
    if let Some(m) = e.neighbor_j {
        reg += dot64(vj, row(m));
    }
    resid * resid - alpha * reg
}

/// Batch loss and its analytic gradient.
pub fn loss_and_gradient<R: Rows>(rows: &R, batch: &Batch, alpha: f64, l1: f64) -> (f64, Gradient) {
    let dim = rows.dim();
    let touched = batch.touched_rows();
    let slot: BTreeMap<usize, usize> = touched.iter().enumerate().map(|(s, &r)| (r, s)).collect();
    let mut local = vec![0.0; touched.len() * dim];
    for (s, &r) in touched.iter().enumerate() {
        rows.load_row(r, &mut local[s * dim..(s + 1) * dim]);
    }
    let mut grad = vec![0.0; local.len()];
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut loss = 0.0;
    for e in &batch.entries {
        let (si, sj) = (slot[&e.i], slot[&e.j]);
        let vi = &local[si * dim..(si + 1) * dim];
        let vj = &local[sj * dim..(sj + 1) * dim];
        let resid = dot64(vi, vj) - e.s;
        loss += entry_loss(e, &local, &slot, dim, alpha);
        let c = 2.0 * resid * scale;
        for k in 0..dim {
            grad[si * dim + k] += c * vj[k];
            grad[sj * dim + k] += c * vi[k];
        }
        for (anchor, neighbor) in [(si, e.neighbor_i), (sj, e.neighbor_j)] {
            let Some(n) = neighbor else { continue };
            let sn = slot[&n];
            for k in 0..dim {
                grad[anchor * dim + k] -= alpha * scale * local[sn * dim + k];
                grad[sn * dim + k] -= alpha * scale * local[anchor * dim + k];
            }
        }
    }
    loss *= scale;
    if l1 > 0.0 {
        loss += l1 * local.iter().map(|x| x.abs()).sum::<f64>();
        for (g, x) in grad.iter_mut().zip(&local) {
            if *x != 0.0 {
                *g += l1 * x.signum();
            }
        }
    }
    (loss, Gradient { dim, rows: touched, values: grad })
}

/// Objective value of one batch.
pub fn batch_loss<R: Rows>(rows: &R, batch: &Batch, alpha: f64, l1: f64) -> f64 {
    loss_and_gradient(rows, batch, alpha, l1).0
}

/// Adam moments for every parameter; only touched rows are updated per step.
struct Adam {
    lr: f64,
    step: i32,
    m: Vec<f32>,
    v: Vec<f32>,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn apply(&mut self, params: &mut EmbeddingMatrix, grad: &Gradient) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step);
        let dim = grad.dim;
        for (slot, &r) in grad.rows.iter().enumerate() {
            let g = grad.row(slot);
            let base = r * dim;
            let row = params.row_mut(r);
            for k in 0..dim {
                let m = ADAM_BETA1 * f64::from(self.m[base + k]) + (1.0 - ADAM_BETA1) * g[k];
                let v = ADAM_BETA2 * f64::from(self.v[base + k]) + (1.0 - ADAM_BETA2) * g[k] * g[k];
                self.m[base + k] = m as f32;
                self.v[base + k] = v as f32;
                let update = self.lr * (m / bc1) / ((v / bc2).sqrt() + ADAM_EPSILON);
                row[k] = (f64::from(row[k]) - update) as f32;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub median_batch_loss: f64,
    pub dev_spearman: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub embeddings: EmbeddingMatrix,
    pub history: Vec<EpochReport>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Spearman correlation between model dot products and gold similarities.
pub fn pair_spearman(m: &EmbeddingMatrix, pairs: &[TrainingPair]) -> Result<f64> {
    let pred: Vec<f64> = pairs
        .iter()
        .map(|p| f64::from(m.score_rows(p.u, p.v, ScoreMode::Dot)))
        .collect();
    let gold: Vec<f64> = pairs.iter().map(|p| p.s).collect();
    spearman(&pred, &gold)
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

/// Trains embeddings for every node of `g`.
///
/// After each epoch the model is scored on `dev` (Spearman of dot products
/// against gold) or, without a dev set, by its mean training loss. Training
/// stops once the score has not improved for `early_stop_patience` epochs,
/// and the best epoch's parameters are returned.
pub fn train(
    pairs: &[TrainingPair],
    g: &TaxonomyGraph,
    cfg: &TrainConfig,
    dev: Option<&[TrainingPair]>,
) -> Result<Trained> {
    cfg.validate()?;
    let mut distinct: Vec<usize> = pairs.iter().flat_map(|p| [p.u, p.v]).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Config("training pairs must cover at least two nodes".into()));
    }
    if let Some(p) = pairs.iter().find(|p| p.u >= g.len() || p.v >= g.len()) {
        return Err(Error::Validation(format!("pair ({}, {}) outside the graph", p.u, p.v)));
    }

    let mut model = EmbeddingMatrix::random(g.ids().to_vec(), cfg.dim, cfg.seed)?;
    let mut adam = Adam::new(model.as_slice().len(), cfg.learning_rate);
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, EmbeddingMatrix)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        let batches = make_batches(pairs, g, cfg, cfg.epoch_seed(epoch));
        let mut losses = Vec::with_capacity(batches.len());
        for (b, batch) in batches.iter().enumerate() {
            let (loss, grad) = loss_and_gradient(&model, batch, cfg.alpha, cfg.l1);
            if !loss.is_finite() {
                let e = batch.entries[0];
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b,
                    first: g.id(e.i).to_owned(),
                    second: g.id(e.j).to_owned(),
                    loss,
                });
            }
            adam.apply(&mut model, &grad);
            losses.push(loss);
        }
        let mean_loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        let dev_spearman = dev.map(|d| pair_spearman(&model, d)).transpose()?;
        let report = EpochReport {
            epoch: epoch + 1,
            mean_loss,
            median_batch_loss: median(&mut losses),
            dev_spearman,
        };
        log::info!(
            "epoch {}: mean loss {:.6}, median batch loss {:.6}{}",
            report.epoch,
            report.mean_loss,
            report.median_batch_loss,
            dev_spearman.map(|s| format!(", dev spearman {s:.4}")).unwrap_or_default()
        );
        history.push(report);

        let score = dev_spearman.unwrap_or(-mean_loss);
        match &best {
            Some((best_score, _, _)) if score <= *best_score => stale += 1,
            _ => {
                best = Some((score, epoch + 1, model.clone()));
                stale = 0;
            }
        }
        if cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience {
            log::info!("early stop after epoch {}", epoch + 1);
            break;
        }
    }

    let (best_epoch, embeddings) = match best {
        Some((_, e, m)) => (e, m),
        None => (0, model),
    };
    Ok(Trained {
        embeddings,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> TaxonomyGraph {
        TaxonomyGraph::parse_edge_list("a\tb\nb\tc\n", Path::new("t")).unwrap()
    }

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        EmbeddingMatrix::from_rows(ids, dim, rows.concat()).unwrap()
    }

    #[test]
    fn dot_kernel_matches_naive() {
        let a: Vec<f32> = (0..19).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..19).map(|i| 1.0 - i as f32 * 0.25).collect();
        let naive: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-3);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
    }

    #[test]
    fn score_modes() {
        let m = matrix(&[&[1.0, 2.0], &[3.0, 4.0], &[1.0, 2.0], &[-2.0, 1.0]]);
        assert_eq!(score(&m, "r0", "r1", ScoreMode::Dot).unwrap(), 11.0);
        assert!((score(&m, "r0", "r2", ScoreMode::Cosine).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(score(&m, "r0", "r3", ScoreMode::Dot).unwrap(), 0.0);
        assert!(matches!(score(&m, "r0", "nope", ScoreMode::Dot), Err(Error::UnknownNode(_))));
    }

    fn single(i: usize, j: usize, s: f64) -> Batch {
        Batch {
            entries: vec![Entry { i, j, s, neighbor_i: None, neighbor_j: None, negative: false }],
        }
    }

    #[test]
    fn loss_vanishes_at_target() {
        let m = DenseRows { dim: 2, data: vec![1.0, 0.0, 0.4, 7.0] };
        assert_eq!(batch_loss(&m, &single(0, 1, 0.4), 0.0, 0.0), 0.0);
    }

    #[test]
    fn loss_hand_arithmetic() {
        let m = DenseRows { dim: 1, data: vec![1.0, 0.5] };
        let loss = batch_loss(&m, &single(0, 1, 0.2), 0.0, 0.0);
        assert!((loss - 0.09).abs() < 1e-15);
    }

    #[test]
    fn regularizer_and_l1_terms() {
        let m = DenseRows { dim: 1, data: vec![1.0, 0.5, 2.0] };
        let mut b = single(0, 1, 0.5);
        b.entries[0].neighbor_i = Some(2);
        // (0.5 - 0.5)^2 - 0.1 * (1 * 2) + 0.01 * (1 + 0.5 + 2)
        let loss = batch_loss(&m, &b, 0.1, 0.01);
        assert!((loss - (-0.2 + 0.035)).abs() < 1e-12);
    }

    #[test]
    fn batch_counts() {
        let g = chain();
        let pairs = [TrainingPair { u: 0, v: 2, s: 0.5 }];
        let cfg = TrainConfig { negatives: 3, ..TrainConfig::default() };
        let batches = make_batches(&pairs, &g, &cfg, 1);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 7);
        assert_eq!(batches[0].entries.iter().filter(|e| e.negative).count(), 6);
        assert!(batches[0].entries.iter().filter(|e| e.negative).all(|e| e.s == 0.0));

        let cfg = TrainConfig { negatives: 0, ..cfg };
        let batches = make_batches(&pairs, &g, &cfg, 1);
        assert_eq!(batches[0].len(), 1);

        let cfg = TrainConfig { negatives: 3, negative_mode: NegativeMode::Total, ..cfg };
        assert_eq!(make_batches(&pairs, &g, &cfg, 1)[0].len(), 4);
    }

    #[test]
    fn batches_split_and_neighbors_are_adjacent() {
        let g = chain();
        let pairs: Vec<TrainingPair> = (0..30).map(|k| TrainingPair { u: k % 3, v: (k + 1) % 3, s: 0.5 }).collect();
        let cfg = TrainConfig { batch_size: 100, ..TrainConfig::default() };
        let batches = make_batches(&pairs, &g, &cfg, 5);
        assert_eq!(batches.iter().map(Batch::len).sum::<usize>(), 30 * 7);
        assert!(batches[..batches.len() - 1].iter().all(|b| b.len() == 100));
        for e in batches.iter().flat_map(|b| &b.entries) {
            let n = e.neighbor_i.expect("chain nodes have neighbors");
            assert!(g.neighbors(e.i).contains(&n));
        }
        assert_eq!(batches, make_batches(&pairs, &g, &cfg, 5));
        assert_ne!(batches, make_batches(&pairs, &g, &cfg, 6));
    }

    #[test]
    fn scalar_regression_fixed_point() {
        let g = chain();
        let pairs = vec![TrainingPair { u: 0, v: 2, s: 0.6 }; 50];
        let cfg = TrainConfig {
            dim: 4,
            alpha: 0.0,
            negatives: 0,
            l1: 0.0,
            epochs: 40,
            batch_size: 5,
            learning_rate: 0.01,
            early_stop_patience: 0,
            ..TrainConfig::default()
        };
        let t = train(&pairs, &g, &cfg, None).unwrap();
        let got = score(&t.embeddings, "a", "c", ScoreMode::Dot).unwrap();
        assert!((got - 0.6).abs() < 1e-2, "{got}");
    }

    #[test]
    fn training_is_deterministic() {
        let g = chain();
        let pairs = vec![TrainingPair { u: 0, v: 1, s: 1.0 }, TrainingPair { u: 0, v: 2, s: 0.0 }];
        let cfg = TrainConfig { dim: 8, epochs: 3, ..TrainConfig::default() };
        let a = train(&pairs, &g, &cfg, None).unwrap();
        let b = train(&pairs, &g, &cfg, None).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
    }

    #[test]
    fn invalid_config_rejected() {
        let g = chain();
        let pairs = [TrainingPair { u: 0, v: 1, s: 1.0 }];
        for cfg in [
            TrainConfig { dim: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { alpha: -1.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&pairs, &g, &cfg, None), Err(Error::Config(_))));
        }
        let one = [TrainingPair { u: 0, v: 0, s: 1.0 }];
        assert!(train(&one, &g, &TrainConfig::default(), None).is_err());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let g = chain();
        let pairs = [TrainingPair { u: 0, v: 1, s: 1.0 }];
        let cfg = TrainConfig { learning_rate: 1e300, dim: 2, epochs: 3, ..TrainConfig::default() };
        // A huge step overflows f32 storage to infinity and the next loss is non-finite.
        let err = train(&pairs, &g, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn text_and_binary_round_trip() {
        let m = EmbeddingMatrix::random(vec!["x.n.01".into(), "y.n.02".into()], 5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let txt = dir.path().join("m.txt");
        let bin = dir.path().join("m.bin");
        m.write_text(&txt).unwrap();
        m.write_binary(&bin).unwrap();
        assert_eq!(EmbeddingMatrix::read_text(&txt).unwrap(), m);
        assert_eq!(EmbeddingMatrix::read_binary(&bin).unwrap(), m);
        let head = fs::read_to_string(&txt).unwrap();
        assert!(head.starts_with("2 5\nx.n.01 "));
    }
}
