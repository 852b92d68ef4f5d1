//! Graph-centrality word sense disambiguation.
//!
//! Every candidate sense of every token becomes a vertex; senses of
//! different tokens are linked when their similarity exceeds a threshold,
//! weighted by that similarity. Each token then takes the candidate with the
//! largest weighted degree, falling back to its first candidate on ties.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::DatasetHeader;
use crate::error::{Error, Result};
use crate::eval::PairScorer;

#[derive(Debug, Clone, PartialEq)]
pub struct WsdToken {
    pub index: usize,
    pub lemma: String,
    /// Sense order is significant: the first entry wins ties.
    pub candidates: Vec<String>,
    pub gold: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceInstance {
    pub id: String,
    pub tokens: Vec<WsdToken>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsdConfig {
    pub threshold: f64,
}

impl Default for WsdConfig {
    fn default() -> Self {
        Self { threshold: 0.95 }
    }
}

/// `(token position, candidate position)` within a sentence.
pub type SenseRef = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct SenseEdge {
    pub a: SenseRef,
    pub b: SenseRef,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceGraph {
    /// Candidate senses per token position.
    pub columns: Vec<Vec<String>>,
    pub edges: Vec<SenseEdge>,
    /// Pairs the scorer failed on.
    pub skipped: usize,
}

impl SentenceGraph {
    /// Weighted degree of every sense, indexed like `columns`.
    pub fn centrality(&self) -> Vec<Vec<f64>> {
        let mut c: Vec<Vec<f64>> = self.columns.iter().map(|col| vec![0.0; col.len()]).collect();
        for e in &self.edges {
            c[e.a.0][e.a.1] += e.weight;
            c[e.b.0][e.b.1] += e.weight;
        }
        c
    }
}

pub fn build_sentence_graph(inst: &SentenceInstance, cfg: &WsdConfig, scorer: &dyn PairScorer) -> Result<SentenceGraph> {
    if inst.tokens.iter().all(|t| t.candidates.is_empty()) {
        return Err(Error::Validation(format!("sentence `{}` has no candidate senses", inst.id)));
    }
    let columns: Vec<Vec<String>> = inst.tokens.iter().map(|t| t.candidates.clone()).collect();
    let mut edges = Vec::new();
    let mut skipped = 0;
    for ta in 0..columns.len() {
        for tb in ta + 1..columns.len() {
            for (ca, sa) in columns[ta].iter().enumerate() {
                for (cb, sb) in columns[tb].iter().enumerate() {
                    match scorer.score(sa, sb) {
                        Ok(Some(w)) if w > cfg.threshold => edges.push(SenseEdge {
                            a: (ta, ca),
                            b: (tb, cb),
                            weight: w,
                        }),
                        Ok(_) => {}
                        Err(e) => {
                            log::debug!("sentence {}: skipping ({sa}, {sb}): {e}", inst.id);
                            skipped += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(SentenceGraph { columns, edges, skipped })
}

/// Highest-centrality candidate per token; `None` for tokens without
/// candidates.
pub fn select_senses(graph: &SentenceGraph, inst: &SentenceInstance) -> Vec<Option<String>> {
    let centrality = graph.centrality();
    inst.tokens
        .iter()
        .enumerate()
        .map(|(t, tok)| {
            let scores = &centrality[t];
            let mut best = 0;
            for c in 1..scores.len() {
                if scores[c] > scores[best] {
                    best = c;
                }
            }
            tok.candidates.get(best).cloned()
        })
        .collect()
}

pub type Predictions = Vec<Vec<Option<String>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct WsdRun {
    pub predictions: Predictions,
    pub skipped_pairs: usize,
}

/// Disambiguates sentences independently; output order follows input.
pub fn disambiguate(instances: &[SentenceInstance], cfg: &WsdConfig, scorer: &dyn PairScorer) -> Result<WsdRun> {
    let per_sentence: Vec<(Vec<Option<String>>, usize)> = instances
        .par_iter()
        .map(|inst| {
            if inst.tokens.iter().all(|t| t.candidates.is_empty()) {
                return Ok((vec![None; inst.tokens.len()], 0));
            }
            let g = build_sentence_graph(inst, cfg, scorer)?;
            Ok((select_senses(&g, inst), g.skipped))
        })
        .collect::<Result<_>>()?;
    let skipped_pairs = per_sentence.iter().map(|(_, s)| s).sum();
    Ok(WsdRun {
        predictions: per_sentence.into_iter().map(|(p, _)| p).collect(),
        skipped_pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub attempted: usize,
    pub gold_total: usize,
}

/// Micro-averaged scores over gold-tagged tokens.
pub fn micro_f1(predictions: &Predictions, instances: &[SentenceInstance]) -> F1Score {
    let (mut correct, mut attempted, mut gold_total) = (0, 0, 0);
    for (inst, preds) in instances.iter().zip(predictions) {
        for (tok, pred) in inst.tokens.iter().zip(preds) {
            let Some(gold) = &tok.gold else { continue };
            gold_total += 1;
            if let Some(p) = pred {
                attempted += 1;
                if p == gold {
                    correct += 1;
                }
            }
        }
    }
    if attempted == 0 {
        log::warn!("no gold-tagged token was attempted; precision defined as 0");
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(correct, attempted);
    let recall = ratio(correct, gold_total);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    F1Score {
        precision,
        recall,
        f1,
        correct,
        attempted,
        gold_total,
    }
}

/// Uniformly random candidate per token.
pub fn random_sense_baseline(instances: &[SentenceInstance], seed: u64) -> Predictions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instances
        .iter()
        .map(|inst| {
            inst.tokens
                .iter()
                .map(|t| t.candidates.choose(&mut rng).cloned())
                .collect()
        })
        .collect()
}

/// First listed candidate per token.
pub fn first_sense_baseline(instances: &[SentenceInstance]) -> Predictions {
    instances
        .iter()
        .map(|inst| inst.tokens.iter().map(|t| t.candidates.first().cloned()).collect())
        .collect()
}

/// F1 for each threshold in turn.
pub fn threshold_sweep(
    instances: &[SentenceInstance],
    thresholds: &[f64],
    scorer: &dyn PairScorer,
) -> Result<Vec<(f64, F1Score)>> {
    thresholds
        .iter()
        .map(|&threshold| {
            let run = disambiguate(instances, &WsdConfig { threshold }, scorer)?;
            Ok((threshold, micro_f1(&run.predictions, instances)))
        })
        .collect()
}

/// Raw graph similarities mapped onto a dataset's normalized scale, so one
/// threshold applies to graph measures and embeddings alike.
pub struct NormalizedScorer<'a> {
    pub inner: &'a dyn PairScorer,
    pub header: DatasetHeader,
}

impl PairScorer for NormalizedScorer<'_> {
    fn name(&self) -> String {
        format!("{}:normalized", self.inner.name())
    }

    fn score(&self, u: &str, v: &str) -> Result<Option<f64>> {
        Ok(self.inner.score(u, v)?.map(|raw| self.header.normalize(raw)))
    }
}

/// Reads `sentence<TAB>index<TAB>lemma<TAB>c1,c2,...<TAB>gold` lines. A
/// blank line or a new sentence id starts a new sentence; `-` marks an empty
/// candidate list or a missing gold sense.
pub fn read_instances(path: impl AsRef<Path>) -> Result<Vec<SentenceInstance>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<SentenceInstance> = Vec::new();
    let mut open = false;
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            open = false;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [sid, index, lemma, cands, gold] = cols.as_slice() else {
            return Err(Error::parse(
                path,
                no + 1,
                "expected `sentence<TAB>index<TAB>lemma<TAB>candidates<TAB>gold`",
            ));
        };
        let index: usize = index
            .parse()
            .map_err(|e| Error::parse(path, no + 1, format!("bad token index: {e}")))?;
        let candidates = if *cands == "-" {
            Vec::new()
        } else {
            cands
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect()
        };
        let gold = (*gold != "-" && !gold.is_empty()).then(|| (*gold).to_owned());
        let token = WsdToken {
            index,
            lemma: (*lemma).to_owned(),
            candidates,
            gold,
        };
        match out.last_mut() {
            Some(s) if open && s.id == *sid => s.tokens.push(token),
            _ => out.push(SentenceInstance {
                id: (*sid).to_owned(),
                tokens: vec![token],
            }),
        }
        open = true;
    }
    Ok(out)
}

/// Input columns plus the predicted sense (or `-`).
pub fn write_predictions(path: impl AsRef<Path>, instances: &[SentenceInstance], predictions: &Predictions) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        for (k, (inst, preds)) in instances.iter().zip(predictions).enumerate() {
            if k > 0 {
                writeln!(w)?;
            }
            for (tok, pred) in inst.tokens.iter().zip(preds) {
                let cands = if tok.candidates.is_empty() {
                    "-".to_owned()
                } else {
                    tok.candidates.join(",")
                };
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    inst.id,
                    tok.index,
                    tok.lemma,
                    cands,
                    tok.gold.as_deref().unwrap_or("-"),
                    pred.as_deref().unwrap_or("-")
                )?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}
