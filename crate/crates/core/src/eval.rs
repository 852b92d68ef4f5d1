//! Intrinsic evaluation against lemma-pair similarity judgments.
//!
//! A lemma may map to several nodes, so each lemma pair is first resolved
//! to one node pair. Static selection takes the pair a graph measure rates
//! highest; dynamic selection lets the scored model pick its own best pair.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::dataset::TrainingPair;
use crate::error::{Error, Result};
use crate::graph::TaxonomyGraph;
use crate::metrics::SimilaritySpec;
use crate::trainer::{EmbeddingMatrix, ScoreMode};

/// Fractional ranks starting at 1, tied values sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Validation("cannot rank NaN".into()));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &ix in &order[start..end] {
            ranks[ix] = rank;
        }
        start = end;
    }
    Ok(ranks)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Validation("correlation undefined for constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Validation(format!("need at least 3 observations, got {}", x.len())));
    }
    pearson(&average_ranks(x)?, &average_ranks(y)?)
}

/// Something that can rate a pair of node ids. `Ok(None)` means the pair
/// has no similarity (e.g. disconnected in the graph).
pub trait PairScorer: Sync {
    fn name(&self) -> String;
    fn score(&self, u: &str, v: &str) -> Result<Option<f64>>;
}

/// Raw graph measure.
pub struct GraphScorer<'a> {
    pub graph: &'a TaxonomyGraph,
    pub spec: &'a SimilaritySpec,
}

impl PairScorer for GraphScorer<'_> {
    fn name(&self) -> String {
        format!("graph:{}", self.spec.measure())
    }

    fn score(&self, u: &str, v: &str) -> Result<Option<f64>> {
        self.spec
            .similarity(self.graph, self.graph.index_of(u)?, self.graph.index_of(v)?)
    }
}

pub struct ModelScorer<'a> {
    pub model: &'a EmbeddingMatrix,
    pub mode: ScoreMode,
    pub label: String,
}

impl PairScorer for ModelScorer<'_> {
    fn name(&self) -> String {
        format!("model:{}:{}", self.label, self.mode)
    }

    fn score(&self, u: &str, v: &str) -> Result<Option<f64>> {
        let (a, b) = (self.model.index_of(u)?, self.model.index_of(v)?);
        Ok(Some(f64::from(self.model.score_rows(a, b, self.mode))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaPairRecord {
    pub lemma1: String,
    pub lemma2: String,
    pub gold: f64,
    pub candidates1: Vec<String>,
    pub candidates2: Vec<String>,
}

impl LemmaPairRecord {
    pub fn is_evaluable(&self) -> bool {
        !self.candidates1.is_empty() && !self.candidates2.is_empty()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Parses `lemma<TAB>id,id,...` lines.
pub fn parse_candidates(text: &str, path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let mut out = HashMap::new();
    for (no, line) in data_lines(text) {
        let (lemma, ids) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, no, "expected `lemma<TAB>id,id,...`"))?;
        let ids = ids
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        out.insert(lemma.trim().to_owned(), ids);
    }
    Ok(out)
}

/// Parses `lemma1<TAB>lemma2<TAB>score` lines and attaches candidates.
/// Lemmas without candidates produce records with an empty list.
pub fn parse_lemma_pairs(
    text: &str,
    path: &Path,
    candidates: &HashMap<String, Vec<String>>,
) -> Result<Vec<LemmaPairRecord>> {
    let mut out = Vec::new();
    for (no, line) in data_lines(text) {
        let cols: Vec<&str> = line.split('\t').collect();
        let [l1, l2, gold] = cols.as_slice() else {
            return Err(Error::parse(path, no, "expected `lemma1<TAB>lemma2<TAB>score`"));
        };
        let gold: f64 = gold
            .trim()
            .parse()
            .map_err(|e| Error::parse(path, no, format!("bad score: {e}")))?;
        let lookup = |l: &str| candidates.get(l.trim()).cloned().unwrap_or_default();
        out.push(LemmaPairRecord {
            lemma1: l1.trim().to_owned(),
            lemma2: l2.trim().to_owned(),
            gold,
            candidates1: lookup(l1),
            candidates2: lookup(l2),
        });
    }
    Ok(out)
}

pub fn load_records(pairs_path: impl AsRef<Path>, candidates_path: impl AsRef<Path>) -> Result<Vec<LemmaPairRecord>> {
    let (pp, cp) = (pairs_path.as_ref(), candidates_path.as_ref());
    let ctext = fs::read_to_string(cp).map_err(|e| Error::io(cp, e))?;
    let ptext = fs::read_to_string(pp).map_err(|e| Error::io(pp, e))?;
    parse_lemma_pairs(&ptext, pp, &parse_candidates(&ctext, cp)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    /// Position of the record in the input.
    pub record: usize,
    pub first: String,
    pub second: String,
    /// Score of the chosen pair under the selecting scorer.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub selected: Vec<Selected>,
    /// Records without candidates, or whose candidate pairs all lack a score.
    pub excluded: usize,
}

/// Per record, the candidate pair `scorer` rates highest. Ties keep the
/// earliest pair in candidate order (first lemma's candidates outermost).
pub fn select_best(records: &[LemmaPairRecord], scorer: &dyn PairScorer) -> Result<SelectionResult> {
    let mut selected = Vec::new();
    let mut excluded = 0;
    for (r, rec) in records.iter().enumerate() {
        let mut best: Option<(f64, &str, &str)> = None;
        for a in &rec.candidates1 {
            for b in &rec.candidates2 {
                let Some(s) = scorer.score(a, b)? else { continue };
                if best.is_none_or(|(bs, _, _)| s > bs) {
                    best = Some((s, a, b));
                }
            }
        }
        match best {
            Some((score, a, b)) => selected.push(Selected {
                record: r,
                first: a.to_owned(),
                second: b.to_owned(),
                score,
            }),
            None => excluded += 1,
        }
    }
    Ok(SelectionResult { selected, excluded })
}

/// Pairs maximizing the raw graph measure.
pub fn static_selection(records: &[LemmaPairRecord], spec: &SimilaritySpec, g: &TaxonomyGraph) -> Result<SelectionResult> {
    select_best(records, &GraphScorer { graph: g, spec })
}

/// Pairs maximizing the model's own score.
pub fn dynamic_selection(records: &[LemmaPairRecord], m: &EmbeddingMatrix, mode: ScoreMode) -> Result<SelectionResult> {
    let scorer = ModelScorer {
        model: m,
        mode,
        label: String::new(),
    };
    select_best(records, &scorer)
}

#[derive(Clone, Copy)]
pub enum SelectionMode<'a> {
    /// Node pairs chosen by this graph measure.
    Static(&'a GraphScorer<'a>),
    /// Node pairs chosen by the evaluated scorer.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoldSource {
    /// The human judgment stored with each record.
    Human,
    /// The static selection's graph similarity.
    Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub scorer: String,
    pub selection: String,
    pub gold: GoldSource,
    pub spearman: f64,
    pub evaluated: usize,
    pub excluded: usize,
    /// Share of evaluated node pairs present in a training set, when known.
    pub coverage: Option<f64>,
}

impl CorrelationReport {
    pub const TSV_HEADER: &'static str = "scorer\tselection\tgold\tspearman\tevaluated\texcluded\tcoverage";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.scorer,
            self.selection,
            self.gold,
            self.spearman,
            self.evaluated,
            self.excluded,
            self.coverage.map(|c| c.to_string()).unwrap_or_else(|| "-".into())
        )
    }
}

impl fmt::Display for GoldSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GoldSource::Human => "human",
            GoldSource::Graph => "graph",
        })
    }
}

impl fmt::Display for CorrelationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scorer:    {}", self.scorer)?;
        writeln!(f, "selection: {}", self.selection)?;
        writeln!(f, "gold:      {}", self.gold)?;
        writeln!(f, "spearman:  {:.4}", self.spearman)?;
        write!(f, "records:   {} evaluated, {} excluded", self.evaluated, self.excluded)?;
        if let Some(c) = self.coverage {
            write!(f, "\ncoverage:  {:.1}% of pairs seen in training", 100.0 * c)?;
        }
        Ok(())
    }
}

/// Selected node pairs and the values compared by [`evaluate`].
#[derive(Debug, Clone)]
pub struct Scored {
    pub selected: Vec<Selected>,
    pub predicted: Vec<f64>,
    pub gold: Vec<f64>,
    pub excluded: usize,
}

/// Resolves records to node pairs and scores them, without correlating.
pub fn score_records(
    records: &[LemmaPairRecord],
    scorer: &dyn PairScorer,
    selection: SelectionMode<'_>,
    gold: GoldSource,
) -> Result<Scored> {
    let mut out = Scored {
        selected: Vec::new(),
        predicted: Vec::new(),
        gold: Vec::new(),
        excluded: 0,
    };
    match selection {
        SelectionMode::Static(graph) => {
            let sel = select_best(records, graph)?;
            out.excluded = sel.excluded;
            for s in sel.selected {
                let Some(pred) = scorer.score(&s.first, &s.second)? else {
                    out.excluded += 1;
                    continue;
                };
                out.predicted.push(pred);
                out.gold.push(match gold {
                    GoldSource::Human => records[s.record].gold,
                    GoldSource::Graph => s.score,
                });
                out.selected.push(s);
            }
        }
        SelectionMode::Dynamic => {
            if gold == GoldSource::Graph {
                return Err(Error::Config("graph gold scores need static selection".into()));
            }
            let sel = select_best(records, scorer)?;
            out.excluded = sel.excluded;
            for s in sel.selected {
                out.predicted.push(s.score);
                out.gold.push(records[s.record].gold);
                out.selected.push(s);
            }
        }
    }
    Ok(out)
}

/// Spearman correlation of `scorer` against the chosen gold scores.
pub fn evaluate(
    records: &[LemmaPairRecord],
    scorer: &dyn PairScorer,
    selection: SelectionMode<'_>,
    gold: GoldSource,
) -> Result<CorrelationReport> {
    let scored = score_records(records, scorer, selection, gold)?;
    let selection_name = match selection {
        SelectionMode::Static(g) => format!("static:{}", g.spec.measure()),
        SelectionMode::Dynamic => "dynamic".to_owned(),
    };
    Ok(CorrelationReport {
        scorer: scorer.name(),
        selection: selection_name,
        gold,
        spearman: spearman(&scored.predicted, &scored.gold)?,
        evaluated: scored.predicted.len(),
        excluded: scored.excluded,
        coverage: None,
    })
}

/// Like [`evaluate`], also reporting how many evaluated node pairs occur in
/// `training` (in either orientation).
pub fn evaluate_with_coverage(
    records: &[LemmaPairRecord],
    scorer: &dyn PairScorer,
    selection: SelectionMode<'_>,
    gold: GoldSource,
    graph: &TaxonomyGraph,
    training: &[TrainingPair],
) -> Result<CorrelationReport> {
    let mut report = evaluate(records, scorer, selection, gold)?;
    let scored = score_records(records, scorer, selection, gold)?;
    let seen: HashSet<(usize, usize)> = training.iter().map(|p| (p.u.min(p.v), p.u.max(p.v))).collect();
    let hits = scored
        .selected
        .iter()
        .filter(|s| match (graph.get(&s.first), graph.get(&s.second)) {
            (Some(a), Some(b)) => seen.contains(&(a.min(b), a.max(b))),
            _ => false,
        })
        .count();
    report.coverage = Some(hits as f64 / scored.selected.len().max(1) as f64);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into
/// the edge bins, non-finite values are dropped.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in values.iter().filter(|x| x.is_finite()) {
        let b = if width > 0.0 { ((x - lo) / width).floor() } else { 0.0 };
        counts[(b.max(0.0) as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Measure;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]).unwrap(), [2.0, 3.5, 3.5, 1.0]);
        assert!(average_ranks(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn spearman_identity_and_reverse() {
        let x = [0.3, 1.0, -2.0, 7.0, 4.5];
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_errors() {
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn spearman_tied_example() {
        // ranks: [1, 2.5, 2.5, 4] and [1, 3.5, 3.5, 2]; Pearson by hand:
        // centered x = [-1.5, 0, 0, 1.5], y = [-1.5, 1, 1, -0.5]
        // sxy = 2.25 - 0.75 = 1.5, sxx = 4.5, syy = 2.25 + 1 + 1 + 0.25 = 4.5
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 3.0, 2.0]).unwrap();
        assert!((r - 1.5 / 4.5).abs() < 1e-15, "{r}");
    }

    fn fixture() -> (TaxonomyGraph, Vec<LemmaPairRecord>) {
        let g = TaxonomyGraph::parse_edge_list(
            "cat.n.01\tfeline.n.01\nlion.n.01\tfeline.n.01\nfeline.n.01\tanimal.n.01\n\
             dog.n.01\tcanine.n.01\ncanine.n.01\tanimal.n.01\ncat.n.02\tperson.n.01\nq\n",
            Path::new("t"),
        )
        .unwrap();
        let cands = parse_candidates(
            "cat\tcat.n.01,cat.n.02\nlion\tlion.n.01\ndog\tdog.n.01\nanimal\tanimal.n.01\nperson\tperson.n.01\n",
            Path::new("c"),
        )
        .unwrap();
        let recs = parse_lemma_pairs(
            "cat\tlion\t8.0\ncat\tdog\t5.0\ndog\tanimal\t6.0\nperson\tcat\t3.0\nghost\tcat\t1.0\n",
            Path::new("p"),
            &cands,
        )
        .unwrap();
        (g, recs)
    }

    #[test]
    fn static_selection_picks_graph_argmax() {
        let (g, recs) = fixture();
        let spec = SimilaritySpec::new(Measure::Shp, &g, None).unwrap();
        let sel = static_selection(&recs, &spec, &g).unwrap();
        assert_eq!(sel.excluded, 1, "ghost has no candidates");
        assert_eq!(sel.selected[0].first, "cat.n.01");
        assert_eq!(sel.selected[3].second, "cat.n.02");
    }

    #[test]
    fn graph_scorer_against_its_own_selection_is_perfect() {
        let (g, recs) = fixture();
        let spec = SimilaritySpec::new(Measure::Shp, &g, None).unwrap();
        let gs = GraphScorer { graph: &g, spec: &spec };
        let rep = evaluate(&recs, &gs, SelectionMode::Static(&gs), GoldSource::Graph).unwrap();
        assert!((rep.spearman - 1.0).abs() < 1e-12);
        assert_eq!(rep.evaluated, 4);
        assert_eq!(rep.excluded, 1);
    }

    #[test]
    fn dynamic_needs_human_gold() {
        let (g, recs) = fixture();
        let spec = SimilaritySpec::new(Measure::Shp, &g, None).unwrap();
        let gs = GraphScorer { graph: &g, spec: &spec };
        assert!(matches!(
            evaluate(&recs, &gs, SelectionMode::Dynamic, GoldSource::Graph),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dynamic_unembedded_candidate_is_an_error() {
        let (_, recs) = fixture();
        let m = EmbeddingMatrix::random(vec!["cat.n.01".into(), "lion.n.01".into()], 3, 1).unwrap();
        let err = dynamic_selection(&recs, &m, ScoreMode::Dot).unwrap_err();
        assert!(matches!(err, Error::UnknownNode(n) if n == "cat.n.02" || n == "dog.n.01"));
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.1, 0.55, 1.0, 2.0, f64::INFINITY], 2, 0.0, 1.0);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), [2, 3]);
        assert_eq!(h[1].lo, 0.5);
    }
}
