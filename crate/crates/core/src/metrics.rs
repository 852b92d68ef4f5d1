//! Gold taxonomy similarity measures: shortest-path (ShP), Leacock-Chodorow
//! (LCH), Wu-Palmer (WuP) and Jiang-Conrath (JCN).
//!
//! Every measure returns `None` when the pair has no similarity at all
//! (disconnected, or no common subsumer). JCN returns `f64::INFINITY` when
//! its information-content distance vanishes.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{AncestorSet, DepthIndex, TaxonomyGraph, UNREACHED};

/// Denominators at or below this are treated as zero by JCN.
pub const JCN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Shp,
    Lch,
    Wup,
    Jcn,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Shp, Measure::Lch, Measure::Wup, Measure::Jcn];

    /// Raw-scale pruning threshold used when building training pairs.
    pub fn default_threshold(self) -> f64 {
        match self {
            Measure::Shp | Measure::Jcn => 0.1,
            Measure::Wup => 0.3,
            Measure::Lch => 1.5,
        }
    }

    pub fn is_path_based(self) -> bool {
        matches!(self, Measure::Shp | Measure::Lch)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Shp => "shp",
            Measure::Lch => "lch",
            Measure::Wup => "wup",
            Measure::Jcn => "jcn",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shp" => Ok(Measure::Shp),
            "lch" => Ok(Measure::Lch),
            "wup" => Ok(Measure::Wup),
            "jcn" | "jcn-s" => Ok(Measure::Jcn),
            other => Err(Error::Config(format!(
                "unknown measure `{other}` (expected shp, lch, wup or jcn)"
            ))),
        }
    }
}

/// Descendant-inclusive corpus counts and the information content derived
/// from them, `ic(v) = -ln(count(v) / total)`.
#[derive(Debug, Clone)]
pub struct InformationContentTable {
    counts: Vec<f64>,
    total: f64,
}

impl InformationContentTable {
    pub fn count(&self, ix: usize) -> Option<f64> {
        self.counts.get(ix).copied()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Information content of node `ix`; `+inf` for nodes with zero mass,
    /// `None` when the table does not cover `ix`.
    pub fn ic(&self, ix: usize) -> Option<f64> {
        let c = self.count(ix)?;
        Some(if c > 0.0 {
            // max() folds the -0.0 of a full-mass root into 0.0
            (-(c / self.total).ln()).max(0.0)
        } else {
            f64::INFINITY
        })
    }

    /// Reads raw `node<TAB>count` lines and propagates them up the taxonomy.
    pub fn load(path: impl AsRef<Path>, g: &TaxonomyGraph) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw = parse_counts(&text, path, g)?;
        propagate_counts(g, &raw)
    }
}

fn parse_counts(text: &str, path: &Path, g: &TaxonomyGraph) -> Result<Vec<f64>> {
    let mut raw = vec![0.0; g.len()];
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (node, count) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, no + 1, "expected `node<TAB>count`"))?;
        let count: f64 = count
            .trim()
            .parse()
            .map_err(|e| Error::parse(path, no + 1, format!("bad count: {e}")))?;
        let ix = g
            .get(node.trim())
            .ok_or_else(|| Error::MissingInformationContent(node.trim().to_owned()))?;
        raw[ix] += count;
    }
    Ok(raw)
}

/// Adds each node's raw count to itself and to every distinct ancestor, so
/// a descendant reachable along several paths is counted once per ancestor.
/// The total is the summed mass of the roots.
pub fn propagate_counts(g: &TaxonomyGraph, raw: &[f64]) -> Result<InformationContentTable> {
    if raw.len() != g.len() {
        return Err(Error::Validation(format!(
            "expected {} counts, got {}",
            g.len(),
            raw.len()
        )));
    }
    if let Some(ix) = raw.iter().position(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::Validation(format!(
            "count for `{}` must be a finite non-negative number, got {}",
            g.id(ix),
            raw[ix]
        )));
    }
    let mut counts = vec![0.0; g.len()];
    for (v, &c) in raw.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for a in g.ancestors(v) {
            counts[a] += c;
        }
    }
    let total: f64 = g.roots().map(|r| counts[r]).sum();
    if total <= 0.0 {
        return Err(Error::Validation("total mass is zero".into()));
    }
    Ok(InformationContentTable { counts, total })
}

/// A measure together with the indices it needs.
#[derive(Debug, Clone)]
pub struct SimilaritySpec {
    measure: Measure,
    depths: DepthIndex,
    ic: Option<InformationContentTable>,
}

impl SimilaritySpec {
    pub fn new(measure: Measure, g: &TaxonomyGraph, ic: Option<InformationContentTable>) -> Result<Self> {
        if measure == Measure::Jcn && ic.is_none() {
            return Err(Error::Config("jcn requires an information-content table".into()));
        }
        Ok(Self {
            measure,
            depths: DepthIndex::new(g),
            ic,
        })
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn depths(&self) -> &DepthIndex {
        &self.depths
    }

    pub fn ic_table(&self) -> Option<&InformationContentTable> {
        self.ic.as_ref()
    }

    /// Similarity from an undirected path length; ShP and LCH only.
    pub fn from_path_length(&self, len: u32) -> f64 {
        let len = f64::from(len);
        match self.measure {
            Measure::Shp => 1.0 / (1.0 + len),
            Measure::Lch => -((len + 1.0) / (2.0 * f64::from(self.depths.max_depth()))).ln(),
            m => unreachable!("{m} is not path based"),
        }
    }

    /// Similarity between two dense indices.
    pub fn similarity(&self, g: &TaxonomyGraph, u: usize, v: usize) -> Result<Option<f64>> {
        if self.measure.is_path_based() {
            return Ok(g.path_length(u, v).map(|len| self.from_path_length(len)));
        }
        let anc = AncestorSet::new(g, u);
        self.subsumer_similarity(g, u, v, anc.lcs_with(g, &self.depths, v))
    }

    fn subsumer_similarity(&self, g: &TaxonomyGraph, u: usize, v: usize, lcs: Option<usize>) -> Result<Option<f64>> {
        let Some(lcs) = lcs else { return Ok(None) };
        match self.measure {
            Measure::Wup => {
                let d = &self.depths;
                Ok(Some(
                    2.0 * f64::from(d.depth(lcs)) / f64::from(d.depth(u) + d.depth(v)),
                ))
            }
            Measure::Jcn => {
                let table = self.ic.as_ref().expect("checked at construction");
                let ic = |x: usize| {
                    table
                        .ic(x)
                        .ok_or_else(|| Error::MissingInformationContent(g.id(x).to_owned()))
                };
                let (ic_u, ic_v, ic_lcs) = (ic(u)?, ic(v)?, ic(lcs)?);
                if !ic_u.is_finite() || !ic_v.is_finite() {
                    // zero-mass node: infinitely distant
                    return Ok(Some(0.0));
                }
                let dist = ic_u + ic_v - 2.0 * ic_lcs;
                Ok(Some(if dist <= JCN_EPSILON { f64::INFINITY } else { 1.0 / dist }))
            }
            _ => unreachable!(),
        }
    }

    /// Prepares repeated lookups from a fixed source node.
    pub fn source<'a>(&'a self, g: &'a TaxonomyGraph, u: usize) -> SourceScorer<'a> {
        let ancestors = (!self.measure.is_path_based()).then(|| AncestorSet::new(g, u));
        SourceScorer {
            spec: self,
            graph: g,
            source: u,
            ancestors,
        }
    }

    /// Similarity of `u` to every node, one BFS for path-based measures.
    pub fn one_vs_all(&self, g: &TaxonomyGraph, u: usize) -> Result<Vec<Option<f64>>> {
        if self.measure.is_path_based() {
            return Ok(g
                .bfs_distances(u)
                .into_iter()
                .map(|d| (d != UNREACHED).then(|| self.from_path_length(d)))
                .collect());
        }
        let src = self.source(g, u);
        (0..g.len()).map(|v| src.score(v, None)).collect()
    }
}

pub struct SourceScorer<'a> {
    spec: &'a SimilaritySpec,
    graph: &'a TaxonomyGraph,
    source: usize,
    ancestors: Option<AncestorSet>,
}

impl SourceScorer<'_> {
    /// `known_length` skips the BFS for path-based measures when the caller
    /// already has the distance.
    pub fn score(&self, v: usize, known_length: Option<u32>) -> Result<Option<f64>> {
        let spec = self.spec;
        match &self.ancestors {
            None => {
                let len = match known_length {
                    Some(l) => Some(l),
                    None => self.graph.path_length(self.source, v),
                };
                Ok(len.map(|l| spec.from_path_length(l)))
            }
            Some(anc) => {
                let lcs = anc.lcs_with(self.graph, &spec.depths, v);
                spec.subsumer_similarity(self.graph, self.source, v, lcs)
            }
        }
    }
}

fn check_measure(spec: &SimilaritySpec, expected: Measure) -> Result<()> {
    if spec.measure != expected {
        return Err(Error::Config(format!(
            "spec measures {}, expected {expected}",
            spec.measure
        )));
    }
    Ok(())
}

/// `1 / (1 + len)`.
pub fn shp_similarity(g: &TaxonomyGraph, u: &str, v: &str) -> Result<Option<f64>> {
    let (u, v) = (g.index_of(u)?, g.index_of(v)?);
    Ok(g.path_length(u, v).map(|len| 1.0 / (1.0 + f64::from(len))))
}

/// `-ln((len + 1) / (2 D))` with `D` the taxonomy depth.
pub fn lch_similarity(spec: &SimilaritySpec, g: &TaxonomyGraph, u: &str, v: &str) -> Result<Option<f64>> {
    check_measure(spec, Measure::Lch)?;
    spec.similarity(g, g.index_of(u)?, g.index_of(v)?)
}

/// `2 depth(lcs) / (depth(u) + depth(v))`.
pub fn wup_similarity(spec: &SimilaritySpec, g: &TaxonomyGraph, u: &str, v: &str) -> Result<Option<f64>> {
    check_measure(spec, Measure::Wup)?;
    spec.similarity(g, g.index_of(u)?, g.index_of(v)?)
}

/// `1 / (ic(u) + ic(v) - 2 ic(lcs))`, infinite when the distance vanishes.
pub fn jcn_similarity(spec: &SimilaritySpec, g: &TaxonomyGraph, u: &str, v: &str) -> Result<Option<f64>> {
    check_measure(spec, Measure::Jcn)?;
    spec.similarity(g, g.index_of(u)?, g.index_of(v)?)
}
