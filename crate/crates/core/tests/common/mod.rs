//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's own traversal or ranking code.
#![allow(dead_code)]

use taxembed::TaxonomyGraph;

pub const JCN_EPSILON: f64 = 1e-12;

/// All-pairs facts about a small graph, computed by cubic closures.
pub struct GraphOracle {
    pub n: usize,
    /// Undirected shortest-path lengths (Floyd–Warshall).
    pub dist: Vec<Vec<Option<u32>>>,
    /// `anc[v][a]`: `a` is `v` or reachable from `v` along parent edges.
    pub anc: Vec<Vec<bool>>,
    pub depth: Vec<u32>,
    pub max_depth: u32,
}

impl GraphOracle {
    pub fn new(g: &TaxonomyGraph) -> Self {
        let n = g.len();
        let edges: Vec<(usize, usize)> = g.edges().collect();
        const INF: u64 = u64::MAX / 4;

        let mut d = vec![vec![INF; n]; n];
        for (v, row) in d.iter_mut().enumerate() {
            row[v] = 0;
        }
        for &(c, p) in &edges {
            d[c][p] = 1;
            d[p][c] = 1;
        }
        floyd_warshall(&mut d);
        let dist = d
            .iter()
            .map(|row| row.iter().map(|&x| (x < INF).then_some(x as u32)).collect())
            .collect();

        // Directed upward distances, child to ancestor.
        let mut up = vec![vec![INF; n]; n];
        for (v, row) in up.iter_mut().enumerate() {
            row[v] = 0;
        }
        for &(c, p) in &edges {
            up[c][p] = 1;
        }
        floyd_warshall(&mut up);
        let anc: Vec<Vec<bool>> = up.iter().map(|row| row.iter().map(|&x| x < INF).collect()).collect();

        let has_parent: Vec<bool> = (0..n).map(|v| edges.iter().any(|&(c, _)| c == v)).collect();
        let depth: Vec<u32> = (0..n)
            .map(|v| {
                let shortest = (0..n).filter(|&r| !has_parent[r]).map(|r| up[v][r]).min().unwrap();
                shortest as u32 + 1
            })
            .collect();
        let max_depth = depth.iter().copied().max().unwrap_or(0);
        Self {
            n,
            dist,
            anc,
            depth,
            max_depth,
        }
    }

    /// Deepest common reflexive ancestor, smallest index on ties.
    pub fn lcs(&self, u: usize, v: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for a in 0..self.n {
            if self.anc[u][a] && self.anc[v][a] && best.is_none_or(|b| self.depth[a] > self.depth[b]) {
                best = Some(a);
            }
        }
        best
    }

    pub fn shp(&self, u: usize, v: usize) -> Option<f64> {
        self.dist[u][v].map(|l| 1.0 / (1.0 + f64::from(l)))
    }

    pub fn lch(&self, u: usize, v: usize) -> Option<f64> {
        self.dist[u][v].map(|l| -((f64::from(l) + 1.0) / (2.0 * f64::from(self.max_depth))).ln())
    }

    pub fn wup(&self, u: usize, v: usize) -> Option<f64> {
        self.lcs(u, v)
            .map(|a| 2.0 * f64::from(self.depth[a]) / f64::from(self.depth[u] + self.depth[v]))
    }

    /// Descendant-inclusive counts by enumerating every descendant.
    pub fn counts(&self, raw: &[f64]) -> (Vec<f64>, f64) {
        let counts: Vec<f64> = (0..self.n)
            .map(|a| (0..self.n).filter(|&d| self.anc[d][a]).map(|d| raw[d]).sum())
            .collect();
        let roots = (0..self.n).filter(|&r| (0..self.n).all(|a| a == r || !self.anc[r][a]));
        let total = roots.map(|r| counts[r]).sum();
        (counts, total)
    }

    pub fn jcn(&self, raw: &[f64], u: usize, v: usize) -> Option<f64> {
        let (counts, total) = self.counts(raw);
        let ic = |x: usize| {
            if counts[x] == 0.0 {
                f64::INFINITY
            } else {
                (-(counts[x] / total).ln()).max(0.0)
            }
        };
        let a = self.lcs(u, v)?;
        if ic(u).is_infinite() || ic(v).is_infinite() {
            return Some(0.0);
        }
        let dist = ic(u) + ic(v) - 2.0 * ic(a);
        Some(if dist <= JCN_EPSILON { f64::INFINITY } else { 1.0 / dist })
    }
}

fn floyd_warshall(d: &mut [Vec<u64>]) {
    let n = d.len();
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == u64::MAX / 4 {
                continue;
            }
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
}

/// Absolute comparison that treats equal infinities and matching `None`s
/// as equal.
pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) if x.is_infinite() || y.is_infinite() => x == y,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}

/// Rank of each value: one plus the number of smaller values, plus half
/// the number of other equal values.
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let below = x.iter().filter(|&&y| y < xi).count() as f64;
            let equal = x.iter().filter(|&&y| y == xi).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(x), &brute_ranks(y))
}
