//! Synthetic taxonomies for tests, fixtures and benchmarks. Node `i` is
//! named `n{i}` and only ever takes parents with smaller indices, so every
//! generated graph is acyclic by construction.

use rand::Rng;

use crate::graph::{GraphBuilder, TaxonomyGraph};

fn name(i: usize) -> String {
    format!("n{i}")
}

/// Random recursive tree: node `i > 0` hangs under a uniform earlier node.
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> TaxonomyGraph {
    random_dag(n, 0.0, 1, rng)
}

/// Random DAG with `roots` roots; every later node gets one uniform parent
/// and, with probability `second_parent`, a second distinct one.
pub fn random_dag<R: Rng>(n: usize, second_parent: f64, roots: usize, rng: &mut R) -> TaxonomyGraph {
    let roots = roots.clamp(1, n.max(1));
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(&name(i));
    }
    for i in roots..n {
        let p = rng.random_range(0..i);
        b.add_edge(&name(i), &name(p)).expect("distinct endpoints");
        if i > 1 && rng.random_bool(second_parent) {
            let q = rng.random_range(0..i);
            if q != p {
                b.add_edge(&name(i), &name(q)).expect("distinct endpoints");
            }
        }
    }
    b.build().expect("parents precede children")
}

/// A large noun-hierarchy-shaped taxonomy: a single root, heavy-tailed
/// fan-out from preferential attachment and a small share of nodes with
/// two hypernyms.
pub fn wordnet_like<R: Rng>(n: usize, rng: &mut R) -> TaxonomyGraph {
    let mut b = GraphBuilder::new();
    // Each node appears in `pool` once plus once per child, so picking a
    // uniform pool entry attaches proportionally to (children + 1).
    let mut pool: Vec<usize> = Vec::with_capacity(2 * n);
    for i in 0..n {
        b.add_node(&name(i));
        if i > 0 {
            let p = pool[rng.random_range(0..pool.len())];
            b.add_edge(&name(i), &name(p)).expect("distinct endpoints");
            pool.push(p);
            if i > 2 && rng.random_bool(0.02) {
                let q = rng.random_range(0..i);
                if q != p {
                    b.add_edge(&name(i), &name(q)).expect("distinct endpoints");
                }
            }
        }
        pool.push(i);
    }
    b.build().expect("parents precede children")
}

/// Raw corpus counts: roughly a third of the nodes unseen, the rest drawn
/// from `1..=max_count`.
pub fn random_counts<R: Rng>(g: &TaxonomyGraph, max_count: u32, rng: &mut R) -> Vec<f64> {
    (0..g.len())
        .map(|_| {
            if rng.random_bool(1.0 / 3.0) {
                0.0
            } else {
                f64::from(rng.random_range(1..=max_count))
            }
        })
        .collect()
}
