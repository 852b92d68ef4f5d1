//! Hypernym taxonomy: loading, indexing and traversal primitives.
//!
//! Nodes are string ids (`dog.n.01`) mapped to dense indices in the order
//! they first appear in the input. Directed edges point from child to
//! parent and must form a DAG; the undirected view is the union of both
//! directions.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Marker for nodes a BFS did not reach.
pub const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Clone, Default)]
pub struct TaxonomyGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

/// Incremental constructor; `build` runs the acyclicity check.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    edges: HashSet<(usize, usize)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) -> usize {
        if let Some(&ix) = self.index.get(id) {
            return ix;
        }
        let ix = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), ix);
        self.parents.push(Vec::new());
        ix
    }

    /// Adds a `child -> parent` hypernym edge. Duplicate edges are ignored.
    pub fn add_edge(&mut self, child: &str, parent: &str) -> Result<()> {
        if child == parent {
            return Err(Error::SelfLoop {
                node: child.to_owned(),
                line: 0,
            });
        }
        let c = self.add_node(child);
        let p = self.add_node(parent);
        if self.edges.insert((c, p)) {
            self.parents[c].push(p);
        }
        Ok(())
    }

    pub fn build(self) -> Result<TaxonomyGraph> {
        let n = self.ids.len();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let neighbors = (0..n)
            .map(|v| {
                let mut adj: Vec<usize> = self.parents[v].iter().chain(&children[v]).copied().collect();
                adj.sort_unstable();
                adj
            })
            .collect();
        let graph = TaxonomyGraph {
            ids: self.ids,
            index: self.index,
            parents: self.parents,
            children,
            neighbors,
            edge_count: self.edges.len(),
        };
        graph.check_acyclic()?;
        Ok(graph)
    }
}

impl TaxonomyGraph {
    pub fn from_edges<'a, I>(nodes: &[&str], edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut b = GraphBuilder::new();
        for n in nodes {
            b.add_node(n);
        }
        for (c, p) in edges {
            b.add_edge(c, p)?;
        }
        b.build()
    }

    /// Reads a `child<TAB>parent` edge list. Lines holding a single token
    /// declare isolated nodes; `#` starts a comment line.
    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }

    /// Edge-list text in node order; nodes without edges get a line of
    /// their own.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for v in 0..self.len() {
            if self.parents[v].is_empty() && self.children[v].is_empty() {
                out.push_str(&self.ids[v]);
                out.push('\n');
            }
            for &p in &self.parents[v] {
                out.push_str(&self.ids[v]);
                out.push('\t');
                out.push_str(&self.ids[p]);
                out.push('\n');
            }
        }
        out
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_edge_list(text: &str, path: &Path) -> Result<Self> {
        let mut b = GraphBuilder::new();
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            match fields.as_slice() {
                [node] if !node.is_empty() => {
                    b.add_node(node);
                }
                [child, parent] if !child.is_empty() && !parent.is_empty() => {
                    if child == parent {
                        return Err(Error::SelfLoop {
                            node: (*child).to_owned(),
                            line: line_no,
                        });
                    }
                    b.add_edge(child, parent)?;
                }
                _ => {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("expected `child<TAB>parent` or a single node id, got {line:?}"),
                    ))
                }
            }
        }
        b.build()
    }

    /// Adds `name` as parent of every current root, joining the forest
    /// into a single tree-like hierarchy.
    pub fn with_virtual_root(self, name: &str) -> Result<Self> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!(
                "virtual root `{name}` collides with an existing node"
            )));
        }
        let roots: Vec<usize> = self.roots().collect();
        let mut b = GraphBuilder::new();
        for id in &self.ids {
            b.add_node(id);
        }
        for (c, p) in self.edges() {
            b.add_edge(&self.ids[c], &self.ids[p])?;
        }
        b.add_node(name);
        for r in roots {
            b.add_edge(&self.ids[r], name)?;
        }
        b.build()
    }

    fn check_acyclic(&self) -> Result<()> {
        // Kahn's algorithm over child -> parent edges.
        let n = self.len();
        let mut pending: Vec<usize> = self.children.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| pending[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &p in &self.parents[v] {
                pending[p] -= 1;
                if pending[p] == 0 {
                    queue.push_back(p);
                }
            }
        }
        if seen == n {
            return Ok(());
        }
        // A node left over still has a left-over child; following those
        // children must eventually revisit a node on the current walk.
        let start = (0..n).find(|&v| pending[v] > 0).expect("leftover node");
        let mut on_path = vec![false; n];
        let mut v = start;
        loop {
            on_path[v] = true;
            let c = *self.children[v]
                .iter()
                .find(|&&c| pending[c] > 0)
                .expect("leftover node has a leftover child");
            if on_path[c] {
                return Err(Error::Cycle {
                    child: self.ids[c].clone(),
                    parent: self.ids[v].clone(),
                });
            }
            v = c;
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn id(&self, ix: usize) -> &str {
        &self.ids[ix]
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

    pub fn parents(&self, ix: usize) -> &[usize] {
        &self.parents[ix]
    }

    pub fn children(&self, ix: usize) -> &[usize] {
        &self.children[ix]
    }

    /// Undirected neighbors, sorted by index.
    pub fn neighbors(&self, ix: usize) -> &[usize] {
        &self.neighbors[ix]
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&v| self.parents[v].is_empty())
    }

    /// Directed `(child, parent)` edges.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (c, p)))
    }

    /// Undirected BFS distances from `src` to every node; [`UNREACHED`] marks
    /// other components.
    pub fn bfs_distances(&self, src: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.len()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            let d = dist[v] + 1;
            for &w in &self.neighbors[v] {
                if dist[w] == UNREACHED {
                    dist[w] = d;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Nodes within `max_depth` undirected hops of `src`, excluding `src`,
    /// with their distances, sorted by node index.
    pub fn bounded_bfs(&self, src: usize, max_depth: u32) -> Vec<(usize, u32)> {
        let mut dist: HashMap<usize, u32> = HashMap::new();
        dist.insert(src, 0);
        let mut frontier = vec![src];
        for depth in 1..=max_depth {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &self.neighbors[v] {
                    if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                        e.insert(depth);
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        let mut out: Vec<(usize, u32)> = dist.into_iter().filter(|&(v, _)| v != src).collect();
        out.sort_unstable();
        out
    }

    /// Length in edges of the shortest undirected path, `None` when the
    /// nodes lie in different components.
    pub fn path_length(&self, u: usize, v: usize) -> Option<u32> {
        if u == v {
            return Some(0);
        }
        let mut dist = HashMap::new();
        let mut queue = VecDeque::new();
        dist.insert(u, 0u32);
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x] + 1;
            for &w in &self.neighbors[x] {
                if w == v {
                    return Some(d);
                }
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d);
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Reflexive ancestor closure of `ix` along parent edges.
    pub fn ancestors(&self, ix: usize) -> HashSet<usize> {
        let mut seen = HashSet::new();
        let mut stack = vec![ix];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.parents[v].iter().copied());
            }
        }
        seen
    }

    /// Nodes in a topological order with every child before its parents.
    pub fn children_first_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut pending: Vec<usize> = self.children.iter().map(Vec::len).collect();
        let mut order: Vec<usize> = (0..n).filter(|&v| pending[v] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &p in &self.parents[v] {
                pending[p] -= 1;
                if pending[p] == 0 {
                    order.push(p);
                }
            }
        }
        order
    }
}

/// Depth of every node: 1 for roots, otherwise one more than the length of
/// the shortest upward path to any root.
#[derive(Debug, Clone)]
pub struct DepthIndex {
    depth: Vec<u32>,
    max_depth: u32,
}

impl DepthIndex {
    pub fn new(g: &TaxonomyGraph) -> Self {
        let mut depth = vec![0u32; g.len()];
        let mut queue: VecDeque<usize> = g.roots().collect();
        for &r in &queue {
            depth[r] = 1;
        }
        while let Some(v) = queue.pop_front() {
            for &c in g.children(v) {
                if depth[c] == 0 {
                    depth[c] = depth[v] + 1;
                    queue.push_back(c);
                }
            }
        }
        let max_depth = depth.iter().copied().max().unwrap_or(0);
        Self { depth, max_depth }
    }

    pub fn depth(&self, ix: usize) -> u32 {
        self.depth[ix]
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }
}

/// Precomputed ancestor closure of one node, reused when looking up the
/// lowest common subsumer against many partners.
#[derive(Debug, Clone)]
pub struct AncestorSet {
    members: HashSet<usize>,
}

impl AncestorSet {
    pub fn new(g: &TaxonomyGraph, ix: usize) -> Self {
        Self {
            members: g.ancestors(ix),
        }
    }

    pub fn contains(&self, ix: usize) -> bool {
        self.members.contains(&ix)
    }

    /// Deepest shared ancestor with `other`; ties go to the smaller index.
    pub fn lcs_with(&self, g: &TaxonomyGraph, depths: &DepthIndex, other: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut seen = HashSet::new();
        let mut stack = vec![other];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            if self.members.contains(&v) {
                best = match best {
                    Some(b) if (depths.depth(b), std::cmp::Reverse(b)) >= (depths.depth(v), std::cmp::Reverse(v)) => Some(b),
                    _ => Some(v),
                };
            }
            // Shortest-root depth is not monotone along parent edges in a DAG,
            // so the search cannot stop at the first common ancestor.
            stack.extend(g.parents(v).iter().copied());
        }
        best
    }
}

/// Undirected shortest-path length between two named nodes, `None` if they
/// are disconnected.
pub fn shortest_path_length(g: &TaxonomyGraph, u: &str, v: &str) -> Result<Option<u32>> {
    let (u, v) = (g.index_of(u)?, g.index_of(v)?);
    Ok(g.path_length(u, v))
}

pub fn lowest_common_subsumer(
    g: &TaxonomyGraph,
    depths: &DepthIndex,
    u: &str,
    v: &str,
) -> Result<Option<usize>> {
    let (u, v) = (g.index_of(u)?, g.index_of(v)?);
    Ok(AncestorSet::new(g, u).lcs_with(g, depths, v))
}

/// All nodes one or two undirected hops from `v`, sorted by index.
pub fn second_order_neighborhood(g: &TaxonomyGraph, v: &str) -> Result<Vec<usize>> {
    let v = g.index_of(v)?;
    Ok(g.bounded_bfs(v, 2).into_iter().map(|(w, _)| w).collect())
}
