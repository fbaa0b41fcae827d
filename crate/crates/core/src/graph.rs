//! Undirected weighted graphs in compressed sparse row form.
//!
//! Every undirected edge `{u, v}` is stored twice, once in each endpoint's neighbor
//! list, with one shared activation probability. Neighbor lists are sorted so that
//! edge lookups are binary searches and iteration order is reproducible.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::mix;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl Graph {
    /// Builds a graph on `n` nodes from undirected edges given once each.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("{n} nodes exceed u32 ids")));
        }
        let mut seen = HashSet::new();
        let mut half: Vec<(u32, u32, f64)> = Vec::new();
        for (line, (u, v, w)) in edges.into_iter().enumerate() {
            let line = line + 1;
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop { line, node: u.to_string() });
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::WeightOutOfRange { line, weight: w });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateEdge { line, u: u.to_string(), v: v.to_string() });
            }
            half.push((u as u32, v as u32, w));
            half.push((v as u32, u as u32, w));
        }
        half.sort_unstable_by_key(|&(u, v, _)| (u, v));

        let mut offsets = vec![0usize; n + 1];
        for &(u, _, _) in &half {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = half.iter().map(|&(_, v, _)| v).collect();
        let weights = half.iter().map(|&(_, _, w)| w).collect();
        Ok(Graph { offsets, targets, weights })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Graph {
        Graph { offsets: vec![0; n + 1], targets: Vec::new(), weights: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn neighbors(&self, u: NodeId) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.targets[self.offsets[u]..self.offsets[u + 1]].iter().map(|&v| v as usize)
    }

    /// `(neighbor, weight)` pairs of `u` in ascending neighbor order.
    pub fn weighted_neighbors(&self, u: NodeId) -> impl ExactSizeIterator<Item = (NodeId, f64)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.targets[range.clone()].iter().zip(&self.weights[range]).map(|(&v, &w)| (v as usize, w))
    }

    /// Raw CSR slices: `(offsets, targets, weights)`. Slot `e` of `targets` is the
    /// directed half-edge `u -> targets[e]` for the `u` whose range contains `e`.
    pub fn csr(&self) -> (&[usize], &[u32], &[f64]) {
        (&self.offsets, &self.targets, &self.weights)
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.targets[range.clone()].binary_search(&(v as u32)).ok().map(|i| self.weights[range.start + i])
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.weight(u, v).is_some()
    }

    /// Undirected edges `(u, v, w)` with `u < v`, sorted by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.node_count())
            .flat_map(move |u| self.weighted_neighbors(u).filter(move |&(v, _)| v > u).map(move |(v, w)| (u, v, w)))
    }

    pub fn mean_degree(&self) -> f64 {
        if self.node_count() == 0 {
            return 0.0;
        }
        self.targets.len() as f64 / self.node_count() as f64
    }

    pub fn mean_weight(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    /// Same topology with every edge weight replaced by `weight`.
    pub fn with_uniform_weight(&self, weight: f64) -> Result<Graph> {
        check_probability("weight", weight)?;
        let mut g = self.clone();
        g.weights.iter_mut().for_each(|w| *w = weight);
        Ok(g)
    }

    /// Same topology with weights drawn i.i.d. uniform on `[lo, hi]`, one draw per
    /// undirected edge in `(u, v)` order.
    pub fn with_random_weights(&self, lo: f64, hi: f64, seed: u64) -> Result<Graph> {
        check_weight_range(lo, hi)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<_> = self.edges().map(|(u, v, _)| (u, v, sample_weight(&mut rng, lo, hi))).collect();
        Graph::from_edges(self.node_count(), edges)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        n == 0 || bfs_levels(self, 0).iter().all(|d| d.is_some())
    }

    /// Writes the dump format: `u v w` per undirected edge, sorted by `(u, v)`,
    /// weights with six decimals.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nodes {} edges {}", self.node_count(), self.edge_count())?;
        for (u, v, w) in self.edges() {
            writeln!(out, "{u} {v} {w:.6}")?;
        }
        Ok(())
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{name} {p} outside [0, 1]")));
    }
    Ok(())
}

fn check_weight_range(lo: f64, hi: f64) -> Result<()> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidParameter(format!("weight range [{lo}, {hi}] not within [0, 1]")));
    }
    Ok(())
}

fn sample_weight(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// External labels of a loaded graph, indexed by dense id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeLabels {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl NodeLabels {
    fn new(labels: Vec<String>) -> NodeLabels {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        NodeLabels { labels, index }
    }

    /// Labels `0..n` mapping to themselves.
    pub fn identity(n: usize) -> NodeLabels {
        NodeLabels::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id]
    }

    pub fn id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Restricts to the given dense ids, in that order.
    pub fn restrict(&self, ids: &[NodeId]) -> NodeLabels {
        NodeLabels::new(ids.iter().map(|&i| self.labels[i].clone()).collect())
    }
}

/// Parses an edge list: one `u v [w]` per line, `#` starts a comment.
///
/// Labels are arbitrary tokens. When every label is an integer, dense ids follow
/// numeric order; otherwise they follow first appearance.
pub fn load_edge_list<R: BufRead>(source: R, default_weight: f64) -> Result<(Graph, NodeLabels)> {
    check_probability("default weight", default_weight)?;
    let mut raw: Vec<(usize, String, String, f64)> = Vec::new();
    let mut seen_pairs = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let (u, v, w) = match fields.as_slice() {
            [u, v] => (*u, *v, default_weight),
            [u, v, w] => {
                let w: f64 = w.parse().map_err(|_| Error::MalformedLine {
                    line: line_no,
                    message: format!("weight `{w}` is not a number"),
                })?;
                (*u, *v, w)
            }
            _ => {
                return Err(Error::MalformedLine {
                    line: line_no,
                    message: format!("expected `u v [w]`, found {} fields", fields.len()),
                })
            }
        };
        if u == v {
            return Err(Error::SelfLoop { line: line_no, node: u.to_string() });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::WeightOutOfRange { line: line_no, weight: w });
        }
        let key = if u < v { (u.to_string(), v.to_string()) } else { (v.to_string(), u.to_string()) };
        if !seen_pairs.insert(key) {
            return Err(Error::DuplicateEdge { line: line_no, u: u.to_string(), v: v.to_string() });
        }
        raw.push((line_no, u.to_string(), v.to_string(), w));
    }

    let mut order: Vec<String> = Vec::new();
    let mut known = HashSet::new();
    for (_, u, v, _) in &raw {
        for l in [u, v] {
            if known.insert(l.clone()) {
                order.push(l.clone());
            }
        }
    }
    if order.iter().all(|l| l.parse::<i64>().is_ok()) {
        order.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    let labels = NodeLabels::new(order);
    let edges: Vec<_> = raw.iter().map(|(_, u, v, w)| (labels.id(u).unwrap(), labels.id(v).unwrap(), *w)).collect();
    let g = Graph::from_edges(labels.len(), edges)?;
    Ok((g, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphKind {
    /// G(n, p) with `p = avg_degree / (n - 1)`.
    Er { avg_degree: f64 },
    /// Ring lattice of even degree `ring_degree`, each lattice edge rewired with
    /// probability `rewire`; regenerated until connected.
    Ws { ring_degree: usize, rewire: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphGenSpec {
    #[serde(flatten)]
    pub kind: GraphKind,
    pub n: usize,
    pub weight_lo: f64,
    pub weight_hi: f64,
    pub seed: u64,
    #[serde(default = "default_ws_attempts")]
    pub max_attempts: usize,
}

fn default_ws_attempts() -> usize {
    100
}

impl GraphGenSpec {
    pub fn er(n: usize, avg_degree: f64, weight_lo: f64, weight_hi: f64, seed: u64) -> GraphGenSpec {
        GraphGenSpec { kind: GraphKind::Er { avg_degree }, n, weight_lo, weight_hi, seed, max_attempts: 100 }
    }

    pub fn ws(n: usize, ring_degree: usize, rewire: f64, weight_lo: f64, weight_hi: f64, seed: u64) -> GraphGenSpec {
        GraphGenSpec { kind: GraphKind::Ws { ring_degree, rewire }, n, weight_lo, weight_hi, seed, max_attempts: 100 }
    }

    pub fn generate(&self) -> Result<Graph> {
        match self.kind {
            GraphKind::Er { .. } => generate_er(self),
            GraphKind::Ws { .. } => generate_ws(self),
        }
    }
}

/// Erdős–Rényi G(n, p) by geometric skipping over the lower triangle.
pub fn generate_er(spec: &GraphGenSpec) -> Result<Graph> {
    let GraphKind::Er { avg_degree } = spec.kind else {
        return Err(Error::InvalidParameter("generate_er needs an ER spec".into()));
    };
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n}, need at least 2 nodes")));
    }
    check_weight_range(spec.weight_lo, spec.weight_hi)?;
    if !(avg_degree >= 0.0) {
        return Err(Error::InvalidParameter(format!("average degree {avg_degree}")));
    }
    let p = (avg_degree / (n - 1) as f64).min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges = Vec::new();
    if p > 0.0 {
        let log_q = (1.0 - p).ln();
        let (mut v, mut w) = (1usize, -1i64);
        while v < n {
            let skip = if p >= 1.0 {
                0
            } else {
                let r: f64 = rng.gen();
                ((1.0 - r).ln() / log_q).floor() as i64
            };
            w += 1 + skip;
            while w >= v as i64 && v < n {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                let wt = sample_weight(&mut rng, spec.weight_lo, spec.weight_hi);
                edges.push((w as usize, v, wt));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Watts–Strogatz small world, regenerated with derived sub-seeds until connected.
pub fn generate_ws(spec: &GraphGenSpec) -> Result<Graph> {
    let GraphKind::Ws { ring_degree, rewire } = spec.kind else {
        return Err(Error::InvalidParameter("generate_ws needs a WS spec".into()));
    };
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n}, need at least 2 nodes")));
    }
    if ring_degree % 2 != 0 || ring_degree >= n {
        return Err(Error::InvalidParameter(format!("ring degree {ring_degree} must be even and below n = {n}")));
    }
    check_probability("rewire probability", rewire)?;
    check_weight_range(spec.weight_lo, spec.weight_hi)?;
    for attempt in 0..spec.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, attempt as u64));
        let adjacency = ws_topology(n, ring_degree, rewire, &mut rng);
        let mut edges = Vec::with_capacity(n * ring_degree / 2);
        for (u, nbrs) in adjacency.iter().enumerate() {
            for &v in nbrs.range(u + 1..) {
                edges.push((u, v, sample_weight(&mut rng, spec.weight_lo, spec.weight_hi)));
            }
        }
        let g = Graph::from_edges(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::RetryBudgetExhausted { attempts: spec.max_attempts })
}

fn ws_topology(n: usize, k: usize, beta: f64, rng: &mut ChaCha8Rng) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.gen::<f64>() >= beta || adj[u].len() >= n - 1 || !adj[u].contains(&v) {
                continue;
            }
            let mut w = rng.gen_range(0..n);
            while w == u || adj[u].contains(&w) {
                w = rng.gen_range(0..n);
            }
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    adj
}

fn bfs_levels(g: &Graph, source: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    let mut queue = VecDeque::new();
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Unweighted shortest-path length, `None` when unreachable.
pub fn bfs_distance(g: &Graph, u: NodeId, v: NodeId) -> Option<usize> {
    if u == v {
        return Some(0);
    }
    bfs_levels(g, u)[v]
}

/// Induced subgraph on the largest connected component. Ties go to the component
/// holding the smallest node id. Returns the subgraph and `new id -> old id`.
pub fn largest_connected_component(g: &Graph) -> Result<(Graph, Vec<NodeId>)> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut component = vec![usize::MAX; n];
    let mut best: Option<(usize, usize)> = None; // (size, label)
    let mut label = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut size = 0;
        let mut stack = vec![start];
        component[start] = label;
        while let Some(u) = stack.pop() {
            size += 1;
            for v in g.neighbors(u) {
                if component[v] == usize::MAX {
                    component[v] = label;
                    stack.push(v);
                }
            }
        }
        // components are discovered in order of their smallest member
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, label));
        }
        label += 1;
    }
    let (_, keep) = best.unwrap();
    let old_ids: Vec<NodeId> = (0..n).filter(|&u| component[u] == keep).collect();
    let mut new_id = vec![usize::MAX; n];
    for (i, &old) in old_ids.iter().enumerate() {
        new_id[old] = i;
    }
    let edges: Vec<_> =
        g.edges().filter(|&(u, _, _)| component[u] == keep).map(|(u, v, w)| (new_id[u], new_id[v], w)).collect();
    Ok((Graph::from_edges(old_ids.len(), edges)?, old_ids))
}
