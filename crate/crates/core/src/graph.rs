//! Stochastic block model sampling and graph predicates.
//!
//! Graphs are small (tens of vertices) and dense enough that a flat boolean
//! adjacency matrix is the simplest representation that keeps every predicate
//! straightforward.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("block model needs at least one agent")]
    NoAgents,
    #[error("cluster count {clusters} must be in 1..={agents}")]
    ClusterCount { clusters: usize, agents: usize },
    #[error("agent {agent} has cluster label {label}, expected < {clusters}")]
    LabelOutOfRange { agent: usize, label: usize, clusters: usize },
    #[error("cluster {0} has no agents")]
    EmptyCluster(usize),
    #[error("probability matrix must be {0}x{0}")]
    ProbShape(usize),
    #[error("probability p({0},{1}) = {2} is outside [0, 1]")]
    ProbRange(usize, usize, f64),
    #[error("probability matrix is not symmetric at ({0},{1})")]
    ProbAsymmetric(usize, usize),
    #[error("cluster edge probability needs balanced clusters: C = {clusters} does not divide M = {agents}")]
    Unbalanced { agents: usize, clusters: usize },
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("window length {l} must be in 1..={len}")]
    WindowLength { l: usize, len: usize },
    #[error("graphs in a window must share a vertex set ({0} vs {1} vertices)")]
    VertexMismatch(usize, usize),
    #[error("graph has {graph} vertices but the model has {model} agents")]
    ModelMismatch { graph: usize, model: usize },
    #[error("empty graph window")]
    EmptyWindow,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EdgeListError {
    #[error("malformed edge at line {0}: expected two vertex indices")]
    Malformed(usize),
    #[error("vertex {vertex} at line {line} is out of range (n = {n})")]
    OutOfRange { line: usize, vertex: usize, n: usize },
    #[error("self-loop at line {0}")]
    SelfLoop(usize),
}

/// Cluster labels plus the symmetric cluster-pair edge probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockModel {
    assignment: Vec<usize>,
    n_clusters: usize,
    probs: Vec<Vec<f64>>,
}

impl BlockModel {
    pub fn new(assignment: Vec<usize>, probs: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let n_clusters = probs.len();
        validate_labels(&assignment, n_clusters)?;
        for (a, row) in probs.iter().enumerate() {
            if row.len() != n_clusters {
                return Err(GraphError::ProbShape(n_clusters));
            }
            for (b, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(GraphError::ProbRange(a, b, p));
                }
                if probs[b][a] != p {
                    return Err(GraphError::ProbAsymmetric(a, b));
                }
            }
        }
        Ok(Self {
            assignment,
            n_clusters,
            probs,
        })
    }

    /// Two-level model: `p_intra` on the diagonal, `q_inter` elsewhere, with
    /// agents split into contiguous blocks of near-equal size.
    pub fn two_level(
        n_agents: usize,
        n_clusters: usize,
        p_intra: f64,
        q_inter: f64,
    ) -> Result<Self, GraphError> {
        if n_agents == 0 {
            return Err(GraphError::NoAgents);
        }
        if n_clusters == 0 || n_clusters > n_agents {
            return Err(GraphError::ClusterCount {
                clusters: n_clusters,
                agents: n_agents,
            });
        }
        let probs = (0..n_clusters)
            .map(|a| {
                (0..n_clusters)
                    .map(|b| if a == b { p_intra } else { q_inter })
                    .collect()
            })
            .collect();
        Self::new(balanced_labels(n_agents, n_clusters), probs)
    }

    pub fn n_agents(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, agent: usize) -> usize {
        self.assignment[agent]
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        self.probs[self.assignment[i]][self.assignment[j]]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.assignment, self.n_clusters)
    }

    pub fn min_cluster_size(&self) -> usize {
        self.cluster_sizes().into_iter().min().unwrap_or(0)
    }

    pub fn is_balanced(&self) -> bool {
        let sizes = self.cluster_sizes();
        sizes.iter().all(|&s| s * self.n_clusters == self.n_agents())
    }

    /// Smallest diagonal entry `min_m p(m,m)`.
    pub fn min_intra(&self) -> f64 {
        (0..self.n_clusters)
            .map(|c| self.probs[c][c])
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest off-diagonal entry, `None` for a single cluster.
    pub fn min_inter(&self) -> Option<f64> {
        let mut out: Option<f64> = None;
        for a in 0..self.n_clusters {
            for b in 0..self.n_clusters {
                if a != b {
                    out = Some(out.map_or(self.probs[a][b], |o| o.min(self.probs[a][b])));
                }
            }
        }
        out
    }
}

/// Contiguous near-equal blocks: agent `i` goes to cluster `i * C / M`.
pub fn balanced_labels(n_agents: usize, n_clusters: usize) -> Vec<usize> {
    (0..n_agents).map(|i| i * n_clusters / n_agents).collect()
}

pub(crate) fn cluster_sizes(labels: &[usize], n_clusters: usize) -> Vec<usize> {
    let mut sizes = vec![0; n_clusters];
    for &c in labels {
        sizes[c] += 1;
    }
    sizes
}

fn validate_labels(labels: &[usize], n_clusters: usize) -> Result<(), GraphError> {
    if labels.is_empty() {
        return Err(GraphError::NoAgents);
    }
    if n_clusters == 0 || n_clusters > labels.len() {
        return Err(GraphError::ClusterCount {
            clusters: n_clusters,
            agents: labels.len(),
        });
    }
    for (agent, &label) in labels.iter().enumerate() {
        if label >= n_clusters {
            return Err(GraphError::LabelOutOfRange {
                agent,
                label,
                clusters: n_clusters,
            });
        }
    }
    let sizes = cluster_sizes(labels, n_clusters);
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(GraphError::EmptyCluster(c));
    }
    Ok(())
}

/// Undirected simple graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphSample {
    n: usize,
    adj: Vec<bool>,
}

impl GraphSample {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adj: vec![false; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// Adds edge `{i, j}`; self-loops are ignored.
    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.adj[i * self.n + j] = true;
            self.adj[j * self.n + i] = true;
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.adj[i * self.n..(i + 1) * self.n]
    }

    /// Sorted neighbor list of `m`. Panics if `m` is out of range.
    pub fn neighbors(&self, m: usize) -> Vec<usize> {
        assert!(m < self.n, "vertex {m} out of range for {} vertices", self.n);
        self.row(m)
            .iter()
            .enumerate()
            .filter_map(|(j, &e)| e.then_some(j))
            .collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count() / 2
    }

    /// Breadth-first search from vertex 0.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for (w, &e) in self.row(v).iter().enumerate() {
                if e && !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == self.n
    }

    /// Edge-wise union; both graphs must share a vertex set.
    pub fn union(&mut self, other: &GraphSample) {
        assert_eq!(self.n, other.n);
        for (a, &b) in self.adj.iter_mut().zip(&other.adj) {
            *a |= b;
        }
    }
}

/// Samples every pair `i < j` in row-major order, one uniform draw per pair.
pub fn sample_graph<R: Rng + ?Sized>(model: &BlockModel, rng: &mut R) -> GraphSample {
    let n = model.n_agents();
    let mut g = GraphSample::empty(n);
    for i in 0..n {
        let row = &model.probs[model.assignment[i]];
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < row[model.assignment[j]] {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Graph on clusters: `x ~ y` iff some agent of `x` is adjacent to some agent of `y`.
pub fn cluster_quotient(g: &GraphSample, model: &BlockModel) -> Result<GraphSample, GraphError> {
    if g.n_vertices() != model.n_agents() {
        return Err(GraphError::ModelMismatch {
            graph: g.n_vertices(),
            model: model.n_agents(),
        });
    }
    Ok(quotient_by_labels(g, model.assignment(), model.n_clusters()))
}

pub fn quotient_by_labels(g: &GraphSample, labels: &[usize], n_clusters: usize) -> GraphSample {
    let mut q = GraphSample::empty(n_clusters);
    for i in 0..g.n {
        for j in i + 1..g.n {
            if g.has_edge(i, j) {
                q.add_edge(labels[i], labels[j]);
            }
        }
    }
    q
}

/// Ordered run of graphs on one vertex set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphWindow {
    graphs: Vec<GraphSample>,
}

impl GraphWindow {
    pub fn new(graphs: Vec<GraphSample>) -> Result<Self, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptyWindow)?.n_vertices();
        if let Some(g) = graphs.iter().find(|g| g.n_vertices() != first) {
            return Err(GraphError::VertexMismatch(first, g.n_vertices()));
        }
        Ok(Self { graphs })
    }

    pub fn graphs(&self) -> &[GraphSample] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// Walk composition of the window.
///
/// `{i, j}` is an edge iff some walk `i = v0, v1, .., vl = j` (or the same
/// with `i` and `j` swapped) uses an edge of the k-th graph at step k. The
/// diagonal is cleared.
pub fn compose(window: &GraphWindow) -> GraphSample {
    compose_slice(window.graphs())
}

pub(crate) fn compose_slice(graphs: &[GraphSample]) -> GraphSample {
    let n = graphs[0].n_vertices();
    let forward = reach(graphs.iter(), n);
    let backward = reach(graphs.iter().rev(), n);
    let mut out = GraphSample::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && (forward[i * n + j] || backward[i * n + j]) {
                out.adj[i * n + j] = true;
                out.adj[j * n + i] = true;
            }
        }
    }
    out
}

// reach[i][j]: a walk from i ends at j after taking one edge from each graph in order.
fn reach<'a>(graphs: impl Iterator<Item = &'a GraphSample>, n: usize) -> Vec<bool> {
    let mut cur: Option<Vec<bool>> = None;
    for g in graphs {
        cur = Some(match cur {
            None => g.adj.clone(),
            Some(prev) => {
                let mut next = vec![false; n * n];
                for i in 0..n {
                    for v in 0..n {
                        if prev[i * n + v] {
                            let row = g.row(v);
                            for j in 0..n {
                                next[i * n + j] |= row[j];
                            }
                        }
                    }
                }
                next
            }
        });
    }
    cur.unwrap_or_default()
}

/// True iff every window of `l` consecutive graphs composes to a connected graph.
pub fn is_l_periodically_connected(seq: &[GraphSample], l: usize) -> Result<bool, GraphError> {
    if l == 0 || l > seq.len() {
        return Err(GraphError::WindowLength { l, len: seq.len() });
    }
    let n = seq[0].n_vertices();
    if let Some(g) = seq.iter().find(|g| g.n_vertices() != n) {
        return Err(GraphError::VertexMismatch(n, g.n_vertices()));
    }
    Ok(seq.windows(l).all(|w| compose_slice(w).is_connected()))
}

/// Probability that two balanced clusters share at least one edge when every
/// cross pair is an edge independently with probability `q`.
pub fn cluster_edge_probability(q: f64, n_agents: usize, n_clusters: usize) -> Result<f64, GraphError> {
    if !(0.0..=1.0).contains(&q) || q.is_nan() {
        return Err(GraphError::Probability(q));
    }
    if n_clusters == 0 || n_clusters > n_agents {
        return Err(GraphError::ClusterCount {
            clusters: n_clusters,
            agents: n_agents,
        });
    }
    if !n_agents.is_multiple_of(n_clusters) {
        return Err(GraphError::Unbalanced {
            agents: n_agents,
            clusters: n_clusters,
        });
    }
    let size = (n_agents / n_clusters) as f64;
    Ok(1.0 - (1.0 - q).powf(size * size))
}

/// Parses a `u v` edge list with `#` comments and blank lines.
pub fn load_edge_list(text: &str, n_vertices: usize) -> Result<GraphSample, EdgeListError> {
    let mut g = GraphSample::empty(n_vertices);
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(EdgeListError::Malformed(line_no));
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| EdgeListError::Malformed(line_no));
        let (u, v) = (parse(a)?, parse(b)?);
        for vertex in [u, v] {
            if vertex >= n_vertices {
                return Err(EdgeListError::OutOfRange {
                    line: line_no,
                    vertex,
                    n: n_vertices,
                });
            }
        }
        if u == v {
            return Err(EdgeListError::SelfLoop(line_no));
        }
        g.add_edge(u, v);
    }
    Ok(g)
}
