//! Brute-force oracles and instance generators shared by integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sbm_bandit::clustering::{adjacency_matrix, covariate_matrix, detect_clusters, match_labels};
use sbm_bandit::graph::{sample_graph, BlockModel, GraphSample};
use sbm_bandit::rng::{substream, Stream};

pub fn random_graph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> GraphSample {
    let mut g = GraphSample::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Walk from `i` to `j` taking one edge of `graphs[k]` at step `k`.
pub fn walk_exists(graphs: &[GraphSample], i: usize, j: usize) -> bool {
    let n = graphs[0].n_vertices();
    let l = graphs.len();
    let mut path = vec![0usize; l.saturating_sub(1)];
    loop {
        let mut ok = true;
        let mut prev = i;
        for (k, g) in graphs.iter().enumerate() {
            let next = if k + 1 == l { j } else { path[k] };
            if !g.has_edge(prev, next) {
                ok = false;
                break;
            }
            prev = next;
        }
        if ok {
            return true;
        }
        // Odometer over the intermediate vertices.
        let mut pos = 0;
        loop {
            if pos == path.len() {
                return false;
            }
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

pub fn brute_compose(graphs: &[GraphSample]) -> GraphSample {
    let n = graphs[0].n_vertices();
    let mut out = GraphSample::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if walk_exists(graphs, i, j) || walk_exists(graphs, j, i) {
                out.add_edge(i, j);
            }
        }
    }
    out
}

pub fn bfs_connected(g: &GraphSample) -> bool {
    let n = g.n_vertices();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if g.has_edge(v, u) && !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// One contextual SBM draw with cluster means `(sep / √2) e_c`, so every
/// pair of means is `sep` apart. Returns the recovered fraction of agents.
pub fn recovery(m: usize, c: usize, p: f64, q: f64, k: usize, sep: f64, sigma: f64, seed: u64) -> f64 {
    let bm = BlockModel::two_level(m, c, p, q).unwrap();
    let mut g_rng = substream(seed, Stream::Graph);
    let g = sample_graph(&bm, &mut g_rng);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut r_rng = substream(seed, Stream::Reward);
    let rows: Vec<Vec<f64>> = bm
        .assignment()
        .iter()
        .map(|&cl| {
            (0..k)
                .map(|i| if i == cl { sep / 2f64.sqrt() } else { 0.0 } + noise.sample(&mut r_rng))
                .collect()
        })
        .collect();
    let a = adjacency_matrix(&g);
    let v = covariate_matrix(&rows).unwrap();
    let mut d_rng = substream(seed, Stream::Detection);
    let out = detect_clusters(&a, &v, c, sigma * sigma, 10, &mut d_rng).unwrap();
    match_labels(out.assignment.labels(), bm.assignment(), c).unwrap().accuracy
}
