//! Cluster detection from a graph plus node covariates (IR-LSS), its spectral
//! initialisation, label matching and the recovery signal-to-noise ratio.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::GraphSample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("degenerate assignment: cluster {0} is empty")]
    DegenerateAssignment(usize),
    #[error("inestimable Sigma: p_hat = {p_hat}, q_hat = {q_hat}")]
    InestimableSigma { p_hat: f64, q_hat: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need 1 <= C <= M, got C = {clusters}, M = {agents}")]
    ClusterCount { agents: usize, clusters: usize },
    #[error("burn-in produced no graphs")]
    NoBurnIn,
    #[error("iterations must be at least 1")]
    NoIterations,
}

/// One-hot M×C membership, stored as a label per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssignmentMatrix {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl AssignmentMatrix {
    pub fn from_labels(labels: Vec<usize>, n_clusters: usize) -> Result<Self, ClusterError> {
        if let Some(&bad) = labels.iter().find(|&&c| c >= n_clusters) {
            return Err(ClusterError::Dimension(format!(
                "label {bad} out of range for {n_clusters} clusters"
            )));
        }
        Ok(Self { labels, n_clusters })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_clusters];
        for &c in &self.labels {
            s[c] += 1;
        }
        s
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.labels.len(), self.n_clusters);
        for (i, &c) in self.labels.iter().enumerate() {
            z[(i, c)] = 1.0;
        }
        z
    }

    /// Relabels columns: node in cluster `c` moves to `perm[c]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            labels: self.labels.iter().map(|&c| perm[c]).collect(),
            n_clusters: self.n_clusters,
        }
    }
}

pub fn adjacency_matrix(a: &GraphSample) -> DMatrix<f64> {
    let n = a.n_vertices();
    DMatrix::from_fn(n, n, |i, j| if a.has_edge(i, j) { 1.0 } else { 0.0 })
}

/// Covariates as an M×K matrix from row vectors.
pub fn covariate_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ClusterError> {
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        return Err(ClusterError::Dimension("ragged covariate rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEstimates {
    pub sizes: Vec<usize>,
    /// `W = Z D^{-1}`.
    pub w: DMatrix<f64>,
    /// `Π = Wᵀ A W`.
    pub pi: DMatrix<f64>,
    /// Row `n` is `μ_n = W_nᵀ V`.
    pub mu: DMatrix<f64>,
    pub p_hat: f64,
    pub q_hat: f64,
    /// Scalar `s` with `Σ_n = s·I`; `None` unless `0 < q̂ < p̂ < 1`.
    pub sigma_scale: Option<f64>,
}

fn check_shapes(a: &DMatrix<f64>, v: &DMatrix<f64>, z: &AssignmentMatrix) -> Result<(), ClusterError> {
    let m = z.n_nodes();
    if a.nrows() != m || a.ncols() != m || v.nrows() != m {
        return Err(ClusterError::Dimension(format!(
            "adjacency {}x{}, covariates {} rows, assignment {} rows",
            a.nrows(),
            a.ncols(),
            v.nrows(),
            m
        )));
    }
    Ok(())
}

/// `p̂ − q̂` at or below this is treated as no block separation.
pub const SEPARATION_TOLERANCE: f64 = 1e-9;

/// Block and covariate estimates; `sigma_scale` is left `None` when the
/// graph weight cannot be estimated.
pub fn estimate_blocks(a: &DMatrix<f64>, v: &DMatrix<f64>, z: &AssignmentMatrix) -> Result<ModelEstimates, ClusterError> {
    check_shapes(a, v, z)?;
    let sizes = z.sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::DegenerateAssignment(empty));
    }
    let c = z.n_clusters();
    let m = z.n_nodes();
    let mut w = z.to_matrix();
    for (n, &s) in sizes.iter().enumerate() {
        w.column_mut(n).scale_mut(1.0 / s as f64);
    }
    let pi = w.transpose() * a * &w;
    let mu = w.transpose() * v;
    let p_hat = (0..c).map(|n| pi[(n, n)]).sum::<f64>() / c as f64;
    let q_hat = if c > 1 {
        let off: f64 = (0..c)
            .flat_map(|n| (0..c).map(move |o| (n, o)))
            .filter(|(n, o)| n != o)
            .map(|idx| pi[idx])
            .sum();
        off / (c * (c - 1)) as f64
    } else {
        f64::NAN
    };
    let sigma_scale = if q_hat > 0.0 && p_hat - q_hat > SEPARATION_TOLERANCE && p_hat < 1.0 {
        let s = m as f64 / (c as f64 * (p_hat - q_hat))
            * (p_hat * (1.0 - q_hat) / (q_hat * (1.0 - p_hat))).ln();
        s.is_finite().then_some(s)
    } else {
        None
    };
    Ok(ModelEstimates {
        sizes,
        w,
        pi,
        mu,
        p_hat,
        q_hat,
        sigma_scale,
    })
}

/// Estimates requiring a finite graph weight.
pub fn estimate_parameters(a: &DMatrix<f64>, v: &DMatrix<f64>, z: &AssignmentMatrix) -> Result<ModelEstimates, ClusterError> {
    let est = estimate_blocks(a, v, z)?;
    if est.sigma_scale.is_none() {
        return Err(ClusterError::InestimableSigma {
            p_hat: est.p_hat,
            q_hat: est.q_hat,
        });
    }
    Ok(est)
}

/// `s·‖A_i W − Π_n‖² + ‖μ_n − V_i‖²/σ²` for all nodes and clusters.
fn criterion(a: &DMatrix<f64>, v: &DMatrix<f64>, est: &ModelEstimates, graph_weight: f64, sigma2: f64) -> DMatrix<f64> {
    let aw = a * &est.w;
    let m = a.nrows();
    let c = est.sizes.len();
    DMatrix::from_fn(m, c, |i, n| {
        let graph = if graph_weight == 0.0 {
            0.0
        } else {
            (aw.row(i) - est.pi.row(n)).norm_squared() * graph_weight
        };
        graph + (est.mu.row(n) - v.row(i)).norm_squared() / sigma2
    })
}

/// Refinement with an explicit graph weight, `0` giving nearest-mean
/// classification. Empty clusters are refilled from the largest cluster by
/// its member with the worst criterion value.
pub fn refine_with_weight(
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    est: &ModelEstimates,
    graph_weight: f64,
    sigma2: f64,
) -> AssignmentMatrix {
    let crit = criterion(a, v, est, graph_weight, sigma2);
    let c = est.sizes.len();
    let mut labels: Vec<usize> = (0..crit.nrows())
        .map(|i| {
            let mut best = 0;
            for n in 1..c {
                if crit[(i, n)] < crit[(i, best)] {
                    best = n;
                }
            }
            best
        })
        .collect();
    repair_empty(&mut labels, c, |i, n| crit[(i, n)]);
    AssignmentMatrix { labels, n_clusters: c }
}

/// Refinement using the estimated graph weight (`Σ` must be finite).
pub fn refine_assignment(a: &DMatrix<f64>, v: &DMatrix<f64>, est: &ModelEstimates, sigma2: f64) -> AssignmentMatrix {
    let s = est
        .sigma_scale
        .expect("refine_assignment needs a finite graph weight");
    refine_with_weight(a, v, est, s, sigma2)
}

/// Moves, for each empty cluster, the member of the largest cluster with the
/// largest `cost(i, label)` into it.
fn repair_empty(labels: &mut [usize], c: usize, cost: impl Fn(usize, usize) -> f64) {
    if labels.len() < c {
        return;
    }
    loop {
        let mut sizes = vec![0usize; c];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut largest = 0;
        for n in 1..c {
            if sizes[n] > sizes[largest] {
                largest = n;
            }
        }
        let mut pick = None::<usize>;
        for i in (0..labels.len()).filter(|&i| labels[i] == largest) {
            if pick.is_none_or(|p| cost(i, largest) > cost(p, largest)) {
                pick = Some(i);
            }
        }
        labels[pick.expect("largest cluster is nonempty")] = empty;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IrLssStatus {
    /// Reached a fixed point.
    Converged,
    /// Ran all iterations without a fixed point.
    MaxIterations,
    /// An estimate failed; the last valid assignment is returned.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrLssOutput {
    pub assignment: AssignmentMatrix,
    pub status: IrLssStatus,
    pub iterations: usize,
    /// Iterations that dropped the graph term because `Σ` was inestimable.
    pub covariate_only_steps: usize,
}

/// Alternates estimation and refinement for at most `iters` rounds.
pub fn ir_lss(
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    sigma2: f64,
    z0: &AssignmentMatrix,
    iters: usize,
) -> Result<IrLssOutput, ClusterError> {
    if iters == 0 {
        return Err(ClusterError::NoIterations);
    }
    check_shapes(a, v, z0)?;
    let mut z = z0.clone();
    let mut covariate_only_steps = 0;
    for it in 0..iters {
        let est = match estimate_blocks(a, v, &z) {
            Ok(e) => e,
            Err(_) => {
                return Ok(IrLssOutput {
                    assignment: z,
                    status: IrLssStatus::Aborted,
                    iterations: it,
                    covariate_only_steps,
                })
            }
        };
        let weight = est.sigma_scale.unwrap_or_else(|| {
            covariate_only_steps += 1;
            0.0
        });
        let next = refine_with_weight(a, v, &est, weight, sigma2);
        if next == z {
            return Ok(IrLssOutput {
                assignment: z,
                status: IrLssStatus::Converged,
                iterations: it + 1,
                covariate_only_steps,
            });
        }
        z = next;
    }
    Ok(IrLssOutput {
        assignment: z,
        status: IrLssStatus::MaxIterations,
        iterations: iters,
        covariate_only_steps,
    })
}

const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITERS: usize = 100;

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// k-means++ seeded Lloyd iterations; best of [`KMEANS_RESTARTS`] by inertia.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], c: usize, rng: &mut R) -> Vec<usize> {
    let m = points.len();
    if c <= 1 || m == 0 {
        return vec![0; m];
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..m)].clone()];
        while centers.len() < c {
            let d: Vec<f64> = points
                .iter()
                .map(|p| centers.iter().map(|q| sq_dist(p, q)).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = d.iter().sum();
            let idx = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut pick = m - 1;
                for (i, &di) in d.iter().enumerate() {
                    if u < di {
                        pick = i;
                        break;
                    }
                    u -= di;
                }
                pick
            } else {
                rng.random_range(0..m)
            };
            centers.push(points[idx].clone());
        }
        let mut labels = vec![usize::MAX; m];
        for _ in 0..KMEANS_MAX_ITERS {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let mut b = 0;
                let mut bd = f64::INFINITY;
                for (n, q) in centers.iter().enumerate() {
                    let dd = sq_dist(p, q);
                    if dd < bd {
                        bd = dd;
                        b = n;
                    }
                }
                if labels[i] != b {
                    labels[i] = b;
                    changed = true;
                }
            }
            repair_empty(&mut labels, c, |i, n| sq_dist(&points[i], &centers[n]));
            for (n, center) in centers.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = (0..m).filter(|&i| labels[i] == n).map(|i| &points[i]).collect();
                if members.is_empty() {
                    continue;
                }
                for (d, x) in center.iter_mut().enumerate() {
                    *x = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = (0..m).map(|i| sq_dist(&points[i], &centers[labels[i]])).sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.expect("at least one restart").1
}

/// Spectral initialisation: k-means on the top-C adjacency eigenvectors
/// next to the covariates, every column standardised to unit variance
/// (constant columns are dropped).
pub fn initialize_assignment<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    c: usize,
    rng: &mut R,
) -> Result<AssignmentMatrix, ClusterError> {
    let m = a.nrows();
    if c == 0 || c > m {
        return Err(ClusterError::ClusterCount { agents: m, clusters: c });
    }
    if v.nrows() != m || a.ncols() != m {
        return Err(ClusterError::Dimension("adjacency and covariates disagree".into()));
    }
    if c == 1 {
        return AssignmentMatrix::from_labels(vec![0; m], 1);
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let mut columns: Vec<Vec<f64>> = order[..c]
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
        .collect();
    columns.extend((0..v.ncols()).map(|j| v.column(j).iter().copied().collect()));
    let columns: Vec<Vec<f64>> = columns
        .into_iter()
        .filter_map(|col| {
            let mean = col.iter().sum::<f64>() / m as f64;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
            (var > 1e-24).then(|| col.iter().map(|x| (x - mean) / var.sqrt()).collect())
        })
        .collect();
    let points: Vec<Vec<f64>> = (0..m).map(|i| columns.iter().map(|col| col[i]).collect()).collect();
    let labels = kmeans(&points, c, rng);
    AssignmentMatrix::from_labels(labels, c)
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method).
/// Returns `assign[row] = column`.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return vec![];
    }
    let max = weights.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    // Minimise cost = max - weight, 1-based potentials.
    let cost = |i: usize, j: usize| max - weights[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// Fraction of nodes whose relabelled detected label equals the truth.
    pub accuracy: f64,
    /// `perm[detected] = true` label.
    pub permutation: Vec<usize>,
}

/// Best relabelling of `detected` onto `truth` by maximum overlap.
pub fn match_labels(detected: &[usize], truth: &[usize], c: usize) -> Result<MatchResult, ClusterError> {
    if detected.len() != truth.len() {
        return Err(ClusterError::Dimension(format!(
            "{} detected labels vs {} true labels",
            detected.len(),
            truth.len()
        )));
    }
    if detected.iter().chain(truth).any(|&l| l >= c) {
        return Err(ClusterError::Dimension(format!("label out of range for {c} clusters")));
    }
    let mut overlap = vec![vec![0.0; c]; c];
    for (&d, &t) in detected.iter().zip(truth) {
        overlap[d][t] += 1.0;
    }
    let permutation = max_weight_matching(&overlap);
    let hits = detected
        .iter()
        .zip(truth)
        .filter(|(&d, &t)| permutation[d] == t)
        .count();
    Ok(MatchResult {
        accuracy: if truth.is_empty() { 1.0 } else { hits as f64 / truth.len() as f64 },
        permutation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SnrVariant {
    /// `min‖Δμ‖²/(8σ²) + (log M / C)(√p′ − √q′)²`.
    Base,
    /// `C log T/(8Mσ²)·min‖Δμ‖² + K log T log M/M·(√p′ − √q′)²`.
    BurnInMain { log_t: f64 },
    /// `log T/(8Kσ²)·min‖Δμ‖² + log M log T/C·(√p′ − √q′)²`.
    BurnInAppendix { log_t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrParams {
    pub n_agents: usize,
    pub n_clusters: usize,
    pub n_arms: usize,
    pub sigma: f64,
    pub cluster_means: Vec<Vec<f64>>,
    /// `p = p′ log M / M`.
    pub p_prime: f64,
    pub q_prime: f64,
    pub variant: SnrVariant,
    /// Constant in the gate `C³ ≤ SNR·δ`.
    pub delta: f64,
}

impl SnrParams {
    /// Rescales edge probabilities into `p′, q′`.
    pub fn prime_from_probability(p: f64, n_agents: usize) -> f64 {
        p * n_agents as f64 / (n_agents as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrReport {
    pub snr: f64,
    /// `SNR > 2 log M`.
    pub exceeds_log_gate: bool,
    /// `C³ ≤ SNR·δ`.
    pub meets_cluster_gate: bool,
}

impl SnrReport {
    pub fn recovery_guaranteed(&self) -> bool {
        self.exceeds_log_gate && self.meets_cluster_gate
    }
}

pub fn compute_snr(params: &SnrParams) -> SnrReport {
    let c = params.n_clusters as f64;
    let m = params.n_agents as f64;
    let k = params.n_arms as f64;
    let s2 = params.sigma * params.sigma;
    let mut min_sep = f64::INFINITY;
    for (a, ra) in params.cluster_means.iter().enumerate() {
        for rb in &params.cluster_means[a + 1..] {
            min_sep = min_sep.min(sq_dist(ra, rb));
        }
    }
    if !min_sep.is_finite() {
        min_sep = 0.0;
    }
    let graph = (params.p_prime.sqrt() - params.q_prime.sqrt()).powi(2);
    let ln_m = m.ln();
    let snr = match params.variant {
        SnrVariant::Base => min_sep / (8.0 * s2) + ln_m / c * graph,
        SnrVariant::BurnInMain { log_t } => c * log_t / (8.0 * m * s2) * min_sep + k * log_t * ln_m / m * graph,
        SnrVariant::BurnInAppendix { log_t } => log_t / (8.0 * k * s2) * min_sep + ln_m * log_t / c * graph,
    };
    SnrReport {
        snr,
        exceeds_log_gate: snr > 2.0 * ln_m,
        meets_cluster_gate: c.powi(3) <= snr * params.delta,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionOutput {
    pub assignment: AssignmentMatrix,
    pub initial: AssignmentMatrix,
    pub status: IrLssStatus,
    pub iterations: usize,
    pub covariate_only_steps: usize,
}

/// Detection run on a graph and covariates: spectral initialisation followed
/// by IR-LSS.
pub fn detect_clusters<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    c: usize,
    sigma2: f64,
    iters: usize,
    rng: &mut R,
) -> Result<DetectionOutput, ClusterError> {
    let initial = initialize_assignment(a, v, c, rng)?;
    let out = ir_lss(a, v, sigma2, &initial, iters)?;
    Ok(DetectionOutput {
        assignment: out.assignment,
        initial,
        status: out.status,
        iterations: out.iterations,
        covariate_only_steps: out.covariate_only_steps,
    })
}

/// Detection from burn-in output: `A` has an edge wherever some burn-in
/// graph had one and `V` holds the agents' local means.
pub fn detect_clusters_from_burnin<R: Rng + ?Sized>(
    graphs: &[GraphSample],
    bar_mu: &[Vec<f64>],
    c: usize,
    sigma2: f64,
    iters: usize,
    rng: &mut R,
) -> Result<DetectionOutput, ClusterError> {
    let first = graphs.first().ok_or(ClusterError::NoBurnIn)?;
    let mut union = first.clone();
    for g in &graphs[1..] {
        union.union(g);
    }
    if bar_mu.len() != union.n_vertices() {
        return Err(ClusterError::Dimension(format!(
            "{} covariate rows for {} agents",
            bar_mu.len(),
            union.n_vertices()
        )));
    }
    let a = adjacency_matrix(&union);
    let v = covariate_matrix(bar_mu)?;
    detect_clusters(&a, &v, c, sigma2, iters, rng)
}
