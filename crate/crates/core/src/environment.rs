//! Rewards, global optimum and regret accounting.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::graph::BlockModel;

/// Two global means closer than this are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("reward model needs at least one arm")]
    NoArms,
    #[error("cluster mean row {row} has {got} arms, expected {expected}")]
    RowLength { row: usize, got: usize, expected: usize },
    #[error("cluster mean ({cluster},{arm}) = {value} is outside [0, 1]")]
    MeanRange { cluster: usize, arm: usize, value: f64 },
    #[error("noise scale sigma = {0} must be finite and nonnegative")]
    Sigma(f64),
    #[error("reward model has {rewards} cluster rows but the block model has {clusters} clusters")]
    ClusterMismatch { rewards: usize, clusters: usize },
    #[error("non-unique optimum: arms {0} and {1} tie")]
    NonUniqueOptimum(usize, usize),
    #[error("synthetic rewards: {0}")]
    Synthetic(String),
    #[error("heterogeneity needs 1 <= C <= M, got C = {clusters}, M = {agents}")]
    Heterogeneity { agents: usize, clusters: usize },
    #[error("count matrix is {rows}x{cols}, expected {m}x{k}")]
    CountShape { rows: usize, cols: usize, m: usize, k: usize },
}

/// Per-cluster arm means with shared Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardModel {
    n_arms: usize,
    cluster_means: Vec<Vec<f64>>,
    sigma: f64,
}

impl RewardModel {
    pub fn new(cluster_means: Vec<Vec<f64>>, sigma: f64) -> Result<Self, EnvError> {
        let n_arms = cluster_means.first().map_or(0, Vec::len);
        if n_arms == 0 {
            return Err(EnvError::NoArms);
        }
        for (row, means) in cluster_means.iter().enumerate() {
            if means.len() != n_arms {
                return Err(EnvError::RowLength {
                    row,
                    got: means.len(),
                    expected: n_arms,
                });
            }
            for (arm, &value) in means.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) || value.is_nan() {
                    return Err(EnvError::MeanRange {
                        cluster: row,
                        arm,
                        value,
                    });
                }
            }
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(EnvError::Sigma(sigma));
        }
        Ok(Self {
            n_arms,
            cluster_means,
            sigma,
        })
    }

    /// Seeded synthetic instance.
    ///
    /// The cluster-averaged profile has a unique best arm that beats the
    /// runner-up by `gap_min`; the remaining arms are spread evenly down to
    /// 0.1. Each cluster adds a zero-sum (across clusters) perturbation of
    /// amplitude at most `2 * spread`, and the arm order is shuffled.
    pub fn synthetic(
        n_clusters: usize,
        n_arms: usize,
        sigma: f64,
        gap_min: f64,
        spread: f64,
        seed: u64,
    ) -> Result<Self, EnvError> {
        const TOP: f64 = 0.9;
        const FLOOR: f64 = 0.1;
        if n_arms == 0 {
            return Err(EnvError::NoArms);
        }
        if !(gap_min > 0.0 && gap_min <= TOP - FLOOR) {
            return Err(EnvError::Synthetic(format!(
                "gap_min = {gap_min} must be in (0, {}]",
                TOP - FLOOR
            )));
        }
        if !(0.0..=0.05).contains(&spread) {
            return Err(EnvError::Synthetic(format!("spread = {spread} must be in [0, 0.05]")));
        }
        let mut profile = vec![TOP];
        if n_arms >= 2 {
            let second = TOP - gap_min;
            let step = if n_arms > 2 {
                (second - FLOOR) / (n_arms - 2) as f64
            } else {
                0.0
            };
            profile.extend((0..n_arms - 1).map(|k| second - k as f64 * step));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise: Vec<Vec<f64>> = (0..n_clusters)
            .map(|_| (0..n_arms).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        for k in 0..n_arms {
            let mean = noise.iter().map(|row| row[k]).sum::<f64>() / n_clusters as f64;
            for row in &mut noise {
                row[k] = (row[k] - mean) * spread;
            }
        }
        let mut order: Vec<usize> = (0..n_arms).collect();
        order.shuffle(&mut rng);
        let means = noise
            .iter()
            .map(|row| {
                order
                    .iter()
                    .map(|&k| (profile[k] + row[k]).clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        Self::new(means, sigma)
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_means.len()
    }

    pub fn cluster_means(&self) -> &[Vec<f64>] {
        &self.cluster_means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn check_against(&self, bm: &BlockModel) -> Result<(), EnvError> {
        if self.n_clusters() != bm.n_clusters() {
            return Err(EnvError::ClusterMismatch {
                rewards: self.n_clusters(),
                clusters: bm.n_clusters(),
            });
        }
        Ok(())
    }
}

pub fn agent_mean(model: &RewardModel, bm: &BlockModel, m: usize, k: usize) -> f64 {
    model.cluster_means[bm.cluster_of(m)][k]
}

/// One Gaussian draw around the agent's mean.
pub fn sample_reward<R: Rng + ?Sized>(
    model: &RewardModel,
    bm: &BlockModel,
    m: usize,
    k: usize,
    rng: &mut R,
) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    agent_mean(model, bm, m, k) + model.sigma * z
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalStats {
    pub global_means: Vec<f64>,
    pub optimal_arm: usize,
    pub gaps: Vec<f64>,
}

impl GlobalStats {
    pub fn min_gap(&self) -> f64 {
        self.gaps
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != self.optimal_arm)
            .map(|(_, &g)| g)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn global_stats(model: &RewardModel, bm: &BlockModel) -> Result<GlobalStats, EnvError> {
    model.check_against(bm)?;
    let m = bm.n_agents() as f64;
    let sums: Vec<f64> = (0..model.n_arms)
        .map(|k| (0..bm.n_agents()).map(|i| agent_mean(model, bm, i, k)).sum())
        .collect();
    let mut best = 0;
    for k in 1..sums.len() {
        if sums[k] > sums[best] {
            best = k;
        }
    }
    for k in 0..sums.len() {
        if k != best && (sums[best] - sums[k]) / m <= TIE_TOLERANCE {
            return Err(EnvError::NonUniqueOptimum(best.min(k), best.max(k)));
        }
    }
    Ok(GlobalStats {
        global_means: sums.iter().map(|s| s / m).collect(),
        optimal_arm: best,
        gaps: sums.iter().map(|s| (sums[best] - s) / m).collect(),
    })
}

/// Pull counts `n_{i,k}` for every agent and arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PullCounts {
    pub counts: Vec<Vec<u64>>,
}

impl PullCounts {
    pub fn zeros(n_agents: usize, n_arms: usize) -> Self {
        Self {
            counts: vec![vec![0; n_arms]; n_agents],
        }
    }

    pub fn record(&mut self, agent: usize, arm: usize) {
        self.counts[agent][arm] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Average regret `R = (1/M) sum_k sum_i gap_k n_{i,k}`.
pub fn cumulative_regret(counts: &PullCounts, stats: &GlobalStats) -> Result<f64, EnvError> {
    Ok(total_regret(counts, stats)? / counts.counts.len() as f64)
}

/// Total regret `M * R`.
pub fn total_regret(counts: &PullCounts, stats: &GlobalStats) -> Result<f64, EnvError> {
    let k = stats.gaps.len();
    let m = counts.counts.len();
    if let Some(row) = counts.counts.iter().find(|r| r.len() != k) {
        return Err(EnvError::CountShape {
            rows: m,
            cols: row.len(),
            m,
            k,
        });
    }
    Ok(counts
        .counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&stats.gaps)
                .map(|(&n, &g)| n as f64 * g)
                .sum::<f64>()
        })
        .sum())
}

/// Degree of heterogeneity `C / M`.
pub fn heterogeneity_degree(n_agents: usize, n_clusters: usize) -> Result<f64, EnvError> {
    if n_clusters == 0 || n_clusters > n_agents {
        return Err(EnvError::Heterogeneity {
            agents: n_agents,
            clusters: n_clusters,
        });
    }
    Ok(n_clusters as f64 / n_agents as f64)
}
