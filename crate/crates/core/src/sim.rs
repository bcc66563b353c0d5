//! Episode orchestration, seeded batches and connectivity monitoring.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{detect_clusters_from_burnin, match_labels, IrLssStatus};
use crate::environment::{global_stats, sample_reward, EnvError, GlobalStats, PullCounts, RewardModel};
use crate::graph::{compose_slice, quotient_by_labels, sample_graph, BlockModel, GraphSample};
use crate::policy::{
    burnin_finalize, burnin_step, cluster_estimates, homo_merge, homo_select_arm, local_ucb_step, rule1_update,
    rule2_update, sbm_select_arm, ForcedExploration, HomoAgentState, HomoPayload, LocalUcbState, MessagePayload,
    SbmAgentState, Scope,
};
use crate::rng::{run_seed, substream, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    HomoUcb,
    LocalUcb,
    Rule1,
    Rule2Known,
    Rule2Detected,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::HomoUcb => "homo_ucb",
            Algorithm::LocalUcb => "local_ucb",
            Algorithm::Rule1 => "rule1",
            Algorithm::Rule2Known => "rule2_known",
            Algorithm::Rule2Detected => "rule2_detected",
        }
    }

    /// Uses the burn-in and learning periods.
    pub fn uses_burn_in(self) -> bool {
        matches!(self, Algorithm::Rule1 | Algorithm::Rule2Known | Algorithm::Rule2Detected)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    /// A fresh block-model sample every round.
    Sampled,
    /// The same graph every round.
    Static(GraphSample),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Covariate noise; defaults to `σ²K/L`, the variance of a burn-in mean.
    pub sigma2: Option<f64>,
    pub iters: usize,
    /// Seed of the initialisation stream; defaults to the episode seed.
    pub seed: Option<u64>,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            sigma2: None,
            iters: 10,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub block_model: BlockModel,
    pub graph_source: GraphSource,
    pub rewards: RewardModel,
    pub horizon: u64,
    pub burn_in: u64,
    pub algorithm: Algorithm,
    pub c1: f64,
    pub tau: u64,
    pub forced: ForcedExploration,
    /// Extra round-robin rounds after detection.
    pub propagation_rounds: u64,
    pub detection: DetectionParams,
    /// Window length of the periodic-connectivity event.
    pub event_window: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("burn-in L = {burn_in} must be at least K = {arms}")]
    BurnInTooShort { burn_in: u64, arms: usize },
    #[error("burn-in L = {burn_in} exceeds horizon T = {horizon}")]
    BurnInTooLong { burn_in: u64, horizon: u64 },
    #[error("horizon T must be positive")]
    ZeroHorizon,
    #[error("tau must be positive")]
    ZeroTau,
    #[error("event window must be positive")]
    ZeroWindow,
    #[error("static graph has {got} vertices, expected {expected}")]
    StaticGraphSize { got: usize, expected: usize },
    #[error("C1 = {0} must be finite and nonnegative")]
    C1(f64),
    #[error("seed list contains {0} twice")]
    DuplicateSeed(u64),
}

impl ExperimentConfig {
    /// Config with `C1 = 2σ²`, `τ = 1`, `M` propagation rounds and default
    /// detection settings.
    pub fn new(block_model: BlockModel, rewards: RewardModel, horizon: u64, burn_in: u64, algorithm: Algorithm) -> Self {
        let c1 = 2.0 * rewards.sigma() * rewards.sigma();
        let m = block_model.n_agents() as u64;
        Self {
            block_model,
            graph_source: GraphSource::Sampled,
            rewards,
            horizon,
            burn_in,
            algorithm,
            c1,
            tau: 1,
            forced: ForcedExploration::default(),
            propagation_rounds: m,
            detection: DetectionParams::default(),
            event_window: 1,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.block_model.n_agents()
    }

    pub fn n_arms(&self) -> usize {
        self.rewards.n_arms()
    }

    pub fn validate(&self) -> Result<GlobalStats, SimError> {
        let stats = global_stats(&self.rewards, &self.block_model)?;
        if self.horizon == 0 {
            return Err(SimError::ZeroHorizon);
        }
        if self.tau == 0 {
            return Err(SimError::ZeroTau);
        }
        if self.event_window == 0 {
            return Err(SimError::ZeroWindow);
        }
        if !(self.c1.is_finite() && self.c1 >= 0.0) {
            return Err(SimError::C1(self.c1));
        }
        if let GraphSource::Static(g) = &self.graph_source {
            if g.n_vertices() != self.n_agents() {
                return Err(SimError::StaticGraphSize {
                    got: g.n_vertices(),
                    expected: self.n_agents(),
                });
            }
        }
        if self.algorithm.uses_burn_in() {
            if self.burn_in < self.n_arms() as u64 {
                return Err(SimError::BurnInTooShort {
                    burn_in: self.burn_in,
                    arms: self.n_arms(),
                });
            }
            if self.burn_in > self.horizon {
                return Err(SimError::BurnInTooLong {
                    burn_in: self.burn_in,
                    horizon: self.horizon,
                });
            }
        }
        Ok(stats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BurnIn,
    Propagation,
    Learning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundEvents {
    pub graph_connected: bool,
    pub quotient_connected: bool,
    /// Composition of the last `event_window` cluster graphs is connected;
    /// `None` until the window is full.
    pub window_connected: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSummary {
    pub status: IrLssStatus,
    pub iterations: usize,
    pub covariate_only_steps: usize,
    /// Overlap with the true labels after the best relabelling.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Cumulative average regret after each round.
    pub regret_trace: Vec<f64>,
    /// `M · R_T`.
    pub total_regret: f64,
    pub counts: PullCounts,
    pub events: Vec<RoundEvents>,
    pub detected_assignment: Option<Vec<usize>>,
    pub detection: Option<DetectionSummary>,
    /// Per-agent global estimators at the end, for the UCB-SBM rules.
    pub final_tilde_mu: Option<Vec<Vec<f64>>>,
}

enum Agents {
    Homo(Vec<HomoAgentState>),
    Local(Vec<LocalUcbState>),
    Sbm(Vec<SbmAgentState>),
}

/// One round as seen by an observer.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub phase: Phase,
    pub arms: Vec<usize>,
    pub graph: GraphSample,
}

/// Round-by-round executor of one seeded episode.
pub struct Episode {
    cfg: ExperimentConfig,
    stats: GlobalStats,
    seed: u64,
    graph_rng: SimRng,
    reward_rng: SimRng,
    alg_rng: SimRng,
    agents: Agents,
    labels: Arc<[usize]>,
    n_clusters: usize,
    t: u64,
    learning_start: u64,
    burnin_graphs: Vec<GraphSample>,
    quotient_window: VecDeque<GraphSample>,
    counts: PullCounts,
    regret: f64,
    trace: Vec<f64>,
    events: Vec<RoundEvents>,
    detected: Option<Vec<usize>>,
    detection: Option<DetectionSummary>,
}

impl Episode {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self, SimError> {
        let stats = cfg.validate()?;
        let m = cfg.n_agents();
        let k = cfg.n_arms();
        let c = cfg.block_model.n_clusters();
        let labels: Arc<[usize]> = cfg.block_model.assignment().into();
        let agents = match cfg.algorithm {
            Algorithm::HomoUcb => Agents::Homo((0..m).map(|i| HomoAgentState::new(i, m, k)).collect()),
            Algorithm::LocalUcb => Agents::Local((0..m).map(|_| LocalUcbState::new(k)).collect()),
            Algorithm::Rule1 | Algorithm::Rule2Detected => {
                Agents::Sbm((0..m).map(|i| SbmAgentState::new(i, m, k, Scope::Agent)).collect())
            }
            Algorithm::Rule2Known => Agents::Sbm(
                (0..m)
                    .map(|i| {
                        SbmAgentState::new(
                            i,
                            m,
                            k,
                            Scope::Cluster {
                                labels: Arc::clone(&labels),
                                n_clusters: c,
                            },
                        )
                    })
                    .collect(),
            ),
        };
        let learning_start = match cfg.algorithm {
            Algorithm::HomoUcb | Algorithm::LocalUcb => 1,
            Algorithm::Rule1 | Algorithm::Rule2Known => cfg.burn_in + 1,
            Algorithm::Rule2Detected => cfg.burn_in + cfg.propagation_rounds + 1,
        };
        Ok(Self {
            cfg: cfg.clone(),
            stats,
            seed,
            graph_rng: substream(seed, Stream::Graph),
            reward_rng: substream(seed, Stream::Reward),
            alg_rng: substream(seed, Stream::Algorithm),
            agents,
            labels,
            n_clusters: c,
            t: 0,
            learning_start,
            burnin_graphs: vec![],
            quotient_window: VecDeque::new(),
            counts: PullCounts::zeros(m, k),
            regret: 0.0,
            trace: Vec::with_capacity(cfg.horizon as usize),
            events: Vec::with_capacity(cfg.horizon as usize),
            detected: None,
            detection: None,
        })
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.cfg.horizon
    }

    pub fn stats(&self) -> &GlobalStats {
        &self.stats
    }

    pub fn counts(&self) -> &PullCounts {
        &self.counts
    }

    pub fn regret(&self) -> f64 {
        self.regret
    }

    /// UCB-SBM agent states; `None` for the baselines.
    pub fn sbm_states(&self) -> Option<&[SbmAgentState]> {
        match &self.agents {
            Agents::Sbm(s) => Some(s),
            _ => None,
        }
    }

    pub fn detected_assignment(&self) -> Option<&[usize]> {
        self.detected.as_deref()
    }

    fn phase(&self, t: u64) -> Phase {
        if t >= self.learning_start {
            Phase::Learning
        } else if t <= self.cfg.burn_in {
            Phase::BurnIn
        } else {
            Phase::Propagation
        }
    }

    fn next_graph(&mut self) -> GraphSample {
        match &self.cfg.graph_source {
            GraphSource::Sampled => sample_graph(&self.cfg.block_model, &mut self.graph_rng),
            GraphSource::Static(g) => g.clone(),
        }
    }

    fn reward(&mut self, m: usize, k: usize) -> f64 {
        sample_reward(&self.cfg.rewards, &self.cfg.block_model, m, k, &mut self.reward_rng)
    }

    /// Executes one round; `None` once the horizon is reached.
    pub fn step(&mut self) -> Option<RoundRecord> {
        if self.is_done() {
            return None;
        }
        self.t += 1;
        let t = self.t;
        let phase = self.phase(t);
        let m = self.cfg.n_agents();
        let k = self.cfg.n_arms();

        let arms: Vec<usize> = match (&self.agents, phase) {
            (Agents::Homo(s), _) => s.iter().map(|a| homo_select_arm(a, t)).collect(),
            (Agents::Local(s), _) => s.iter().map(|a| local_ucb_step(a, t)).collect(),
            (Agents::Sbm(_), Phase::BurnIn | Phase::Propagation) => vec![crate::policy::round_robin_arm(t, k); m],
            (Agents::Sbm(s), Phase::Learning) => {
                let mut out = Vec::with_capacity(m);
                for a in s {
                    out.push(sbm_select_arm(a, t, self.cfg.c1, self.cfg.forced, &mut self.alg_rng));
                }
                out
            }
        };
        let rewards: Vec<f64> = (0..m).map(|i| self.reward(i, arms[i])).collect();
        let graph = self.next_graph();
        let quotient = quotient_by_labels(&graph, &self.labels, self.n_clusters);

        match &mut self.agents {
            Agents::Homo(states) => {
                for (s, (&a, &r)) in states.iter_mut().zip(arms.iter().zip(&rewards)) {
                    s.observe(a, r);
                }
                let payloads: Vec<HomoPayload> = states.iter().map(|s| s.payload(t)).collect();
                for (i, s) in states.iter_mut().enumerate() {
                    let inbox: Vec<HomoPayload> = graph.neighbors(i).into_iter().map(|j| payloads[j].clone()).collect();
                    homo_merge(s, &inbox, t);
                }
            }
            Agents::Local(states) => {
                for (s, (&a, &r)) in states.iter_mut().zip(arms.iter().zip(&rewards)) {
                    s.observe(a, r);
                }
            }
            Agents::Sbm(_) => self.sbm_round(t, phase, &arms, &rewards, &graph),
        }

        for (i, &a) in arms.iter().enumerate() {
            self.counts.record(i, a);
            self.regret += self.stats.gaps[a] / m as f64;
        }
        self.trace.push(self.regret);

        self.quotient_window.push_back(quotient.clone());
        if self.quotient_window.len() > self.cfg.event_window {
            self.quotient_window.pop_front();
        }
        let window_connected = (self.quotient_window.len() == self.cfg.event_window).then(|| {
            let w: Vec<GraphSample> = self.quotient_window.iter().cloned().collect();
            compose_slice(&w).is_connected()
        });
        self.events.push(RoundEvents {
            graph_connected: graph.is_connected(),
            quotient_connected: quotient.is_connected(),
            window_connected,
        });

        Some(RoundRecord { t, phase, arms, graph })
    }

    fn contact_rows(&self, states: &[SbmAgentState], graph: &GraphSample) -> Vec<Vec<bool>> {
        states
            .iter()
            .map(|s| match s.scope() {
                Scope::Agent => graph.row(s.m).to_vec(),
                Scope::Cluster { labels, n_clusters } => {
                    let mut row = vec![false; *n_clusters];
                    for j in graph.neighbors(s.m) {
                        row[labels[j]] = true;
                    }
                    row
                }
            })
            .collect()
    }

    fn sbm_round(&mut self, t: u64, phase: Phase, arms: &[usize], rewards: &[f64], graph: &GraphSample) {
        let Agents::Sbm(mut states) = std::mem::replace(&mut self.agents, Agents::Local(vec![])) else {
            unreachable!()
        };
        let m = states.len();
        let rows = self.contact_rows(&states, graph);
        let neighbors: Vec<Vec<usize>> = (0..m).map(|i| graph.neighbors(i)).collect();
        let inbox_of = |payloads: &[Arc<MessagePayload>], i: usize| -> Vec<Arc<MessagePayload>> {
            neighbors[i].iter().map(|&j| Arc::clone(&payloads[j])).collect()
        };

        match phase {
            Phase::BurnIn | Phase::Propagation => {
                let payloads: Vec<Arc<MessagePayload>> = states
                    .iter_mut()
                    .zip(rows.iter())
                    .zip(rewards)
                    .map(|((s, row), &r)| Arc::new(burnin_step(s, t, r, row)))
                    .collect();
                for (i, s) in states.iter_mut().enumerate() {
                    s.receive(&inbox_of(&payloads, i), t);
                }
                if phase == Phase::BurnIn && self.cfg.algorithm == Algorithm::Rule2Detected {
                    self.burnin_graphs.push(graph.clone());
                }
                if t == self.cfg.burn_in && self.cfg.algorithm == Algorithm::Rule2Detected {
                    self.detect(&mut states);
                }
                if t + 1 == self.learning_start {
                    states.iter_mut().for_each(burnin_finalize);
                }
            }
            Phase::Learning => {
                for (s, (&a, &r)) in states.iter_mut().zip(arms.iter().zip(rewards)) {
                    s.observe(a, r);
                }
                for (s, row) in states.iter_mut().zip(&rows) {
                    s.record_contacts(row);
                }
                let mut payloads: Vec<Arc<MessagePayload>> = states.iter().map(|s| Arc::new(s.payload(t))).collect();
                let update = t.is_multiple_of(self.cfg.tau);
                match self.cfg.algorithm {
                    Algorithm::Rule1 => {
                        for (i, s) in states.iter_mut().enumerate() {
                            let inbox = inbox_of(&payloads, i);
                            if update {
                                rule1_update(s, &inbox, t);
                            } else {
                                s.receive(&inbox, t);
                            }
                        }
                    }
                    _ => {
                        if update {
                            let estimates: Vec<_> = states
                                .iter()
                                .enumerate()
                                .map(|(i, s)| {
                                    let Scope::Cluster { labels, .. } = s.scope() else {
                                        unreachable!("rule 2 agents carry cluster scope")
                                    };
                                    cluster_estimates(s, &inbox_of(&payloads, i), labels)
                                })
                                .collect();
                            // Inboxes are dropped, so make_mut patches in place.
                            for (p, est) in payloads.iter_mut().zip(estimates) {
                                let p = Arc::make_mut(p);
                                p.cap_n = est.cap_n;
                                p.hat_mu = est.hat_mu;
                            }
                        }
                        for (i, s) in states.iter_mut().enumerate() {
                            rule2_update(s, &inbox_of(&payloads, i), t, self.cfg.tau);
                        }
                    }
                }
            }
        }
        self.agents = Agents::Sbm(states);
    }

    fn detect(&mut self, states: &mut [SbmAgentState]) {
        let c = self.n_clusters;
        let k = self.cfg.n_arms() as f64;
        let sigma = self.cfg.rewards.sigma();
        let sigma2 = self
            .cfg
            .detection
            .sigma2
            .unwrap_or(sigma * sigma * k / self.cfg.burn_in as f64)
            .max(1e-12);
        let mut rng = substream(self.cfg.detection.seed.unwrap_or(self.seed), Stream::Detection);
        let bars: Vec<Vec<f64>> = states.iter().map(|s| s.bar_mu.clone()).collect();
        let (labels, summary) =
            match detect_clusters_from_burnin(&self.burnin_graphs, &bars, c, sigma2, self.cfg.detection.iters, &mut rng) {
                Ok(out) => {
                    let labels = out.assignment.labels().to_vec();
                    let accuracy = match_labels(&labels, self.cfg.block_model.assignment(), c)
                        .map(|r| r.accuracy)
                        .unwrap_or(0.0);
                    (
                        labels,
                        DetectionSummary {
                            status: out.status,
                            iterations: out.iterations,
                            covariate_only_steps: out.covariate_only_steps,
                            accuracy,
                        },
                    )
                }
                Err(e) => {
                    log::warn!("cluster detection failed: {e}; treating all agents as one cluster");
                    (
                        vec![0; states.len()],
                        DetectionSummary {
                            status: IrLssStatus::Aborted,
                            iterations: 0,
                            covariate_only_steps: 0,
                            accuracy: 0.0,
                        },
                    )
                }
            };
        let shared: Arc<[usize]> = labels.clone().into();
        for s in states.iter_mut() {
            let own = shared[s.m];
            let mut contacts = vec![0u64; c];
            for g in &self.burnin_graphs {
                let mut hit = vec![false; c];
                for j in g.neighbors(s.m) {
                    hit[shared[j]] = true;
                }
                hit[own] = true;
                for (x, h) in contacts.iter_mut().zip(&hit) {
                    *x += *h as u64;
                }
            }
            s.set_cluster_scope(Arc::clone(&shared), c, contacts, self.burnin_graphs.len() as u64);
        }
        self.detected = Some(labels);
        self.detection = Some(summary);
        self.burnin_graphs.clear();
    }

    /// Runs the remaining rounds and returns the result.
    pub fn finish(mut self) -> RunResult {
        while self.step().is_some() {}
        let m = self.cfg.n_agents() as f64;
        let final_tilde_mu = match &self.agents {
            Agents::Sbm(s) => Some(s.iter().map(|a| a.tilde_mu.clone()).collect()),
            _ => None,
        };
        RunResult {
            seed: self.seed,
            algorithm: self.cfg.algorithm,
            total_regret: self.regret * m,
            regret_trace: self.trace,
            counts: self.counts,
            events: self.events,
            detected_assignment: self.detected,
            detection: self.detection,
            final_tilde_mu,
        }
    }
}

pub fn run_episode(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult, SimError> {
    Ok(Episode::new(cfg, seed)?.finish())
}

/// `n` seeds derived from `master`.
pub fn batch_seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|r| run_seed(master, r)).collect()
}

/// Rounds `j·T/n`, `j = 1..n`, without duplicates.
pub fn checkpoints(horizon: u64, n: usize) -> Vec<u64> {
    let n = (n as u64).clamp(1, horizon.max(1));
    let mut out: Vec<u64> = (1..=n).map(|j| j * horizon / n).filter(|&t| t >= 1).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub t: u64,
    pub mean_regret: f64,
    /// `1.96 · s/√n`, zero for a single run.
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub algorithm: Algorithm,
    pub n_runs: usize,
    /// A single run: the interval is degenerate.
    pub degenerate: bool,
    pub checkpoints: Vec<CheckpointStat>,
}

impl BatchSummary {
    pub fn final_mean(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.mean_regret)
    }

    pub fn final_half_width(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.ci_half_width)
    }
}

/// Mean and normal-approximation 95% half-width.
pub fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Summary over results already sorted by seed.
pub fn summarize(algorithm: Algorithm, results: &[RunResult], points: &[u64]) -> BatchSummary {
    let checkpoints = points
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = results.iter().map(|r| r.regret_trace[t as usize - 1]).collect();
            let (mean_regret, ci_half_width) = mean_and_half_width(&xs);
            CheckpointStat {
                t,
                mean_regret,
                ci_half_width,
            }
        })
        .collect();
    BatchSummary {
        algorithm,
        n_runs: results.len(),
        degenerate: results.len() == 1,
        checkpoints,
    }
}

/// Runs one episode per seed on the current rayon pool. Results are sorted
/// by seed, so the summary does not depend on execution order.
pub fn run_batch(cfg: &ExperimentConfig, seeds: &[u64], n_checkpoints: usize) -> Result<(BatchSummary, Vec<RunResult>), SimError> {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(SimError::DuplicateSeed(w[0]));
    }
    cfg.validate()?;
    let results: Result<Vec<RunResult>, SimError> = sorted.par_iter().map(|&s| run_episode(cfg, s)).collect();
    let results = results?;
    let summary = summarize(cfg.algorithm, &results, &checkpoints(cfg.horizon, n_checkpoints));
    Ok((summary, results))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventFrequencies {
    pub graph_connected: f64,
    pub quotient_connected: f64,
    /// Over rounds where the window was full; `None` if there were none.
    pub window_connected: Option<f64>,
}

pub fn event_frequencies(results: &[RunResult]) -> EventFrequencies {
    let all: Vec<&RoundEvents> = results.iter().flat_map(|r| &r.events).collect();
    let n = all.len().max(1) as f64;
    let windows: Vec<bool> = all.iter().filter_map(|e| e.window_connected).collect();
    EventFrequencies {
        graph_connected: all.iter().filter(|e| e.graph_connected).count() as f64 / n,
        quotient_connected: all.iter().filter(|e| e.quotient_connected).count() as f64 / n,
        window_connected: (!windows.is_empty())
            .then(|| windows.iter().filter(|&&w| w).count() as f64 / windows.len() as f64),
    }
}

/// Fraction of `n` block-model samples that are connected.
pub fn connected_fraction<R: Rng + ?Sized>(bm: &BlockModel, n: usize, rng: &mut R) -> f64 {
    (0..n).filter(|_| sample_graph(bm, rng).is_connected()).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::cumulative_regret;

    fn small(alg: Algorithm, c: usize, p: f64, q: f64) -> ExperimentConfig {
        let bm = BlockModel::two_level(4, c, p, q).unwrap();
        let rm = RewardModel::synthetic(c, 3, 0.1, 0.2, 0.05, 4).unwrap();
        ExperimentConfig::new(bm, rm, 300, 6, alg)
    }

    const ALL: [Algorithm; 5] = [
        Algorithm::HomoUcb,
        Algorithm::LocalUcb,
        Algorithm::Rule1,
        Algorithm::Rule2Known,
        Algorithm::Rule2Detected,
    ];

    #[test]
    fn burn_in_only_episode_is_round_robin() {
        for alg in [Algorithm::Rule1, Algorithm::Rule2Known] {
            let mut cfg = small(alg, 2, 1.0, 0.5);
            cfg.horizon = 6;
            let r = run_episode(&cfg, 1).unwrap();
            assert!(r.counts.counts.iter().all(|row| row == &vec![2, 2, 2]));
        }
    }

    #[test]
    fn episodes_are_deterministic_and_consistent() {
        for alg in ALL {
            let cfg = small(alg, 2, 0.8, 0.4);
            let a = run_episode(&cfg, 9).unwrap();
            let b = run_episode(&cfg, 9).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.regret_trace.len(), 300);
            assert!(a.regret_trace.windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(a.counts.total(), 4 * 300);
            let stats = global_stats(&cfg.rewards, &cfg.block_model).unwrap();
            let r = cumulative_regret(&a.counts, &stats).unwrap();
            assert!((r - a.regret_trace[299]).abs() < 1e-9);
        }
    }

    #[test]
    fn single_arm_has_zero_regret() {
        let bm = BlockModel::two_level(4, 2, 1.0, 1.0).unwrap();
        let rm = RewardModel::new(vec![vec![0.5], vec![0.3]], 0.1).unwrap();
        for alg in ALL {
            let cfg = ExperimentConfig::new(bm.clone(), rm.clone(), 50, 2, alg);
            assert_eq!(run_episode(&cfg, 0).unwrap().total_regret, 0.0);
        }
    }

    #[test]
    fn validation_errors() {
        let mut cfg = small(Algorithm::Rule1, 2, 1.0, 1.0);
        cfg.burn_in = 2;
        assert!(matches!(cfg.validate(), Err(SimError::BurnInTooShort { .. })));
        cfg.burn_in = 400;
        assert!(matches!(cfg.validate(), Err(SimError::BurnInTooLong { .. })));
        cfg.burn_in = 6;
        cfg.tau = 0;
        assert_eq!(cfg.validate(), Err(SimError::ZeroTau));
        cfg.tau = 1;
        cfg.graph_source = GraphSource::Static(GraphSample::complete(3));
        assert!(cfg.validate().is_err());
        assert_eq!(run_batch(&small(Algorithm::Rule1, 2, 1.0, 1.0), &[1, 1], 10), Err(SimError::DuplicateSeed(1)));
    }

    #[test]
    fn batch_summary_examples() {
        let cfg = small(Algorithm::Rule2Known, 2, 0.7, 0.5);
        let (one, runs) = run_batch(&cfg, &[5], 10).unwrap();
        assert!(one.degenerate);
        assert_eq!(one.final_mean(), runs[0].regret_trace[299]);
        assert_eq!(one.final_half_width(), 0.0);
        let (a, _) = run_batch(&cfg, &[3, 1, 2], 10).unwrap();
        let (b, _) = run_batch(&cfg, &[2, 3, 1], 10).unwrap();
        assert_eq!(a, b);
        assert!(a.checkpoints.iter().all(|c| c.mean_regret >= 0.0));
        assert_eq!(a.checkpoints.len(), 10);
        assert_eq!(a.checkpoints[0].t, 30);
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(1000, 4), vec![250, 500, 750, 1000]);
        assert_eq!(checkpoints(3, 100), vec![1, 2, 3]);
    }

    #[test]
    fn event_frequency_examples() {
        let cfg = small(Algorithm::LocalUcb, 2, 1.0, 1.0);
        let f = event_frequencies(&[run_episode(&cfg, 0).unwrap()]);
        assert_eq!((f.graph_connected, f.quotient_connected, f.window_connected), (1.0, 1.0, Some(1.0)));
        let cfg = small(Algorithm::LocalUcb, 2, 1.0, 0.0);
        let f = event_frequencies(&[run_episode(&cfg, 0).unwrap()]);
        assert_eq!((f.graph_connected, f.quotient_connected), (0.0, 0.0));
    }

    #[test]
    fn static_graph_mode() {
        let mut cfg = small(Algorithm::Rule1, 2, 0.0, 0.0);
        cfg.graph_source = GraphSource::Static(GraphSample::complete(4));
        let r = run_episode(&cfg, 0).unwrap();
        assert!(r.events.iter().all(|e| e.graph_connected));
    }
}
