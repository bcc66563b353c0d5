//! Decision rules and estimator updates.
//!
//! A learning round for one agent is split into stages so that a simulator
//! can stage messages: every agent pulls and observes, every agent emits a
//! payload built from its post-pull state, then every agent consumes the
//! payloads of its current neighbours.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Arm played on round `t` by round-robin schedules.
pub fn round_robin_arm(t: u64, n_arms: usize) -> usize {
    (t % n_arms as u64) as usize
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Single-cluster cooperative UCB

/// Cumulative local statistics announced by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct HomoPayload {
    pub sender: usize,
    pub round: u64,
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct PeerSnapshot {
    round: u64,
    counts: Vec<u64>,
    sums: Vec<f64>,
}

/// Agent state for cooperative UCB on a homogeneous system.
#[derive(Debug, Clone, PartialEq)]
pub struct HomoAgentState {
    pub m: usize,
    own_count: Vec<u64>,
    own_sum: Vec<f64>,
    peers: Vec<Option<PeerSnapshot>>,
    last_contact: Vec<u64>,
    merged_count: Vec<u64>,
    merged_sum: Vec<f64>,
}

impl HomoAgentState {
    pub fn new(m: usize, n_agents: usize, n_arms: usize) -> Self {
        Self {
            m,
            own_count: vec![0; n_arms],
            own_sum: vec![0.0; n_arms],
            peers: vec![None; n_agents],
            last_contact: vec![0; n_agents],
            merged_count: vec![0; n_arms],
            merged_sum: vec![0.0; n_arms],
        }
    }

    pub fn n_arms(&self) -> usize {
        self.own_count.len()
    }

    pub fn own_count(&self) -> &[u64] {
        &self.own_count
    }

    /// Merged count `Ñ_k` over own and stored peer observations.
    pub fn merged_count(&self) -> &[u64] {
        &self.merged_count
    }

    pub fn merged_mean(&self, k: usize) -> f64 {
        if self.merged_count[k] == 0 {
            0.0
        } else {
            self.merged_sum[k] / self.merged_count[k] as f64
        }
    }

    pub fn last_contact(&self) -> &[u64] {
        &self.last_contact
    }

    pub fn observe(&mut self, k: usize, reward: f64) {
        self.own_count[k] += 1;
        self.own_sum[k] += reward;
        self.merged_count[k] += 1;
        self.merged_sum[k] += reward;
    }

    pub fn payload(&self, round: u64) -> HomoPayload {
        HomoPayload {
            sender: self.m,
            round,
            counts: self.own_count.clone(),
            sums: self.own_sum.clone(),
        }
    }

    fn recompute(&mut self) {
        self.merged_count.clone_from(&self.own_count);
        self.merged_sum.clone_from(&self.own_sum);
        for snap in self.peers.iter().flatten() {
            for k in 0..self.merged_count.len() {
                self.merged_count[k] += snap.counts[k];
                self.merged_sum[k] += snap.sums[k];
            }
        }
    }
}

/// Index `merged mean + sqrt(ln t / Ñ_k)`; `+inf` for an untried arm.
pub fn homo_ucb_index(state: &HomoAgentState, k: usize, t: u64) -> f64 {
    let n = state.merged_count[k];
    if n == 0 {
        return f64::INFINITY;
    }
    state.merged_mean(k) + ((t as f64).ln() / n as f64).sqrt()
}

pub fn homo_select_arm(state: &HomoAgentState, t: u64) -> usize {
    argmax_lowest((0..state.n_arms()).map(|k| homo_ucb_index(state, k, t)))
}

/// Replaces stored peer snapshots by newer payloads and recomputes the
/// merged statistics. Payloads older than the stored one are ignored.
pub fn homo_merge(state: &mut HomoAgentState, inbox: &[HomoPayload], t: u64) {
    let mut changed = false;
    for msg in inbox {
        if msg.sender == state.m {
            continue;
        }
        let stale = state.peers[msg.sender]
            .as_ref()
            .is_some_and(|s| s.round > msg.round);
        if stale {
            continue;
        }
        state.peers[msg.sender] = Some(PeerSnapshot {
            round: msg.round,
            counts: msg.counts.clone(),
            sums: msg.sums.clone(),
        });
        state.last_contact[msg.sender] = state.last_contact[msg.sender].max(msg.round.min(t));
        changed = true;
    }
    if changed {
        state.recompute();
    }
}

// ---------------------------------------------------------------------------
// Local UCB1

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUcbState {
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl LocalUcbState {
    pub fn new(n_arms: usize) -> Self {
        Self {
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn observe(&mut self, k: usize, reward: f64) {
        self.counts[k] += 1;
        self.sums[k] += reward;
    }
}

/// UCB1 on own observations: lowest untried arm first, then
/// `mean + sqrt(2 ln t / n)` with ties toward the lowest index.
pub fn local_ucb_step(state: &LocalUcbState, t: u64) -> usize {
    if let Some(k) = state.counts.iter().position(|&c| c == 0) {
        return k;
    }
    let ln_t = (t as f64).ln();
    argmax_lowest(
        state
            .counts
            .iter()
            .zip(&state.sums)
            .map(|(&n, &s)| s / n as f64 + (2.0 * ln_t / n as f64).sqrt()),
    )
}

// ---------------------------------------------------------------------------
// UCB-SBM

/// One agent's announcement for a round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessagePayload {
    pub sender: usize,
    pub round: u64,
    pub n: Vec<u64>,
    pub cap_n: Vec<u64>,
    pub n_tilde: Vec<u64>,
    pub bar_mu: Vec<f64>,
    pub hat_mu: Vec<f64>,
    pub tilde_mu: Vec<f64>,
}

/// What an arm in the forced branch of learning-period selection is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedExploration {
    /// `t mod K`.
    RoundRobin,
    /// Uniform over arms from the algorithm stream.
    Uniform,
    /// The arm with the largest `Ñ − N` deficit.
    #[default]
    Lagging,
}

/// Granularity of the edge-frequency table and of snapshot fallback.
#[derive(Debug, Clone, PartialEq)]
pub enum Scope {
    /// One entry per agent (Rule 1).
    Agent,
    /// One entry per cluster; `labels[j]` is agent j's cluster (Rule 2).
    Cluster { labels: Arc<[usize]>, n_clusters: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmAgentState {
    pub m: usize,
    n_agents: usize,
    pub n: Vec<u64>,
    pub cap_n: Vec<u64>,
    pub n_tilde: Vec<u64>,
    pub bar_mu: Vec<f64>,
    pub hat_mu: Vec<f64>,
    pub tilde_bar_mu: Vec<f64>,
    pub tilde_mu: Vec<f64>,
    scope: Scope,
    contacts: Vec<u64>,
    rounds: u64,
    last_contact: Vec<u64>,
    snapshots: Vec<Option<Arc<MessagePayload>>>,
}

impl SbmAgentState {
    pub fn new(m: usize, n_agents: usize, n_arms: usize, scope: Scope) -> Self {
        let table = match &scope {
            Scope::Agent => n_agents,
            Scope::Cluster { n_clusters, .. } => *n_clusters,
        };
        Self {
            m,
            n_agents,
            n: vec![0; n_arms],
            cap_n: vec![0; n_arms],
            n_tilde: vec![0; n_arms],
            bar_mu: vec![0.0; n_arms],
            hat_mu: vec![0.0; n_arms],
            tilde_bar_mu: vec![0.0; n_arms],
            tilde_mu: vec![0.0; n_arms],
            scope,
            contacts: vec![0; table],
            rounds: 0,
            last_contact: vec![0; n_agents],
            snapshots: vec![None; n_agents],
        }
    }

    pub fn n_arms(&self) -> usize {
        self.n.len()
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    /// Edge-frequency table `P_t`: agents for Rule 1, clusters for Rule 2.
    pub fn edge_frequency(&self) -> Vec<f64> {
        if self.rounds == 0 {
            return vec![0.0; self.contacts.len()];
        }
        self.contacts
            .iter()
            .map(|&c| c as f64 / self.rounds as f64)
            .collect()
    }

    pub fn last_contact(&self) -> &[u64] {
        &self.last_contact
    }

    pub fn snapshot(&self, j: usize) -> Option<&MessagePayload> {
        self.snapshots[j].as_deref()
    }

    fn own_slot(&self) -> usize {
        match &self.scope {
            Scope::Agent => self.m,
            Scope::Cluster { labels, .. } => labels[self.m],
        }
    }

    fn slot_of(&self, j: usize) -> usize {
        match &self.scope {
            Scope::Agent => j,
            Scope::Cluster { labels, .. } => labels[j],
        }
    }

    /// Replaces the cluster labels and the edge-frequency table, e.g. after
    /// cluster detection. `contacts[c]` counts rounds with contact to `c`.
    pub fn set_cluster_scope(&mut self, labels: Arc<[usize]>, n_clusters: usize, contacts: Vec<u64>, rounds: u64) {
        assert_eq!(contacts.len(), n_clusters);
        self.scope = Scope::Cluster { labels, n_clusters };
        self.contacts = contacts;
        self.rounds = rounds;
    }

    /// Local pull: updates `n` and `bar_mu`.
    pub fn observe(&mut self, k: usize, reward: f64) {
        let n = self.n[k] as f64;
        self.bar_mu[k] = (self.bar_mu[k] * n + reward) / (n + 1.0);
        self.n[k] += 1;
    }

    /// Advances `P_t` by one round. `contact[s]` says whether table entry `s`
    /// (agent or cluster) was adjacent this round; the own entry always counts.
    pub fn record_contacts(&mut self, contact: &[bool]) {
        assert_eq!(contact.len(), self.contacts.len());
        self.rounds += 1;
        let own = self.own_slot();
        for (s, c) in self.contacts.iter_mut().enumerate() {
            if contact[s] || s == own {
                *c += 1;
            }
        }
    }

    pub fn payload(&self, round: u64) -> MessagePayload {
        MessagePayload {
            sender: self.m,
            round,
            n: self.n.clone(),
            cap_n: self.cap_n.clone(),
            n_tilde: self.n_tilde.clone(),
            bar_mu: self.bar_mu.clone(),
            hat_mu: self.hat_mu.clone(),
            tilde_mu: self.tilde_mu.clone(),
        }
    }

    /// Stores neighbour payloads and their contact rounds.
    pub fn receive(&mut self, inbox: &[Arc<MessagePayload>], t: u64) {
        for msg in inbox {
            if msg.sender == self.m {
                continue;
            }
            let newer = self.snapshots[msg.sender]
                .as_ref()
                .is_none_or(|s| s.round <= msg.round);
            if newer {
                self.snapshots[msg.sender] = Some(Arc::clone(msg));
                self.last_contact[msg.sender] = t;
            }
        }
    }

    fn contacted(&self, j: usize) -> bool {
        j == self.m || self.contacts[self.slot_of(j)] > 0
    }

    /// Snapshot used for peer `j`: the direct one, otherwise (cluster scope)
    /// the freshest one from an agent labelled like `j`.
    fn resolve(&self, j: usize) -> Option<&MessagePayload> {
        if let Some(s) = self.snapshots[j].as_deref() {
            return Some(s);
        }
        let Scope::Cluster { labels, .. } = &self.scope else {
            return None;
        };
        let mut best: Option<&MessagePayload> = None;
        for (h, snap) in self.snapshots.iter().enumerate() {
            if h == self.m || labels[h] != labels[j] {
                continue;
            }
            if let Some(s) = snap.as_deref() {
                if best.is_none_or(|b| s.round > b.round) {
                    best = Some(s);
                }
            }
        }
        best
    }

    /// `P′` weight of peer `j` in the global estimator.
    fn weight(&self, j: usize) -> f64 {
        let m = self.n_agents as f64;
        if self.contacted(j) && (j == self.m || self.resolve(j).is_some()) {
            (m - 1.0) / (m * m)
        } else {
            0.0
        }
    }

    /// `Σ_j P′ tilde^j + d Σ_j local^j`, `local` selecting `bar_mu` or
    /// `hat_mu`. Peers without any snapshot enter the `d` sum with the
    /// agent's own value.
    fn mix(&self, local: impl Fn(&MessagePayload) -> &[f64], own_local: &[f64]) -> Vec<f64> {
        let k = self.n_arms();
        let mut weights = vec![0.0; self.n_agents];
        for (j, w) in weights.iter_mut().enumerate() {
            *w = self.weight(j);
        }
        let d = (1.0 - weights.iter().sum::<f64>()) / self.n_agents as f64;
        let mut out = vec![0.0; k];
        for (j, &w) in weights.iter().enumerate() {
            let snap = if j == self.m { None } else { self.resolve(j) };
            let (tilde, loc) = match snap {
                Some(s) => (s.tilde_mu.as_slice(), local(s)),
                None => (self.tilde_mu.as_slice(), own_local),
            };
            for i in 0..k {
                out[i] += w * tilde[i] + d * loc[i];
            }
        }
        out
    }
}

/// One burn-in round: pull `t mod K` with the observed `reward`, advance the
/// contact table and return the payload to broadcast. Burn-in payloads carry
/// `bar_mu` in every estimator slot.
pub fn burnin_step(state: &mut SbmAgentState, t: u64, reward: f64, contact: &[bool]) -> MessagePayload {
    let arm = round_robin_arm(t, state.n_arms());
    state.observe(arm, reward);
    state.record_contacts(contact);
    let mut p = state.payload(t);
    p.hat_mu.clone_from(&p.bar_mu);
    p.tilde_mu.clone_from(&p.bar_mu);
    p.cap_n.clone_from(&p.n);
    p.n_tilde.clone_from(&p.n);
    p
}

/// Seeds the learning-period estimators from the burn-in snapshots:
/// `tilde_mu = Σ_j (1/M)·bar_mu^j` over contacted peers and self.
pub fn burnin_finalize(state: &mut SbmAgentState) {
    let m = state.n_agents;
    let k = state.n_arms();
    let mut tilde = vec![0.0; k];
    let mut seen_peer = false;
    for j in 0..m {
        let bar = if j == state.m {
            Some(state.bar_mu.as_slice())
        } else if state.contacted(j) {
            state.resolve(j).map(|s| s.bar_mu.as_slice())
        } else {
            None
        };
        if let Some(bar) = bar {
            seen_peer |= j != state.m;
            for i in 0..k {
                tilde[i] += bar[i] / m as f64;
            }
        }
    }
    if m > 1 && !seen_peer {
        log::warn!("agent {} contacted no peer during burn-in; using its local means", state.m);
        tilde.clone_from(&state.bar_mu);
    }
    state.tilde_mu = tilde;
    state.cap_n.clone_from(&state.n);
    state.n_tilde.clone_from(&state.n);
    state.hat_mu.clone_from(&state.bar_mu);
    state.tilde_bar_mu.clone_from(&state.tilde_mu);
}

/// Learning-period selection. Forced branch when some arm has
/// `N[i] <= Ñ[i] − K`; otherwise `argmax tilde_mu + sqrt(C1 ln t / N)`.
pub fn sbm_select_arm<R: Rng + ?Sized>(
    state: &SbmAgentState,
    t: u64,
    c1: f64,
    forced: ForcedExploration,
    rng: &mut R,
) -> usize {
    let k = state.n_arms();
    let lagging = (0..k).any(|i| state.cap_n[i] + k as u64 <= state.n_tilde[i]);
    if lagging {
        return match forced {
            ForcedExploration::RoundRobin => round_robin_arm(t, k),
            ForcedExploration::Uniform => rng.random_range(0..k),
            ForcedExploration::Lagging => {
                argmax_lowest((0..k).map(|i| state.n_tilde[i] as f64 - state.cap_n[i] as f64))
            }
        };
    }
    let ln_t = (t as f64).ln();
    argmax_lowest((0..k).map(|i| {
        let n = state.cap_n[i].max(1) as f64;
        state.tilde_mu[i] + (c1 * ln_t / n).sqrt()
    }))
}

/// Rule 1 information update for round `t` from the payloads of the current
/// neighbours. The pull and the contact table must already reflect round `t`.
pub fn rule1_update(state: &mut SbmAgentState, inbox: &[Arc<MessagePayload>], t: u64) {
    state.receive(inbox, t);
    state.cap_n.clone_from(&state.n);
    for i in 0..state.n_arms() {
        let nb = inbox.iter().map(|p| p.n_tilde[i]).max().unwrap_or(0);
        state.n_tilde[i] = state.cap_n[i].max(nb).max(state.n_tilde[i]);
    }
    let own_bar = state.bar_mu.clone();
    let tilde = state.mix(|p| &p.bar_mu, &own_bar);
    state.hat_mu.clone_from(&state.bar_mu);
    state.tilde_mu = tilde;
}

/// Cluster-level counts and local cluster estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEstimates {
    pub cap_n: Vec<u64>,
    pub hat_mu: Vec<f64>,
}

/// `N = Σ_{j∈c_m} n_j` and `hat_mu = mean_{j∈c_m} bar_mu^j` from the latest
/// snapshot of each cluster mate, `inbox` taking precedence over stored
/// ones. Cluster mates never heard from are left out of both.
pub fn cluster_estimates(
    state: &SbmAgentState,
    inbox: &[Arc<MessagePayload>],
    labels: &[usize],
) -> ClusterEstimates {
    let k = state.n_arms();
    let own = labels[state.m];
    let mut cap_n = state.n.clone();
    let mut hat = state.bar_mu.clone();
    let mut members = 1usize;
    for j in (0..labels.len()).filter(|&j| j != state.m && labels[j] == own) {
        let snap = inbox
            .iter()
            .find(|p| p.sender == j)
            .map(|p| p.as_ref())
            .or_else(|| state.snapshot(j));
        if let Some(s) = snap {
            members += 1;
            for i in 0..k {
                cap_n[i] += s.n[i];
                hat[i] += s.bar_mu[i];
            }
        }
    }
    for h in &mut hat {
        *h /= members as f64;
    }
    ClusterEstimates { cap_n, hat_mu: hat }
}

/// Rule 2 information update for round `t`. Only rounds with
/// `t mod tau == 0` update `N`, `Ñ` and the estimators; other rounds store
/// snapshots only. Panics if the state does not carry cluster scope.
pub fn rule2_update(state: &mut SbmAgentState, inbox: &[Arc<MessagePayload>], t: u64, tau: u64) {
    let labels = match &state.scope {
        Scope::Cluster { labels, .. } => Arc::clone(labels),
        Scope::Agent => panic!("rule2_update needs cluster labels"),
    };
    if !t.is_multiple_of(tau.max(1)) {
        state.receive(inbox, t);
        return;
    }
    let est = cluster_estimates(state, inbox, &labels);
    state.receive(inbox, t);
    let own = labels[state.m];
    let k = state.n_arms();
    for i in 0..k {
        let nb = inbox.iter().map(|p| p.n_tilde[i]).max().unwrap_or(0);
        state.n_tilde[i] = est.cap_n[i].max(nb).max(state.n_tilde[i]);
    }
    state.cap_n = est.cap_n;
    state.hat_mu = est.hat_mu;

    let mut tb = state.tilde_mu.clone();
    let mut members = 1usize;
    for j in (0..labels.len()).filter(|&j| j != state.m && labels[j] == own) {
        if let Some(s) = state.snapshot(j) {
            members += 1;
            for (acc, x) in tb.iter_mut().zip(&s.tilde_mu) {
                *acc += x;
            }
        }
    }
    for v in &mut tb {
        *v /= members as f64;
    }
    state.tilde_bar_mu = tb;

    let own_hat = state.hat_mu.clone();
    state.tilde_mu = state.mix(|p| &p.hat_mu, &own_hat);
}
