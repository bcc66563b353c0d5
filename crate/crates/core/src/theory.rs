//! Edge-probability thresholds, burn-in lengths, exploration constants and
//! regret-bound expressions, plus an assumption checker.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::graph::BlockModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Theorem {
    /// Cooperative UCB on one cluster.
    T1,
    /// Rule 1, connected graph every round.
    T2,
    /// Rule 2, complete clusters, connected cluster graph.
    T3,
    /// Rule 2, the tighter min-form of `T3`.
    T4,
    /// Rule 2, `l`-periodically connected cluster graph.
    T5,
    /// Rule 2, `l`-periodically connected clusters and cluster graph.
    T6,
}

impl Theorem {
    pub const WITH_THRESHOLDS: [Theorem; 5] = [Theorem::T2, Theorem::T3, Theorem::T4, Theorem::T5, Theorem::T6];
}

/// Which lower bound on an edge probability to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    T2,
    T3,
    T4,
    T5Inter,
    T6Intra,
    T6Inter,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("{theorem}: {reason}")]
    Range { theorem: &'static str, reason: String },
    #[error("gap of arm {0} is zero but it is not the optimal arm")]
    ZeroGap(usize),
    #[error("gaps must contain exactly one zero entry")]
    NoOptimalArm,
    #[error("{0} needs the minimum edge probability")]
    MissingProbability(&'static str),
}

fn range(theorem: &'static str, reason: impl Into<String>) -> TheoryError {
    TheoryError::Range {
        theorem,
        reason: reason.into(),
    }
}

/// Constant in the `T1` bound's `log T/(M Δ)` term.
pub const DEFAULT_T1_CONSTANT: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n_agents: usize,
    pub n_clusters: usize,
    pub n_arms: usize,
    pub horizon: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub c0: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub gaps: Vec<f64>,
    /// Window length for T5/T6; `None` selects [`optimal_l`] where needed.
    #[serde(default)]
    pub l: Option<usize>,
    /// Smallest cluster size `c_M`; defaults to `⌊M/C⌋`.
    #[serde(default)]
    pub min_cluster_size: Option<usize>,
    /// Minimum edge probability for the `T1` bound.
    #[serde(default)]
    pub p_min: Option<f64>,
    /// Explicit `C1` for the bounds; otherwise [`exploration_constant`].
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c1_variant: C1Variant,
    #[serde(default = "default_t1_constant")]
    pub t1_constant: f64,
}

fn default_t1_constant() -> f64 {
    DEFAULT_T1_CONSTANT
}

impl TheoryParams {
    /// Parameters with `ε = δ = 0.1`, `c₀ = 0.5` and no gaps.
    pub fn new(n_agents: usize, n_clusters: usize, n_arms: usize, horizon: u64) -> Self {
        Self {
            n_agents,
            n_clusters,
            n_arms,
            horizon,
            epsilon: 0.1,
            delta: 0.1,
            c0: 0.5,
            sigma2: 0.01,
            gaps: vec![],
            l: None,
            min_cluster_size: None,
            p_min: None,
            c1: None,
            c1_variant: C1Variant::MaxFormula,
            t1_constant: DEFAULT_T1_CONSTANT,
        }
    }

    pub fn cluster_size(&self) -> usize {
        self.min_cluster_size
            .unwrap_or(self.n_agents / self.n_clusters.max(1))
    }

    fn validate(&self, theorem: &'static str) -> Result<(), TheoryError> {
        if self.n_agents == 0 || self.n_clusters == 0 || self.n_clusters > self.n_agents {
            return Err(range(theorem, format!("need 1 <= C <= M, got C = {}, M = {}", self.n_clusters, self.n_agents)));
        }
        if self.horizon == 0 {
            return Err(range(theorem, "horizon T must be positive"));
        }
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta), ("c0", self.c0)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(range(theorem, format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// `½ + ½√(1 − (δ/(nT))^{2/(n−1)})`.
fn connectivity_root(n: f64, delta: f64, t: f64) -> f64 {
    1.0 - connectivity_root_complement(n, delta, t)
}

/// `½ − ½√(1 − x)` with `x = (δ/(nT))^{2/(n−1)}`, written as
/// `x / (2(1 + √(1 − x)))` to avoid cancellation for small `x`.
fn connectivity_root_complement(n: f64, delta: f64, t: f64) -> f64 {
    let x = (delta / (n * t)).powf(2.0 / (n - 1.0));
    x / (2.0 * (1.0 + (1.0 - x).sqrt()))
}

/// `ln((C−l−1)!/(C−2)!)`.
pub fn ln_factorial_ratio(c: usize, l: usize) -> f64 {
    ln_gamma((c - l) as f64) - ln_gamma((c - 1) as f64)
}

/// `(C−l−1)!/(C−2)!` through log-gamma.
pub fn factorial_ratio(c: usize, l: usize) -> f64 {
    ln_factorial_ratio(c, l).exp()
}

/// `r(n, l)·max{1 − δ(n−1)/(8nT), (3/4)^{1/l}}`.
fn periodic_core(n: usize, l: usize, delta: f64, t: f64) -> f64 {
    let nf = n as f64;
    let a = 1.0 - delta * (nf - 1.0) / (8.0 * nf * t);
    let b = 0.75f64.powf(1.0 / l as f64);
    (ln_factorial_ratio(n, l) + a.max(b).ln()).exp()
}

/// `e/(e−1)`.
pub fn euler_prefactor() -> f64 {
    let e = std::f64::consts::E;
    e / (e - 1.0)
}

fn window(params: &TheoryParams, theorem: &'static str) -> Result<usize, TheoryError> {
    match params.l {
        Some(l) => Ok(l),
        None if theorem == "T6_intra" => Ok(params.cluster_size().saturating_sub(1)),
        None => optimal_l(params),
    }
}

/// Lower bound on a minimum edge probability required by a theorem.
pub fn edge_threshold(which: Threshold, params: &TheoryParams) -> Result<f64, TheoryError> {
    let m = params.n_agents as f64;
    let c = params.n_clusters as f64;
    let t = params.horizon as f64;
    let delta = params.delta;
    match which {
        Threshold::T2 => {
            params.validate("T2")?;
            if params.n_agents < 2 {
                return Err(range("T2", "needs M >= 2"));
            }
            Ok(connectivity_root(m, delta, t))
        }
        Threshold::T3 => {
            params.validate("T3")?;
            if params.n_clusters < 2 {
                return Err(range("T3", "needs C >= 2"));
            }
            let y = connectivity_root_complement(c, delta, t);
            Ok(1.0 - y.powf(c * c / (m * m)))
        }
        Threshold::T4 => {
            params.validate("T4")?;
            if params.n_clusters < 2 {
                return Err(range("T4", "needs C >= 2"));
            }
            // 1 − min{a, b} = max{1 − a, 1 − b}.
            let y = connectivity_root_complement(c, delta, t).max(delta * (c - 1.0) / (8.0 * c * t));
            Ok(1.0 - y.powf(c * c / (m * m)))
        }
        Threshold::T5Inter | Threshold::T6Inter => {
            let name = if which == Threshold::T5Inter { "T5_inter" } else { "T6_inter" };
            params.validate(name)?;
            if which == Threshold::T5Inter && params.n_clusters < 4 {
                return Err(range(name, format!("needs C >= 4, got C = {}", params.n_clusters)));
            }
            let l = window(params, name)?;
            if l < 2 || l + 1 > params.n_clusters {
                return Err(range(name, format!("needs 2 <= l <= C - 1, got l = {l}, C = {}", params.n_clusters)));
            }
            Ok(euler_prefactor() * c * c / (m * m) * periodic_core(params.n_clusters, l, delta, t))
        }
        Threshold::T6Intra => {
            params.validate("T6_intra")?;
            let cm = params.cluster_size();
            let l = window(params, "T6_intra")?;
            if cm < 2 || l < 1 || l + 1 > cm {
                return Err(range("T6_intra", format!("needs 1 <= l <= c_M - 1, got l = {l}, c_M = {cm}")));
            }
            Ok(periodic_core(cm, l, delta, t))
        }
    }
}

/// The `l ∈ [2, C−1]` minimising the T5 inter-cluster threshold; lowest on ties.
pub fn optimal_l(params: &TheoryParams) -> Result<usize, TheoryError> {
    if params.n_clusters < 4 {
        return Err(range("optimal_l", format!("needs C >= 4, got C = {}", params.n_clusters)));
    }
    let mut best = (2, f64::INFINITY);
    for l in 2..params.n_clusters {
        let p = TheoryParams {
            l: Some(l),
            ..params.clone()
        };
        let v = edge_threshold(Threshold::T5Inter, &p)?;
        if v < best.1 {
            best = (l, v);
        }
    }
    Ok(best.0)
}

/// `max{ln(T/2ε)/(2δ²), 4K log₂T/c₀}`, scaled by `C/M` for the Rule 2
/// theorems and rounded up.
pub fn burn_in_length(theorem: Theorem, params: &TheoryParams) -> Result<u64, TheoryError> {
    params.validate("burn_in_length")?;
    let t = params.horizon as f64;
    let base = ((t / (2.0 * params.epsilon)).ln() / (2.0 * params.delta * params.delta))
        .max(4.0 * params.n_arms as f64 * t.log2() / params.c0);
    let f = match theorem {
        Theorem::T1 | Theorem::T2 => 1.0,
        _ => params.n_clusters as f64 / params.n_agents as f64,
    };
    Ok((f * base).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C1Variant {
    /// The max-formula value.
    #[default]
    MaxFormula,
    /// `8σ²` times the max-formula value.
    EightSigma2,
}

/// Exploration constant `C1`. Rule 1 (`T2`) uses
/// `max{4(M+2)(1−(1−c₀)/(2(M+2)))²/(3M(1−c₀)), (M+2)(1+4Md²)}` with
/// `d = 1/M²`; the Rule 2 bounds (`T3`..`T6`) divide the second term by `M`.
pub fn exploration_constant(theorem: Theorem, params: &TheoryParams, variant: C1Variant) -> Result<f64, TheoryError> {
    params.validate("C1")?;
    let m = params.n_agents as f64;
    let c0 = params.c0;
    let d = 1.0 / (m * m);
    let first = 4.0 * (m + 2.0) * (1.0 - (1.0 - c0) / (2.0 * (m + 2.0))).powi(2) / (3.0 * m * (1.0 - c0));
    let mut second = (m + 2.0) * (1.0 + 4.0 * m * d * d);
    if !matches!(theorem, Theorem::T1 | Theorem::T2) {
        second /= m;
    }
    let v = first.max(second);
    Ok(match variant {
        C1Variant::MaxFormula => v,
        C1Variant::EightSigma2 => 8.0 * params.sigma2 * v,
    })
}

fn check_gaps(gaps: &[f64]) -> Result<(), TheoryError> {
    let zeros: Vec<usize> = (0..gaps.len()).filter(|&k| gaps[k] == 0.0).collect();
    match zeros.len() {
        0 => Err(TheoryError::NoOptimalArm),
        1 => Ok(()),
        _ => Err(TheoryError::ZeroGap(zeros[1])),
    }
}

/// Regret upper bound of a theorem.
///
/// For `T2..T6`:
/// `L + Σ_{i≠i*} Δ_i (max{f⌈4C1 log T/Δ_i²⌉, 2(K²+MK)} + 2π²/(3(1−7ε)) + K² + (2M−1)K)`
/// with `f = C/M` except for `T2`, plus `l` for `T6`. For `T1`:
/// `Σ_{k≠k*} c log T/(MΔ_k) + K/p^{M²}`, which may be infinite.
pub fn regret_bound(theorem: Theorem, params: &TheoryParams) -> Result<f64, TheoryError> {
    params.validate("regret_bound")?;
    check_gaps(&params.gaps)?;
    let m = params.n_agents as f64;
    let k = params.n_arms as f64;
    let ln_t = (params.horizon as f64).ln();
    let suboptimal = params.gaps.iter().copied().filter(|&g| g > 0.0);
    if theorem == Theorem::T1 {
        let p = params.p_min.ok_or(TheoryError::MissingProbability("T1"))?;
        let head: f64 = suboptimal.map(|g| params.t1_constant * ln_t / (m * g)).sum();
        return Ok(head + k / p.powf(m * m));
    }
    if params.epsilon >= 1.0 / 7.0 {
        return Err(range("regret_bound", "needs epsilon < 1/7 so that 1 - 7 epsilon > 0"));
    }
    let c1 = match params.c1 {
        Some(c1) => c1,
        None => exploration_constant(theorem, params, params.c1_variant)?,
    };
    let f = if theorem == Theorem::T2 {
        1.0
    } else {
        params.n_clusters as f64 / m
    };
    let l_burn = burn_in_length(theorem, params)? as f64;
    let p_a = 1.0 - 7.0 * params.epsilon;
    let tail = 2.0 * std::f64::consts::PI.powi(2) / (3.0 * p_a) + k * k + (2.0 * m - 1.0) * k;
    let sum: f64 = suboptimal
        .map(|g| {
            let lead = f * (4.0 * c1 * ln_t / (g * g)).ceil();
            g * (lead.max(2.0 * (k * k + m * k)) + tail)
        })
        .sum();
    let extra = if theorem == Theorem::T6 {
        window(params, "T6")? as f64
    } else {
        0.0
    };
    Ok(l_burn + sum + extra)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub theorem: Theorem,
    pub applicable: bool,
    /// Why the theorem does not apply, or which assumption failed.
    pub detail: Option<String>,
    pub required_intra: Option<f64>,
    pub required_inter: Option<f64>,
    pub supplied_intra: f64,
    pub supplied_inter: Option<f64>,
    pub intra_pass: bool,
    pub inter_pass: bool,
    pub intra_slack: Option<f64>,
    pub inter_slack: Option<f64>,
    /// `l` used for periodic connectivity.
    pub l: Option<usize>,
    /// The threshold tends to 1 as the horizon grows.
    pub approaches_one_as_t_grows: bool,
}

impl TheoremCheck {
    pub fn pass(&self) -> bool {
        self.applicable && self.intra_pass && self.inter_pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub epsilon: f64,
    pub delta: f64,
    pub c0: f64,
    pub horizon: u64,
    pub checks: Vec<TheoremCheck>,
    /// Theorems whose assumptions decide the overall verdict.
    pub selected: Vec<Theorem>,
    pub all_pass: bool,
}

fn compare(required: Option<f64>, supplied: Option<f64>) -> (bool, Option<f64>) {
    match (required, supplied) {
        (Some(r), Some(s)) => (s >= r, Some(s - r)),
        (None, _) => (true, None),
        // Required but no such pairs exist: vacuous.
        (Some(_), None) => (true, None),
    }
}

fn check_one(theorem: Theorem, bm: &BlockModel, params: &TheoryParams) -> TheoremCheck {
    let p = bm.min_intra();
    let q = bm.min_inter();
    let single = bm.n_clusters() == 1;
    let thr = |w: Threshold, pp: &TheoryParams| edge_threshold(w, pp);
    let mut l_used = None;
    let result: Result<(Option<f64>, Option<f64>), TheoryError> = (|| {
        Ok(match theorem {
            Theorem::T2 => {
                let t = thr(Threshold::T2, params)?;
                (Some(t), Some(t))
            }
            Theorem::T3 | Theorem::T4 if single => (Some(1.0), None),
            Theorem::T3 => (Some(1.0), Some(thr(Threshold::T3, params)?)),
            Theorem::T4 => (Some(1.0), Some(thr(Threshold::T4, params)?)),
            Theorem::T5 => {
                let l = match params.l {
                    Some(l) => l,
                    None => optimal_l(params)?,
                };
                l_used = Some(l);
                let pp = TheoryParams {
                    l: Some(l),
                    ..params.clone()
                };
                (Some(1.0), Some(thr(Threshold::T5Inter, &pp)?))
            }
            Theorem::T6 => {
                let cm = params.min_cluster_size.unwrap_or(bm.min_cluster_size());
                let l = match params.l {
                    Some(l) => l,
                    None if params.n_clusters >= 4 => optimal_l(params)?,
                    None if single => cm.saturating_sub(1),
                    None => cm.saturating_sub(1).min(params.n_clusters - 1),
                };
                l_used = Some(l);
                let pp = TheoryParams {
                    min_cluster_size: Some(cm),
                    l: Some(l),
                    ..params.clone()
                };
                let intra = thr(Threshold::T6Intra, &pp)?;
                let inter = if single {
                    None
                } else {
                    Some(thr(Threshold::T6Inter, &pp)?)
                };
                (Some(intra), inter)
            }
            Theorem::T1 => (Some(0.0), None),
        })
    })();
    let mut check = TheoremCheck {
        theorem,
        applicable: true,
        detail: None,
        required_intra: None,
        required_inter: None,
        supplied_intra: p,
        supplied_inter: q,
        intra_pass: false,
        inter_pass: false,
        intra_slack: None,
        inter_slack: None,
        l: l_used,
        approaches_one_as_t_grows: matches!(theorem, Theorem::T2 | Theorem::T3 | Theorem::T4),
    };
    match result {
        Err(e) => {
            check.applicable = false;
            check.detail = Some(e.to_string());
        }
        Ok((ri, rq)) => {
            let (ip, is) = compare(ri, Some(p));
            let (qp, qs) = compare(rq, q);
            check.required_intra = ri;
            check.required_inter = rq;
            check.intra_pass = ip;
            check.inter_pass = qp;
            check.intra_slack = is;
            check.inter_slack = qs;
            let mut failures = vec![];
            if !ip {
                failures.push(format!("intra-cluster probability {p} below required {}", ri.unwrap_or(0.0)));
            }
            if !qp {
                failures.push(format!(
                    "inter-cluster probability {} below required {}",
                    q.unwrap_or(0.0),
                    rq.unwrap_or(0.0)
                ));
            }
            if !failures.is_empty() {
                check.detail = Some(failures.join("; "));
            }
        }
    }
    check
}

/// Evaluates T2–T6 against the block model. With `selected = None` the
/// verdict covers every applicable theorem.
pub fn check_assumptions(bm: &BlockModel, params: &TheoryParams, selected: Option<&[Theorem]>) -> AssumptionReport {
    let checks: Vec<TheoremCheck> = Theorem::WITH_THRESHOLDS
        .iter()
        .map(|&t| check_one(t, bm, params))
        .collect();
    let selected: Vec<Theorem> = match selected {
        Some(s) => s.to_vec(),
        None => checks.iter().filter(|c| c.applicable).map(|c| c.theorem).collect(),
    };
    let all_pass = selected
        .iter()
        .all(|t| checks.iter().find(|c| c.theorem == *t).is_none_or(TheoremCheck::pass));
    AssumptionReport {
        epsilon: params.epsilon,
        delta: params.delta,
        c0: params.c0,
        horizon: params.horizon,
        checks,
        selected,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize, c: usize, t: u64, delta: f64) -> TheoryParams {
        TheoryParams {
            delta,
            ..TheoryParams::new(m, c, 3, t)
        }
    }

    #[test]
    fn small_constants() {
        assert!((factorial_ratio(5, 2) - 1.0 / 3.0).abs() < 1e-12);
        assert!((euler_prefactor() - 1.581977).abs() < 1e-6);
        let t2 = edge_threshold(Threshold::T2, &params(2, 1, 10, 0.1)).unwrap();
        assert!((t2 - 0.9999938).abs() < 1e-7);
    }

    #[test]
    fn range_errors_name_the_theorem() {
        let e = edge_threshold(Threshold::T5Inter, &params(6, 3, 100, 0.1)).unwrap_err();
        assert!(e.to_string().starts_with("T5_inter"));
        let p = TheoryParams {
            l: Some(4),
            ..params(8, 4, 100, 0.1)
        };
        assert!(edge_threshold(Threshold::T5Inter, &p).is_err());
        assert!(edge_threshold(Threshold::T3, &params(6, 1, 100, 0.1)).is_err());
        assert!(edge_threshold(Threshold::T2, &params(1, 1, 100, 0.1)).is_err());
        assert!(edge_threshold(Threshold::T2, &params(4, 1, 100, 1.5)).is_err());
    }

    #[test]
    fn thresholds_in_unit_interval_and_t4_below_t3() {
        for m in [4usize, 6, 10, 20] {
            for c in 2..=m {
                for t in [10u64, 1000, 1_000_000] {
                    for delta in [0.01, 0.1, 0.4] {
                        let p = params(m, c, t, delta);
                        let t3 = edge_threshold(Threshold::T3, &p).unwrap();
                        let t4 = edge_threshold(Threshold::T4, &p).unwrap();
                        assert!(t3 > 0.0 && t3 <= 1.0 && t4 > 0.0 && t4 <= 1.0);
                        assert!(t4 <= t3);
                        if c >= 4 {
                            let t5 = edge_threshold(Threshold::T5Inter, &p).unwrap();
                            assert!(t5 > 0.0 && t5 <= 1.0, "T5 {t5} at M={m} C={c}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn t3_decreases_in_m() {
        for c in 2..6 {
            let mut prev = f64::INFINITY;
            for m in c..40 {
                let v = edge_threshold(Threshold::T3, &params(m, c, 1000, 0.1)).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn optimal_l_examples() {
        let p = params(8, 4, 1000, 0.1);
        assert!(optimal_l(&params(8, 3, 1000, 0.1)).is_err());
        let l = optimal_l(&p).unwrap();
        assert!((2..=3).contains(&l));
        let p = params(12, 8, 1000, 0.1);
        let scan: Vec<f64> = (2..8)
            .map(|l| edge_threshold(Threshold::T5Inter, &TheoryParams { l: Some(l), ..p.clone() }).unwrap())
            .collect();
        let mut best = 0;
        for (i, v) in scan.iter().enumerate() {
            if *v < scan[best] {
                best = i;
            }
        }
        assert_eq!(optimal_l(&p).unwrap(), best + 2);
    }

    #[test]
    fn burn_in_and_c1() {
        let p = params(10, 2, 10_000, 0.1);
        let l2 = burn_in_length(Theorem::T2, &p).unwrap();
        let l3 = burn_in_length(Theorem::T3, &p).unwrap();
        let base = ((10_000f64 / 0.2).ln() / 0.02).max(12.0 * 10_000f64.log2() / 0.5);
        assert_eq!(l2, base.ceil() as u64);
        assert_eq!(l3, (0.2 * base).ceil() as u64);
        let c2 = exploration_constant(Theorem::T2, &p, C1Variant::MaxFormula).unwrap();
        let c3 = exploration_constant(Theorem::T3, &p, C1Variant::MaxFormula).unwrap();
        assert!(c3 <= c2);
        let c8 = exploration_constant(Theorem::T3, &p, C1Variant::EightSigma2).unwrap();
        assert!((c8 - 8.0 * p.sigma2 * c3).abs() < 1e-12);
    }

    #[test]
    fn bound_properties() {
        let mut p = params(10, 1, 1000, 0.1);
        p.gaps = vec![0.0, 0.1, 0.3];
        let mut prev = 0.0;
        for t in [100u64, 1000, 10_000, 100_000] {
            p.horizon = t;
            let b = regret_bound(Theorem::T3, &p).unwrap();
            assert!(b > prev);
            prev = b;
        }
        p.gaps = vec![0.0, 0.0, 0.3];
        assert_eq!(regret_bound(Theorem::T3, &p), Err(TheoryError::ZeroGap(1)));
        p.gaps = vec![0.2, 0.5];
        assert_eq!(regret_bound(Theorem::T3, &p), Err(TheoryError::NoOptimalArm));
        p.gaps = vec![0.0, 0.1];
        assert!(regret_bound(Theorem::T1, &p).is_err());
        p.p_min = Some(1e-4);
        let t1 = regret_bound(Theorem::T1, &p).unwrap();
        assert!(t1.is_infinite());
        p.p_min = Some(1.0);
        let t1 = regret_bound(Theorem::T1, &p).unwrap();
        let expect = 8.0 * (100_000f64).ln() / (10.0 * 0.1) + 3.0;
        assert!((t1 - expect).abs() < 1e-9);
    }

    #[test]
    fn assumption_examples() {
        let bm = BlockModel::two_level(8, 2, 1.0, 1.0).unwrap();
        let p = params(8, 2, 100, 0.1);
        let r = check_assumptions(&bm, &p, None);
        assert!(r.all_pass);
        assert_eq!((r.epsilon, r.delta, r.c0), (0.1, 0.1, 0.5));
        let bm0 = BlockModel::two_level(8, 2, 1.0, 0.0).unwrap();
        let r = check_assumptions(&bm0, &p, None);
        assert!(!r.all_pass);
        let t3 = r.checks.iter().find(|c| c.theorem == Theorem::T3).unwrap();
        assert!(!t3.inter_pass && t3.intra_pass);
        assert!(t3.detail.as_ref().unwrap().contains("inter-cluster"));
        let t5 = r.checks.iter().find(|c| c.theorem == Theorem::T5).unwrap();
        assert!(!t5.applicable);
    }
}
