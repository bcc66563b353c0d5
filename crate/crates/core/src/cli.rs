//! Command-line front end: JSON experiment configs, the `run`, `sweep`,
//! `detect` and `check` commands, and CSV/JSON output.
//!
//! Exit codes: 0 success, 1 assumption check failed, 2 input error,
//! 3 I/O error while writing outputs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{adjacency_matrix, covariate_matrix, detect_clusters, match_labels, IrLssStatus};
use crate::environment::{global_stats, RewardModel};
use crate::graph::{load_edge_list, BlockModel};
use crate::policy::ForcedExploration;
use crate::rng::{substream, Stream};
use crate::sim::{
    batch_seeds, event_frequencies, run_batch, Algorithm, BatchSummary, DetectionParams, DetectionSummary,
    EventFrequencies, ExperimentConfig, GraphSource, RunResult,
};
use crate::theory::{burn_in_length, check_assumptions, exploration_constant, C1Variant, Theorem, TheoryParams};

pub const REGRET_CSV_HEADER: &str = "t,algorithm,mean_regret,ci_lower,ci_upper,n_runs";
pub const SWEEP_CSV_HEADER: &str = "axis,value,algorithm,final_mean_regret,ci_lower,ci_upper,n_runs";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "bandit-sbm", version, about = "Multi-agent UCB bandits on stochastic-block-model graphs")]
pub struct Cli {
    /// Maximum number of episodes run concurrently.
    #[arg(long, global = true, env = "BANDIT_SBM_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SeedArgs {
    /// Number of seeds derived from the config's master seed.
    #[arg(long, conflicts_with = "seed_list")]
    pub seeds: Option<usize>,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured algorithm and write regret.csv and results.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Repeat `run` over the values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Detect clusters in an edge list with per-vertex covariates.
    Detect {
        edges: PathBuf,
        covariates: PathBuf,
        #[arg(long = "C", short = 'C', visible_alias = "clusters")]
        clusters: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ground-truth labels, one per vertex.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the edge-probability assumptions of the regret theorems.
    Check {
        config: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    #[value(name = "M")]
    M,
    #[value(name = "C")]
    C,
    #[value(name = "p_intra")]
    PIntra,
    #[value(name = "q_inter")]
    QInter,
    #[value(name = "K")]
    K,
    #[value(name = "sigma")]
    Sigma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::M => "M",
            SweepAxis::C => "C",
            SweepAxis::PIntra => "p_intra",
            SweepAxis::QInter => "q_inter",
            SweepAxis::K => "K",
            SweepAxis::Sigma => "sigma",
        }
    }
}

fn default_gap() -> f64 {
    0.1
}
fn default_spread() -> f64 {
    0.05
}
fn default_one() -> u64 {
    1
}
fn default_window() -> usize {
    1
}
fn default_runs() -> usize {
    25
}
fn default_checkpoints() -> usize {
    100
}
fn default_tenth() -> f64 {
    0.1
}

/// JSON experiment description. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub p_intra: f64,
    pub q_inter: f64,
    pub sigma: f64,
    pub algorithms: Vec<Algorithm>,
    /// Agent labels; contiguous balanced blocks when absent.
    #[serde(default)]
    pub assignment: Option<Vec<usize>>,
    /// `C × K` means; a seeded synthetic instance when absent.
    #[serde(default)]
    pub cluster_means: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_gap")]
    pub gap_min: f64,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub means_seed: u64,
    /// Edge list used as the graph every round, relative to the config file.
    #[serde(default)]
    pub static_graph: Option<PathBuf>,
    /// Burn-in length; derived from the theory formula when absent.
    #[serde(rename = "L", default)]
    pub l: Option<u64>,
    /// Exploration constant; `2σ²` when absent unless `c0` is given.
    #[serde(rename = "C1", default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c1_variant: C1Variant,
    #[serde(default = "default_one")]
    pub tau: u64,
    #[serde(default)]
    pub forced: ForcedExploration,
    /// Round-robin rounds after detection; `M` when absent.
    #[serde(default)]
    pub propagation_rounds: Option<u64>,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default = "default_window")]
    pub event_window: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Include every run's full regret trace in results.json.
    #[serde(default)]
    pub full_trace: bool,
    #[serde(default = "default_tenth")]
    pub epsilon: f64,
    #[serde(default = "default_tenth")]
    pub delta: f64,
    #[serde(default)]
    pub c0: Option<f64>,
    /// Window length for the periodic-connectivity theorems.
    #[serde(default)]
    pub l_window: Option<usize>,
    /// Theorems judged by `check`; every applicable one when absent.
    #[serde(default)]
    pub theorems: Option<Vec<Theorem>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub iters: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

const DEFAULT_C0: f64 = 0.5;

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(g) = &cfg.static_graph {
            if g.is_relative() {
                cfg.static_graph = Some(path.parent().unwrap_or(Path::new(".")).join(g));
            }
        }
        Ok(cfg)
    }

    pub fn block_model(&self) -> Result<BlockModel, CliError> {
        let bm = BlockModel::two_level(self.m, self.c, self.p_intra, self.q_inter).map_err(input)?;
        match &self.assignment {
            Some(a) => {
                if a.len() != self.m {
                    return Err(input(format!("assignment has {} labels for M = {}", a.len(), self.m)));
                }
                BlockModel::new(a.clone(), bm.probs().to_vec()).map_err(input)
            }
            None => Ok(bm),
        }
    }

    pub fn reward_model(&self) -> Result<RewardModel, CliError> {
        let rm = match &self.cluster_means {
            Some(means) => RewardModel::new(means.clone(), self.sigma),
            None => RewardModel::synthetic(self.c, self.k, self.sigma, self.gap_min, self.spread, self.means_seed),
        }
        .map_err(input)?;
        if rm.n_arms() != self.k {
            return Err(input(format!("cluster_means have {} arms, K = {}", rm.n_arms(), self.k)));
        }
        Ok(rm)
    }

    pub fn theory_params(&self) -> TheoryParams {
        TheoryParams {
            epsilon: self.epsilon,
            delta: self.delta,
            c0: self.c0.unwrap_or(DEFAULT_C0),
            sigma2: self.sigma * self.sigma,
            l: self.l_window,
            c1: self.c1,
            c1_variant: self.c1_variant,
            ..TheoryParams::new(self.m, self.c, self.k, self.t)
        }
    }

    /// Burn-in length and `C1` used for `alg`.
    pub fn resolved_parameters(&self, alg: Algorithm) -> Result<(u64, f64), CliError> {
        let theorem = match alg {
            Algorithm::Rule1 => Theorem::T2,
            _ => Theorem::T3,
        };
        let params = self.theory_params();
        let l = match (self.l, alg.uses_burn_in()) {
            (Some(l), _) => l,
            (None, true) => burn_in_length(theorem, &params).map_err(input)?.max(self.k as u64),
            (None, false) => 0,
        };
        let c1 = match (self.c1, self.c0) {
            (Some(c1), _) => c1,
            (None, Some(_)) => exploration_constant(theorem, &params, self.c1_variant).map_err(input)?,
            (None, None) => 2.0 * self.sigma * self.sigma,
        };
        Ok((l, c1))
    }

    /// Validated simulation config for one algorithm.
    pub fn experiment(&self, alg: Algorithm) -> Result<ExperimentConfig, CliError> {
        let bm = self.block_model()?;
        let rm = self.reward_model()?;
        let (l, c1) = self.resolved_parameters(alg)?;
        let mut cfg = ExperimentConfig::new(bm, rm, self.t, l, alg);
        cfg.c1 = c1;
        cfg.tau = self.tau;
        cfg.forced = self.forced;
        cfg.event_window = self.event_window;
        if let Some(p) = self.propagation_rounds {
            cfg.propagation_rounds = p;
        }
        let defaults = DetectionParams::default();
        cfg.detection = DetectionParams {
            sigma2: self.detection.sigma2,
            iters: self.detection.iters.unwrap_or(defaults.iters),
            seed: self.detection.seed,
        };
        if let Some(path) = &self.static_graph {
            let text = fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
            cfg.graph_source = GraphSource::Static(load_edge_list(&text, self.m).map_err(input)?);
        }
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }

    fn validate_all(&self) -> Result<Vec<ExperimentConfig>, CliError> {
        if self.algorithms.is_empty() {
            return Err(input("algorithms must list at least one algorithm"));
        }
        if self.checkpoints == 0 {
            return Err(input("checkpoints must be positive"));
        }
        self.algorithms.iter().map(|&a| self.experiment(a)).collect()
    }

    fn seeds(&self, args: &SeedArgs) -> Result<Vec<u64>, CliError> {
        let seeds = match (&args.seed_list, args.seeds) {
            (Some(list), _) => list.clone(),
            (None, Some(n)) => batch_seeds(self.master_seed, n),
            (None, None) => batch_seeds(self.master_seed, self.n_runs),
        };
        if seeds.is_empty() {
            return Err(input("at least one seed is required"));
        }
        Ok(seeds)
    }

    fn with_axis(&self, axis: SweepAxis, raw: &str) -> Result<Self, CliError> {
        let mut cfg = self.clone();
        let int = || raw.parse::<usize>().map_err(|_| input(format!("{} = {raw:?} is not an integer", axis.name())));
        let real = || raw.parse::<f64>().map_err(|_| input(format!("{} = {raw:?} is not a number", axis.name())));
        match axis {
            SweepAxis::M => cfg.m = int()?,
            SweepAxis::C => cfg.c = int()?,
            SweepAxis::K => cfg.k = int()?,
            SweepAxis::PIntra => cfg.p_intra = real()?,
            SweepAxis::QInter => cfg.q_inter = real()?,
            SweepAxis::Sigma => cfg.sigma = real()?,
        }
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    seed: u64,
    total_regret: f64,
    final_regret: f64,
    counts: &'a [Vec<u64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    detected_assignment: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detection: Option<&'a DetectionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_tilde_mu: Option<&'a [Vec<f64>]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regret_trace: Option<&'a [f64]>,
}

#[derive(Debug, Serialize)]
struct AlgorithmReport<'a> {
    algorithm: Algorithm,
    burn_in: u64,
    c1: f64,
    propagation_rounds: Option<u64>,
    summary: &'a BatchSummary,
    event_frequencies: EventFrequencies,
    runs: Vec<RunMeta<'a>>,
}

#[derive(Debug, Serialize)]
struct ResultsFile<'a> {
    config: &'a CliConfig,
    seeds: &'a [u64],
    optimal_arm: usize,
    global_means: &'a [f64],
    algorithms: Vec<AlgorithmReport<'a>>,
}

/// Outcome of one algorithm's batch.
pub struct AlgorithmRun {
    pub config: ExperimentConfig,
    pub summary: BatchSummary,
    pub results: Vec<RunResult>,
}

/// Runs every configured algorithm on the same seeds.
pub fn execute(cfg: &CliConfig, seeds: &[u64]) -> Result<Vec<AlgorithmRun>, CliError> {
    cfg.validate_all()?
        .into_iter()
        .map(|exp| {
            let (summary, results) = run_batch(&exp, seeds, cfg.checkpoints).map_err(input)?;
            Ok(AlgorithmRun {
                config: exp,
                summary,
                results,
            })
        })
        .collect()
}

pub fn regret_csv(runs: &[AlgorithmRun]) -> String {
    let mut out = String::from(REGRET_CSV_HEADER);
    out.push('\n');
    for run in runs {
        let s = &run.summary;
        for c in &s.checkpoints {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.t,
                s.algorithm.name(),
                c.mean_regret,
                c.mean_regret - c.ci_half_width,
                c.mean_regret + c.ci_half_width,
                s.n_runs
            );
        }
    }
    out
}

fn results_json(cfg: &CliConfig, seeds: &[u64], runs: &[AlgorithmRun]) -> Result<String, CliError> {
    let stats = global_stats(&runs[0].config.rewards, &runs[0].config.block_model).map_err(input)?;
    let algorithms = runs
        .iter()
        .map(|run| AlgorithmReport {
            algorithm: run.config.algorithm,
            burn_in: run.config.burn_in,
            c1: run.config.c1,
            propagation_rounds: (run.config.algorithm == Algorithm::Rule2Detected).then_some(run.config.propagation_rounds),
            summary: &run.summary,
            event_frequencies: event_frequencies(&run.results),
            runs: run
                .results
                .iter()
                .map(|r| RunMeta {
                    seed: r.seed,
                    total_regret: r.total_regret,
                    final_regret: *r.regret_trace.last().unwrap_or(&0.0),
                    counts: &r.counts.counts,
                    detected_assignment: r.detected_assignment.as_deref(),
                    detection: r.detection.as_ref(),
                    final_tilde_mu: r.final_tilde_mu.as_deref(),
                    regret_trace: cfg.full_trace.then_some(r.regret_trace.as_slice()),
                })
                .collect(),
        })
        .collect();
    let file = ResultsFile {
        config: cfg,
        seeds,
        optimal_arm: stats.optimal_arm,
        global_means: &stats.global_means,
        algorithms,
    };
    serde_json::to_string_pretty(&file).map_err(|e| CliError::Io(e.to_string()))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn write_run_outputs(dir: &Path, cfg: &CliConfig, seeds: &[u64], runs: &[AlgorithmRun]) -> Result<(), CliError> {
    create_dir(dir)?;
    write(&dir.join("regret.csv"), &regret_csv(runs))?;
    let mut json = results_json(cfg, seeds, runs)?;
    json.push('\n');
    write(&dir.join("results.json"), &json)
}

pub fn cmd_run(config: &Path, out: &Path, seeds: &SeedArgs) -> Result<(), CliError> {
    let cfg = CliConfig::load(config)?;
    let seeds = cfg.seeds(seeds)?;
    let runs = execute(&cfg, &seeds)?;
    write_run_outputs(out, &cfg, &seeds, &runs)
}

/// Runs every sweep value; a failing value is reported and skipped. Returns
/// an input error naming the failed values, if any.
pub fn cmd_sweep(config: &Path, out: &Path, axis: SweepAxis, values: &[String], seeds: &SeedArgs) -> Result<(), CliError> {
    let base = CliConfig::load(config)?;
    let seeds = base.seeds(seeds)?;
    create_dir(out)?;
    let mut summary = String::from(SWEEP_CSV_HEADER);
    summary.push('\n');
    let mut failed = vec![];
    for raw in values {
        let attempt = base.with_axis(axis, raw).and_then(|cfg| execute(&cfg, &seeds).map(|runs| (cfg, runs)));
        match attempt {
            Ok((cfg, runs)) => {
                write_run_outputs(&out.join(format!("{}={raw}", axis.name())), &cfg, &seeds, &runs)?;
                for run in &runs {
                    let (mean, hw) = (run.summary.final_mean(), run.summary.final_half_width());
                    let _ = writeln!(
                        summary,
                        "{},{raw},{},{mean},{},{},{}",
                        axis.name(),
                        run.config.algorithm.name(),
                        mean - hw,
                        mean + hw,
                        run.summary.n_runs
                    );
                }
            }
            Err(CliError::Input(msg)) => {
                eprintln!("error: {}={raw}: {msg}", axis.name());
                failed.push(raw.clone());
            }
            Err(e) => return Err(e),
        }
    }
    write(&out.join("sweep_summary.csv"), &summary)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(input(format!("sweep values failed: {}", failed.join(","))))
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

/// Parses a headerless CSV of floats, one row per vertex.
pub fn parse_covariates(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            line.split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| input(format!("covariates line {}: {f:?} is not a number", i + 1)))
                })
                .collect()
        })
        .collect()
}

/// Parses labels separated by commas or whitespace.
pub fn parse_labels(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| input(format!("label {s:?} is not a nonnegative integer"))))
        .collect()
}

#[derive(Debug, Serialize)]
struct AssignmentFile {
    n_clusters: usize,
    labels: Vec<usize>,
    status: IrLssStatus,
    iterations: usize,
    covariate_only_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_detect(
    edges: &Path,
    covariates: &Path,
    clusters: usize,
    sigma2: f64,
    iters: usize,
    seed: u64,
    truth: Option<&Path>,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let rows = parse_covariates(&read_input(covariates)?)?;
    let graph = load_edge_list(&read_input(edges)?, rows.len()).map_err(input)?;
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(input(format!("sigma2 = {sigma2} must be positive")));
    }
    let truth = truth.map(|p| read_input(p).and_then(|t| parse_labels(&t))).transpose()?;
    let a = adjacency_matrix(&graph);
    let v = covariate_matrix(&rows).map_err(input)?;
    let mut rng = substream(seed, Stream::Detection);
    let det = detect_clusters(&a, &v, clusters, sigma2, iters, &mut rng).map_err(input)?;
    let labels = det.assignment.into_labels();
    let accuracy = match &truth {
        Some(t) => Some(match_labels(&labels, t, clusters).map_err(input)?.accuracy),
        None => None,
    };
    if let Some(acc) = accuracy {
        writeln!(stdout, "accuracy: {acc}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    let file = AssignmentFile {
        n_clusters: clusters,
        labels,
        status: det.status,
        iterations: det.iterations,
        covariate_only_steps: det.covariate_only_steps,
        accuracy,
    };
    let mut json = serde_json::to_string_pretty(&file).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(out, &json)
}

/// Returns whether every selected theorem's assumptions hold.
pub fn cmd_check(config: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<bool, CliError> {
    let cfg = CliConfig::load(config)?;
    let bm = cfg.block_model()?;
    let mut params = cfg.theory_params();
    if let Ok(rm) = cfg.reward_model() {
        if let Ok(stats) = global_stats(&rm, &bm) {
            params.gaps = stats.gaps;
        }
    }
    if !(params.epsilon > 0.0 && params.epsilon < 1.0 && params.delta > 0.0 && params.delta < 1.0) {
        return Err(input("epsilon and delta must lie in (0, 1)"));
    }
    let report = check_assumptions(&bm, &params, cfg.theorems.as_deref());
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    stdout.write_all(json.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(path) = out {
        write(path, &json)?;
    }
    Ok(report.all_pass)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, out, seeds } => cmd_run(&config, &out, &seeds).map(|_| 0),
        Command::Sweep {
            config,
            out,
            axis,
            values,
            seeds,
        } => cmd_sweep(&config, &out, axis, &values, &seeds).map(|_| 0),
        Command::Detect {
            edges,
            covariates,
            clusters,
            sigma2,
            iters,
            seed,
            truth,
            out,
        } => {
            cmd_detect(&edges, &covariates, clusters, sigma2, iters, seed, truth.as_deref(), &out, stdout).map(|_| 0)
        }
        Command::Check { config, out } => {
            cmd_check(&config, out.as_deref(), stdout).map(|pass| if pass { 0 } else { 1 })
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout())
}

/// [`run_cli`] with command output (reports, accuracy lines) sent to
/// `stdout`. Diagnostics still go to stderr.
pub fn run_cli_with<I, T>(args: I, stdout: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.jobs {
        Some(0) => Err(input("--jobs must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli, stdout)),
            Err(e) => Err(CliError::Io(format!("cannot start worker pool: {e}"))),
        },
        None => dispatch(cli, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"M": 4, "C": 2, "K": 3, "T": 200, "p_intra": 1.0, "q_inter": 0.5,
            "sigma": 0.1, "algorithms": ["rule1", "rule2_known"], "L": 6}"#
    }

    #[test]
    fn parse_rejects_unknown_and_missing_keys() {
        assert!(CliConfig::parse(minimal()).is_ok());
        let e = CliConfig::parse(r#"{"M": 4, "C": 2, "K": 3, "p_intra": 1.0, "q_inter": 0.5, "sigma": 0.1, "algorithms": []}"#)
            .unwrap_err();
        assert!(e.to_string().contains("`T`"), "{e}");
        let text = minimal().replace("\"L\": 6", "\"L\": 6, \"bogus\": 1");
        assert!(CliConfig::parse(&text).unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn resolved_defaults() {
        let mut cfg = CliConfig::parse(minimal()).unwrap();
        let (l, c1) = cfg.resolved_parameters(Algorithm::Rule1).unwrap();
        assert_eq!(l, 6);
        assert!((c1 - 0.02).abs() < 1e-15);
        cfg.l = None;
        let p = cfg.theory_params();
        assert_eq!(cfg.resolved_parameters(Algorithm::Rule1).unwrap().0, burn_in_length(Theorem::T2, &p).unwrap());
        assert_eq!(cfg.resolved_parameters(Algorithm::LocalUcb).unwrap().0, 0);
        cfg.c0 = Some(0.5);
        let c1 = cfg.resolved_parameters(Algorithm::Rule2Known).unwrap().1;
        assert_eq!(c1, exploration_constant(Theorem::T3, &p, C1Variant::MaxFormula).unwrap());
    }

    #[test]
    fn csv_shape() {
        let cfg = CliConfig::parse(minimal()).unwrap();
        let runs = execute(&cfg, &[1, 2]).unwrap();
        let csv = regret_csv(&runs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], REGRET_CSV_HEADER);
        assert_eq!(lines.len(), 1 + 100 * 2);
        for line in &lines[1..] {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 6);
            let (m, lo, hi): (f64, f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap());
            assert!(lo <= m && m <= hi);
            assert_eq!(f[5], "2");
        }
    }

    #[test]
    fn sweep_values_apply() {
        let cfg = CliConfig::parse(minimal()).unwrap();
        assert_eq!(cfg.with_axis(SweepAxis::C, "1").unwrap().c, 1);
        assert_eq!(cfg.with_axis(SweepAxis::Sigma, "0.5").unwrap().sigma, 0.5);
        assert!(cfg.with_axis(SweepAxis::M, "x").is_err());
        assert!(cfg.with_axis(SweepAxis::C, "9").unwrap().validate_all().is_err());
    }

    #[test]
    fn label_and_covariate_parsing() {
        assert_eq!(parse_labels("0 1\n1,0\n").unwrap(), vec![0, 1, 1, 0]);
        assert!(parse_labels("0 -1").is_err());
        assert_eq!(parse_covariates("1,2\n\n3,4.5\n").unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.5]]);
        assert!(parse_covariates("1,a").is_err());
    }
}
