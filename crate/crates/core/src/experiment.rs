//! Experiment drivers: benchmark curves, speedup tables, step-size grids and
//! their CSV renderings.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::analysis::{self, ConvergenceParams, LemmaReport};
use crate::data::{self, LowRankSpec};
use crate::engine::{self, AlgoConfig, Algorithm, CostModel, RunOptions, RunRecord, SpeedupRow};
use crate::error::{Error, Result};
use crate::model::{CompositeProblem, Reference, Regularizer};

pub const METRICS_HEADER: &str =
    "algorithm,seed,workers,epoch,grad_evals,sim_time,subopt,dist_sq,mean_v_dev,max_staleness,error";
pub const SPEEDUP_HEADER: &str = "algorithm,workers,sim_time_to_target,speedup";
pub const LEMMA_HEADER: &str = "stage,lhs,rhs_term1,rhs_term2,holds,epsilon_observed";
pub const GRID_HEADER: &str = "algorithm,eta,beta,mean_final_subopt";

pub const GRID_ETAS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const GRID_BETAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegChoice {
    None,
    L1,
    L2,
    Elastic,
    #[default]
    Nuclear,
}

impl RegChoice {
    /// All weights come from `λ2`; elastic net uses it for both parts.
    pub fn build(self, lambda2: f64) -> Regularizer {
        match self {
            RegChoice::None => Regularizer::None,
            RegChoice::L1 => Regularizer::L1(lambda2),
            RegChoice::L2 => Regularizer::SquaredL2(lambda2),
            RegChoice::Elastic => Regularizer::ElasticNet { l1: lambda2, l2: lambda2 },
            RegChoice::Nuclear => Regularizer::Nuclear(lambda2),
        }
    }
}

impl std::str::FromStr for RegChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => RegChoice::None,
            "l1" => RegChoice::L1,
            "l2" => RegChoice::L2,
            "elastic" => RegChoice::Elastic,
            "nuclear" => RegChoice::Nuclear,
            _ => return Err(Error::InvalidParameter(format!("unknown regularizer '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub workers: usize,
    /// Defaults to `1/(8·L_max)`.
    pub eta: Option<f64>,
    pub beta: f64,
    pub stages: usize,
    /// Defaults to `2n`.
    pub inner: Option<usize>,
    pub data: LowRankSpec,
    pub reg: RegChoice,
    pub cost: CostModel,
    pub seeds: Vec<u64>,
    pub instrument: bool,
    pub target_subopt: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithms: vec![Algorithm::DapSvrg],
            workers: 4,
            eta: None,
            beta: 0.5,
            stages: 10,
            inner: None,
            data: LowRankSpec::desk(0),
            reg: RegChoice::Nuclear,
            cost: CostModel::default(),
            seeds: vec![0],
            instrument: false,
            target_subopt: 1e-6,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("seed list is empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("no algorithm requested".into()));
        }
        if !(self.target_subopt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target suboptimality must be positive, got {}",
                self.target_subopt
            )));
        }
        self.cost.validate()
    }

    pub fn build_problem(&self) -> Result<CompositeProblem> {
        let d = data::generate_lowrank(&self.data)?;
        d.problem.with_regularizer(self.reg.build(self.data.lambda2))
    }

    pub fn default_eta(problem: &CompositeProblem) -> f64 {
        1.0 / (8.0 * problem.constants().sample_smoothness)
    }

    pub fn algo_config(&self, problem: &CompositeProblem, algorithm: Algorithm, seed: u64) -> AlgoConfig {
        let eta = self.eta.unwrap_or_else(|| Self::default_eta(problem));
        let inner = self.inner.unwrap_or(2 * problem.n());
        let mut cfg =
            AlgoConfig::new(algorithm, eta, self.stages, inner, self.workers).with_seed(seed).with_cost(self.cost);
        cfg.beta = self.beta;
        cfg
    }
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub metrics_csv: String,
    pub lemma_csv: Option<String>,
    pub lemma: Option<Vec<LemmaReport>>,
    pub summary: String,
    pub reference: Reference,
    /// Per-cell outcome in `(algorithm, seed)` order.
    pub runs: Vec<(Algorithm, u64, Result<RunRecord>)>,
}

impl BenchmarkOutput {
    pub fn any_diverged(&self) -> bool {
        self.runs.iter().any(|(_, _, r)| matches!(r, Err(Error::Divergence { .. })))
    }
}

/// Builds the data, solves for the reference and runs every
/// `(algorithm, seed)` cell on the same problem.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let reference = analysis::solve_reference(&problem, analysis::REFERENCE_TOL, analysis::REFERENCE_MAX_ITERS)?;
    run_benchmark_on(cfg, &problem, &reference)
}

pub fn run_benchmark_on(
    cfg: &ExperimentConfig,
    problem: &CompositeProblem,
    reference: &Reference,
) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let cells: Vec<(Algorithm, u64)> =
        cfg.algorithms.iter().flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s))).collect();
    for &(a, s) in &cells {
        cfg.algo_config(problem, a, s).validate()?;
    }
    let opts = RunOptions { instrument: cfg.instrument, reference: Some(reference.clone()), ..Default::default() };
    let runs: Vec<(Algorithm, u64, Result<RunRecord>)> = cells
        .par_iter()
        .map(|&(a, s)| (a, s, engine::run_with(problem, &cfg.algo_config(problem, a, s), &opts)))
        .collect();

    let mut metrics = String::new();
    writeln!(metrics, "{METRICS_HEADER}").unwrap();
    let mut summary = String::new();
    writeln!(
        summary,
        "{:<14} {:>6} {:>8} {:>10} {:>24} {:>14} {:>9}  error",
        "algorithm", "seed", "workers", "epoch", "final_subopt", "sim_time", "staleness"
    )
    .unwrap();
    for (a, seed, result) in &runs {
        match result {
            Ok(rec) => {
                let rows = analysis::epoch_metrics(rec, reference.p_star, &reference.x_star);
                for r in &rows {
                    writeln!(
                        metrics,
                        "{},{},{},{:.6},{},{},{},{},{},{},",
                        a,
                        seed,
                        cfg.workers,
                        r.epoch,
                        r.grad_evals,
                        fmt_float(r.sim_time),
                        fmt_float(r.subopt),
                        fmt_float(r.dist_sq),
                        fmt_opt(r.mean_v_dev),
                        r.max_staleness
                    )
                    .unwrap();
                }
                let last = rows.last().expect("a run has at least its starting row");
                writeln!(
                    summary,
                    "{:<14} {:>6} {:>8} {:>10.3} {:>24.16e} {:>14.3} {:>9}",
                    a, seed, cfg.workers, last.epoch, last.subopt, last.sim_time, last.max_staleness
                )
                .unwrap();
            }
            Err(e) => {
                writeln!(metrics, "{},{},{},,,,,,,,{}", a, seed, cfg.workers, csv_field(&e.to_string())).unwrap();
                writeln!(
                    summary,
                    "{:<14} {:>6} {:>8} {:>10} {:>24} {:>14} {:>9}  {}",
                    a, seed, cfg.workers, "-", "-", "-", "-", e
                )
                .unwrap();
            }
        }
    }

    let (lemma, lemma_csv) = if cfg.instrument {
        let alg = cfg.algorithms[0];
        let base = cfg.algo_config(problem, alg, cfg.seeds[0]);
        let params = lemma_params(problem, &base);
        let reports = analysis::lemma1_seed_average(problem, &base, &params, &cfg.seeds, Some(reference))?;
        let csv = lemma_csv(&reports);
        (Some(reports), Some(csv))
    } else {
        (None, None)
    };

    Ok(BenchmarkOutput { metrics_csv: metrics, lemma_csv, lemma, summary, reference: reference.clone(), runs })
}

/// Variance-bound parameters for a run: per-sample smoothness, `τ = K − 1`.
pub fn lemma_params(problem: &CompositeProblem, cfg: &AlgoConfig) -> ConvergenceParams {
    let c = problem.constants();
    ConvergenceParams {
        mu: c.strong_convexity,
        l: c.sample_smoothness,
        eta: cfg.eta,
        tau: (cfg.workers - 1) as f64,
        m: cfg.inner_iters,
        epsilon: 0.0,
    }
}

pub fn lemma_csv(reports: &[LemmaReport]) -> String {
    let mut out = String::new();
    writeln!(out, "{LEMMA_HEADER}").unwrap();
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.stage,
            fmt_float(r.lhs),
            fmt_float(r.rhs_term1),
            fmt_float(r.rhs_term2),
            r.holds,
            fmt_opt(r.epsilon_observed)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupTable {
    pub rows: Vec<(Algorithm, SpeedupRow)>,
}

impl SpeedupTable {
    pub fn get(&self, algorithm: Algorithm, workers: usize) -> Option<&SpeedupRow> {
        self.rows.iter().find(|(a, r)| *a == algorithm && r.workers == workers).map(|(_, r)| r)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{SPEEDUP_HEADER}").unwrap();
        for (a, r) in &self.rows {
            writeln!(out, "{},{},{},{}", a, r.workers, fmt_opt(r.time_to_target), fmt_opt(r.speedup)).unwrap();
        }
        out
    }
}

/// Simulated time to `cfg.target_subopt` for every algorithm and worker
/// count, using the first seed.
pub fn run_speedup(cfg: &ExperimentConfig, worker_counts: &[usize]) -> Result<SpeedupTable> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let reference = analysis::solve_reference(&problem, analysis::REFERENCE_TOL, analysis::REFERENCE_MAX_ITERS)?;
    run_speedup_on(cfg, &problem, &reference, worker_counts)
}

pub fn run_speedup_on(
    cfg: &ExperimentConfig,
    problem: &CompositeProblem,
    reference: &Reference,
    worker_counts: &[usize],
) -> Result<SpeedupTable> {
    cfg.validate()?;
    if worker_counts.is_empty() || worker_counts.contains(&0) {
        return Err(Error::InvalidParameter("worker counts must be positive and non-empty".into()));
    }
    let mut rows = Vec::new();
    for &a in &cfg.algorithms {
        let base = cfg.algo_config(problem, a, cfg.seeds[0]);
        base.validate()?;
        for r in engine::simulated_speedup(problem, &base, worker_counts, reference, cfg.target_subopt)? {
            rows.push((a, r));
        }
    }
    Ok(SpeedupTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub beta: f64,
    /// Mean final suboptimality over the seeds; infinite if any run failed.
    pub score: f64,
}

/// Scores every `(η, β)` grid point by mean final suboptimality and returns
/// the cells plus the best one. `β` only varies for the decaying schedule.
pub fn tune_grid(
    cfg: &ExperimentConfig,
    problem: &CompositeProblem,
    reference: &Reference,
    algorithm: Algorithm,
) -> Result<(Vec<GridCell>, GridCell)> {
    cfg.validate()?;
    let betas: Vec<f64> = if algorithm == Algorithm::DapSgdDecay { GRID_BETAS.to_vec() } else { vec![cfg.beta] };
    let points: Vec<(f64, f64)> = GRID_ETAS.iter().flat_map(|&e| betas.iter().map(move |&b| (e, b))).collect();
    let cells: Vec<GridCell> = points
        .par_iter()
        .map(|&(eta, beta)| {
            let mut total = 0.0;
            for &seed in &cfg.seeds {
                let mut c = cfg.algo_config(problem, algorithm, seed);
                c.eta = eta;
                c.beta = beta;
                match engine::run(problem, &c, false) {
                    Ok(rec) => {
                        let last = problem.objective_value(&rec.final_iterate).unwrap_or(f64::INFINITY);
                        total += (last - reference.p_star).max(0.0);
                    }
                    Err(_) => total = f64::INFINITY,
                }
            }
            GridCell { algorithm, eta, beta, score: total / cfg.seeds.len() as f64 }
        })
        .collect();
    let best = cells.iter().min_by(|a, b| a.score.total_cmp(&b.score)).cloned().expect("grid is non-empty");
    Ok((cells, best))
}

pub fn grid_csv(cells: &[GridCell]) -> String {
    let mut out = String::new();
    writeln!(out, "{GRID_HEADER}").unwrap();
    for c in cells {
        writeln!(out, "{},{},{},{}", c.algorithm, fmt_float(c.eta), fmt_float(c.beta), fmt_float(c.score)).unwrap();
    }
    out
}
