//! Reference optimum, the linear-rate constant, the stochastic-gradient
//! variance bound checked on instrumented traces, and per-epoch metrics.

use rayon::prelude::*;

use crate::engine::{self, AlgoConfig, RunOptions, RunRecord, TraceEvent};
use crate::error::{Error, Result};
use crate::matrix::ParamMatrix;
use crate::model::{CompositeProblem, Reference};
use crate::prox;

pub const REFERENCE_TOL: f64 = 1e-10;
pub const REFERENCE_MAX_ITERS: usize = 200_000;
/// Suboptimality within this distance of zero is reported as zero.
pub const SUBOPT_FLOOR: f64 = 1e-14;

/// Full-gradient proximal descent with `η = 1/L`, stopped when the gradient
/// mapping `‖x − Prox(x − η∇f(x))‖/η` is at most `tol`.
pub fn solve_reference(problem: &CompositeProblem, tol: f64, max_iters: usize) -> Result<Reference> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let eta = 1.0 / problem.constants().smoothness;
    let reg = problem.regularizer();
    let mut x = problem.zeros();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let g = problem.grad_full(&x)?;
        let next = prox::prox_step(&reg, &x, &g, eta)?.x_prime;
        residual = x.dist_sq(&next).sqrt() / eta;
        if residual <= tol {
            let p_star = problem.objective_value(&x)?;
            return Ok(Reference { x_star: x, p_star });
        }
        x = next;
    }
    Err(Error::ReferenceNoConvergence { iterations: max_iters, residual })
}

/// Gradient-mapping norm `‖x − Prox(x − η∇f(x))‖/η`.
pub fn gradient_mapping_norm(problem: &CompositeProblem, x: &ParamMatrix, eta: f64) -> Result<f64> {
    let g = problem.grad_full(x)?;
    let next = prox::prox_step(&problem.regularizer(), x, &g, eta)?.x_prime;
    Ok(x.dist_sq(&next).sqrt() / eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceParams {
    pub mu: f64,
    pub l: f64,
    pub eta: f64,
    pub tau: f64,
    pub m: usize,
    pub epsilon: f64,
}

impl ConvergenceParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0
            && self.l >= self.mu
            && self.eta > 0.0
            && self.tau >= 0.0
            && self.m >= 1
            && self.epsilon >= 0.0
            && [self.mu, self.l, self.eta, self.tau, self.epsilon].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid convergence parameters {self:?}")));
        }
        Ok(())
    }

    /// `1 − 8L²η²τ²`
    pub fn staleness_margin(&self) -> f64 {
        1.0 - 8.0 * self.l * self.l * self.eta * self.eta * self.tau * self.tau
    }
}

/// Per-stage contraction factor `ρ` of the expected suboptimality.
pub fn theorem1_rho(p: &ConvergenceParams) -> Result<f64> {
    p.validate()?;
    let ConvergenceParams { mu, l, eta, tau, m, epsilon } = *p;
    let q = p.staleness_margin();
    if q <= 0.0 {
        return Err(Error::RateInapplicable(format!("1 - 8 L^2 eta^2 tau^2 = {q} is not positive")));
    }
    let m = m as f64;
    let c = 6.0 * eta * eta + 4.0 * eta * eta * tau * tau;
    let numerator = 2.0 / mu + 8.0 * l * c * m / q;
    let bracket = 2.0 * eta
        - 8.0 * l * l * eta * eta * tau * epsilon * c / q
        - (6.0 * eta + 4.0 * eta * tau * tau) * epsilon
        - 8.0 * l * c / q;
    let denominator = bracket * m;
    if denominator <= 0.0 {
        return Err(Error::RateInapplicable(format!("denominator {denominator} is not positive")));
    }
    Ok(numerator / denominator)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub stage: usize,
    /// `Σ_t ‖v_t − ∇f(x_{d(t)})‖²`
    pub lhs: f64,
    pub rhs_term1: f64,
    pub rhs_term2: f64,
    pub holds: bool,
    /// `max_t (P(x_{d(t)}) − P(x′_{d(t)})) / (P(x_t) − P*)`, when a reference
    /// was available.
    pub epsilon_observed: Option<f64>,
}

fn bound_holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + 1e-9) + 1e-15
}

fn lemma_coefficients(p: &ConvergenceParams) -> Result<(f64, f64)> {
    let q = p.staleness_margin();
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("variance bound needs 1 - 8 L^2 tau^2 eta^2 > 0, got {q}")));
    }
    let c1 = 8.0 * p.l * p.l * p.tau * p.tau * p.eta / q;
    let c2 = 2.0 / q;
    Ok((c1, c2))
}

/// Evaluates the variance bound on the `m` events of `stage`.
pub fn lemma1_check(trace: &[TraceEvent], p: &ConvergenceParams, stage: usize) -> Result<LemmaReport> {
    let (c1, c2) = lemma_coefficients(p)?;
    let first = stage * p.m;
    let mut seen = vec![false; p.m];
    let mut lhs = 0.0;
    let mut gap_sum = 0.0;
    let mut u_sum = 0.0;
    let mut eps: Option<f64> = None;
    for e in trace.iter().filter(|e| e.stage == stage) {
        if e.t < first || e.t >= first + p.m {
            continue;
        }
        seen[e.t - first] = true;
        let gap = e.p_gap.ok_or_else(|| Error::InvalidParameter(format!("trace event {} has no prox gap", e.t)))?;
        lhs += e.v_norm_sq_dev;
        gap_sum += gap;
        u_sum += e.u_norm_sq_dev;
        if let Some(sub) = e.subopt {
            if sub > 0.0 {
                let r = gap / sub;
                eps = Some(eps.map_or(r, |cur: f64| cur.max(r)));
            }
        }
    }
    let missing: Vec<usize> = seen.iter().enumerate().filter(|(_, &s)| !s).map(|(j, _)| first + j).collect();
    if !missing.is_empty() {
        return Err(Error::MissingEvents { stage, missing });
    }
    let rhs_term1 = c1 * gap_sum;
    let rhs_term2 = c2 * u_sum;
    Ok(LemmaReport {
        stage,
        lhs,
        rhs_term1,
        rhs_term2,
        holds: bound_holds(lhs, rhs_term1 + rhs_term2),
        epsilon_observed: eps,
    })
}

/// Averages the sums of several reports for the same stage, approximating
/// the expectations; `holds` is re-evaluated on the averages.
pub fn average_reports(reports: &[LemmaReport]) -> Result<LemmaReport> {
    let first = reports.first().ok_or_else(|| Error::InvalidParameter("no reports to average".into()))?;
    let k = reports.len() as f64;
    let lhs = reports.iter().map(|r| r.lhs).sum::<f64>() / k;
    let rhs_term1 = reports.iter().map(|r| r.rhs_term1).sum::<f64>() / k;
    let rhs_term2 = reports.iter().map(|r| r.rhs_term2).sum::<f64>() / k;
    let epsilon_observed = reports
        .iter()
        .filter_map(|r| r.epsilon_observed)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(LemmaReport {
        stage: first.stage,
        lhs,
        rhs_term1,
        rhs_term2,
        holds: bound_holds(lhs, rhs_term1 + rhs_term2),
        epsilon_observed,
    })
}

fn reports_for_record(record: &RunRecord, p: &ConvergenceParams, stages: usize) -> Result<Vec<LemmaReport>> {
    (0..stages).map(|s| lemma1_check(&record.trace, p, s)).collect()
}

/// Runs `cfg` instrumented once per seed and returns the seed-averaged
/// report of every stage.
pub fn lemma1_seed_average(
    problem: &CompositeProblem,
    cfg: &AlgoConfig,
    p: &ConvergenceParams,
    seeds: &[u64],
    reference: Option<&Reference>,
) -> Result<Vec<LemmaReport>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed list is empty".into()));
    }
    let opts = RunOptions::instrumented(reference.cloned());
    let per_seed: Vec<Vec<LemmaReport>> = seeds
        .par_iter()
        .map(|&seed| {
            let rec = engine::run_with(problem, &cfg.clone().with_seed(seed), &opts)?;
            reports_for_record(&rec, p, cfg.stages)
        })
        .collect::<Result<_>>()?;
    (0..cfg.stages)
        .map(|s| {
            let col: Vec<LemmaReport> = per_seed.iter().map(|r| r[s].clone()).collect();
            average_reports(&col)
        })
        .collect()
}

/// Exact expectations over every sample sequence. The delay pattern does not
/// depend on the samples, so each sequence is equally likely. Fails when
/// the number of sequences exceeds `max_paths`.
pub fn lemma1_exhaustive(
    problem: &CompositeProblem,
    cfg: &AlgoConfig,
    p: &ConvergenceParams,
    reference: Option<&Reference>,
    max_paths: usize,
) -> Result<Vec<LemmaReport>> {
    let tasks = cfg.stages * cfg.inner_iters;
    let probe =
        engine::run_with(problem, cfg, &RunOptions { scripted_samples: Some(vec![0; tasks]), ..Default::default() })?;
    let partition = if problem.partition().workers() == cfg.workers {
        problem.partition().clone()
    } else {
        crate::model::Partition::even(problem.n(), cfg.workers)?
    };
    let radices: Vec<usize> = probe
        .spans
        .iter()
        .filter(|s| s.read_iter.is_some())
        .map(|s| match cfg.sampling {
            engine::Sampling::PerPartition => partition.block_size(s.worker),
            engine::Sampling::Global => problem.n(),
        })
        .collect();
    let mut paths: usize = 1;
    for &r in &radices {
        paths = paths
            .checked_mul(r)
            .filter(|&p| p <= max_paths)
            .ok_or_else(|| Error::InvalidParameter(format!("more than {max_paths} sample sequences")))?;
    }
    let scripts: Vec<Vec<usize>> = (0..paths)
        .map(|mut code| {
            radices
                .iter()
                .map(|&r| {
                    let d = code % r;
                    code /= r;
                    d
                })
                .collect()
        })
        .collect();
    let per_path: Vec<Vec<LemmaReport>> = scripts
        .into_par_iter()
        .map(|script| {
            let opts = RunOptions {
                instrument: true,
                reference: reference.cloned(),
                scripted_samples: Some(script),
                ..Default::default()
            };
            let rec = engine::run_with(problem, cfg, &opts)?;
            reports_for_record(&rec, p, cfg.stages)
        })
        .collect::<Result<_>>()?;
    (0..cfg.stages)
        .map(|s| {
            let col: Vec<LemmaReport> = per_path.iter().map(|r| r[s].clone()).collect();
            average_reports(&col)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub epoch: f64,
    pub grad_evals: u64,
    pub sim_time: f64,
    pub subopt: f64,
    pub dist_sq: f64,
    pub mean_v_dev: Option<f64>,
    pub max_staleness: usize,
}

pub fn epoch_metrics(record: &RunRecord, p_star: f64, x_star: &ParamMatrix) -> Vec<MetricRow> {
    record
        .rows
        .iter()
        .map(|r| {
            let raw = r.objective - p_star;
            MetricRow {
                epoch: r.epoch,
                grad_evals: r.grad_evals,
                sim_time: r.sim_time,
                subopt: if raw.abs() <= SUBOPT_FLOOR { 0.0 } else { raw },
                dist_sq: r.iterate.dist_sq(x_star),
                mean_v_dev: r.mean_v_dev,
                max_staleness: r.max_staleness,
            }
        })
        .collect()
}

/// Least-squares line through `(x, log10 y)`: `(slope, intercept, r²)`.
pub fn log_linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, y)| *y > 0.0).map(|&(x, y)| (x, y.log10())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, my - slope * mx, r2))
}
