//! C ABI over the `dapsvrg` crate.
//!
//! Problems and run records are opaque handles created by `ds_*_new`-style
//! constructors and released with the matching `ds_*_free`. Every fallible
//! call returns a [`DsStatus`]; on failure the message is available from
//! [`ds_last_error_message`] on the same thread until the next failing call.
//!
//! Matrices are passed as row-major `double` buffers with explicit shapes.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dapsvrg::analysis::{self, ConvergenceParams};
use dapsvrg::data::{generate_lowrank, LowRankSpec};
use dapsvrg::engine::{self, AlgoConfig, Algorithm, CostModel, RunRecord};
use dapsvrg::{prox, CompositeProblem, Error, ParamMatrix, Regularizer, SampleSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    NoConvergence = 5,
    Diverged = 6,
    StalenessViolation = 7,
    RateInapplicable = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsAlgorithm {
    TapSvrg = 0,
    DapSvrg = 1,
    DapSgdConst = 2,
    DapSgdDecay = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsRegKind {
    None = 0,
    L1 = 1,
    SquaredL2 = 2,
    ElasticNet = 3,
    Nuclear = 4,
}

/// `weight` is the single weight, or the l1 part of the elastic net;
/// `l2_weight` is read by the elastic net only.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsRegularizer {
    pub kind: DsRegKind,
    pub weight: f64,
    pub l2_weight: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsCostModel {
    pub grad_cost: f64,
    pub prox_cost: f64,
    pub add_cost: f64,
    pub net_cost: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsRunConfig {
    pub algorithm: DsAlgorithm,
    pub eta: f64,
    pub beta: f64,
    pub stages: usize,
    pub inner_iters: usize,
    pub workers: usize,
    pub seed: u64,
    pub cost: DsCostModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsConstants {
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub sample_smoothness: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsEpochRow {
    pub stage: usize,
    pub epoch: f64,
    pub grad_evals: u64,
    pub sim_time: f64,
    pub objective: f64,
    pub max_staleness: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsConvergenceParams {
    pub mu: f64,
    pub l: f64,
    pub eta: f64,
    pub tau: f64,
    pub m: usize,
    pub epsilon: f64,
}

/// Opaque problem handle.
pub struct DsProblem {
    inner: CompositeProblem,
}

/// Opaque handle to a finished simulated run.
pub struct DsRun {
    inner: RunRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(DsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } => DsStatus::DimensionMismatch,
            Error::NonFinite(_) => DsStatus::NonFinite,
            Error::SvdNoConvergence { .. }
            | Error::EigenNoConvergence { .. }
            | Error::ReferenceNoConvergence { .. } => DsStatus::NoConvergence,
            Error::Divergence { .. } => DsStatus::Diverged,
            Error::StalenessViolation { .. } => DsStatus::StalenessViolation,
            Error::RateInapplicable(_) => DsStatus::RateInapplicable,
            _ => DsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside dapsvrg");
            DsStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn buffer_len(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols).ok_or_else(|| Failure(DsStatus::InvalidArgument, format!("{rows}x{cols} overflows")))
}

unsafe fn read_matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<ParamMatrix, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let len = buffer_len(rows, cols)?;
    let data = std::slice::from_raw_parts(p, len).to_vec();
    Ok(ParamMatrix::from_vec(rows, cols, data)?)
}

unsafe fn write_matrix(m: &ParamMatrix, out: *mut f64, len: usize, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    let src = m.as_slice();
    if len != src.len() {
        return Err(Failure(DsStatus::DimensionMismatch, format!("{what} holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

impl From<DsRegularizer> for Regularizer {
    fn from(r: DsRegularizer) -> Self {
        match r.kind {
            DsRegKind::None => Regularizer::None,
            DsRegKind::L1 => Regularizer::L1(r.weight),
            DsRegKind::SquaredL2 => Regularizer::SquaredL2(r.weight),
            DsRegKind::ElasticNet => Regularizer::ElasticNet { l1: r.weight, l2: r.l2_weight },
            DsRegKind::Nuclear => Regularizer::Nuclear(r.weight),
        }
    }
}

impl From<DsAlgorithm> for Algorithm {
    fn from(a: DsAlgorithm) -> Self {
        match a {
            DsAlgorithm::TapSvrg => Algorithm::TapSvrg,
            DsAlgorithm::DapSvrg => Algorithm::DapSvrg,
            DsAlgorithm::DapSgdConst => Algorithm::DapSgdConst,
            DsAlgorithm::DapSgdDecay => Algorithm::DapSgdDecay,
        }
    }
}

impl From<DsCostModel> for CostModel {
    fn from(c: DsCostModel) -> Self {
        CostModel { grad_cost: c.grad_cost, prox_cost: c.prox_cost, add_cost: c.add_cost, net_cost: c.net_cost }
    }
}

impl From<&DsRunConfig> for AlgoConfig {
    fn from(c: &DsRunConfig) -> Self {
        let mut cfg = AlgoConfig::new(c.algorithm.into(), c.eta, c.stages, c.inner_iters, c.workers)
            .with_seed(c.seed)
            .with_cost(c.cost.into());
        cfg.beta = c.beta;
        cfg
    }
}

/// Message of the last failing call on this thread; empty when none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a problem from `n` samples: `a` is `n x d1`, `b` is `n x d2`.
///
/// # Safety
/// `a` and `b` must point to `n*d1` and `n*d2` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_problem_new(
    a: *const f64,
    b: *const f64,
    n: usize,
    d1: usize,
    d2: usize,
    ridge: f64,
    reg: DsRegularizer,
    out: *mut *mut DsProblem,
) -> DsStatus {
    guard(|| {
        let a = read_matrix(a, n, d1, "a")?;
        let b = read_matrix(b, n, d2, "b")?;
        let inner = CompositeProblem::new(SampleSet::new(a, b)?, ridge, reg.into())?;
        write(out, Box::into_raw(Box::new(DsProblem { inner })), "out")
    })
}

/// Synthetic low-rank instance `B = A X` with standard-normal factors.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_problem_generate_lowrank(
    d1: usize,
    d2: usize,
    rank: usize,
    n: usize,
    seed: u64,
    ridge: f64,
    reg: DsRegularizer,
    out: *mut *mut DsProblem,
) -> DsStatus {
    guard(|| {
        let spec = LowRankSpec { d1, d2, rank, n, seed, lambda1: ridge, ..LowRankSpec::desk(seed) };
        let inner = generate_lowrank(&spec)?.problem.with_regularizer(reg.into())?;
        write(out, Box::into_raw(Box::new(DsProblem { inner })), "out")
    })
}

/// # Safety
/// `problem` must come from a `ds_problem_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn ds_problem_free(problem: *mut DsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_problem_shape(
    problem: *const DsProblem,
    n: *mut usize,
    d1: *mut usize,
    d2: *mut usize,
) -> DsStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let (r, c) = p.param_shape();
        write(n, p.n(), "n")?;
        write(d1, r, "d1")?;
        write(d2, c, "d2")
    })
}

/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_problem_constants(problem: *const DsProblem, out: *mut DsConstants) -> DsStatus {
    guard(|| {
        let c = deref(problem, "problem")?.inner.constants();
        write(
            out,
            DsConstants {
                smoothness: c.smoothness,
                strong_convexity: c.strong_convexity,
                sample_smoothness: c.sample_smoothness,
            },
            "out",
        )
    })
}

/// Objective value at the `d1 x d2` point `x` (`len = d1*d2`).
///
/// # Safety
/// `x` must point to `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_problem_objective(
    problem: *const DsProblem,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let (r, c) = p.param_shape();
        if len != r * c {
            return Err(Failure(DsStatus::DimensionMismatch, format!("x holds {len} values, need {}", r * c)));
        }
        let x = read_matrix(x, r, c, "x")?;
        write(out, p.objective_value(&x)?, "out")
    })
}

/// High-accuracy minimizer by full proximal gradient. Writes `x*` into
/// `x_out` (`len = d1*d2`) and `P(x*)` into `p_star`.
///
/// # Safety
/// `x_out` must have room for `len` doubles and `p_star` be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_solve_reference(
    problem: *const DsProblem,
    tol: f64,
    max_iters: usize,
    x_out: *mut f64,
    len: usize,
    p_star: *mut f64,
) -> DsStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let r = analysis::solve_reference(p, tol, max_iters)?;
        write_matrix(&r.x_star, x_out, len, "x_out")?;
        write(p_star, r.p_star, "p_star")
    })
}

/// `out = Prox_{eta,h}(x)` for a `rows x cols` matrix; `out` may alias `x`.
///
/// # Safety
/// `x` and `out` must each hold `rows*cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_prox(
    reg: DsRegularizer,
    x: *const f64,
    rows: usize,
    cols: usize,
    eta: f64,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let x = read_matrix(x, rows, cols, "x")?;
        let y = prox::prox(&reg.into(), &x, eta)?;
        write_matrix(&y, out, buffer_len(rows, cols)?, "out")
    })
}

/// Fills `out` with the defaults used by the command-line tool:
/// `eta = 1/(8 L_max)`, `beta = 0.5`, 10 stages of `2n` inner steps, seed 0
/// and the default cost model.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_run_config_default(
    problem: *const DsProblem,
    algorithm: DsAlgorithm,
    workers: usize,
    out: *mut DsRunConfig,
) -> DsStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let cost = CostModel::default();
        let cfg = DsRunConfig {
            algorithm,
            eta: 1.0 / (8.0 * p.constants().sample_smoothness),
            beta: 0.5,
            stages: 10,
            inner_iters: 2 * p.n(),
            workers,
            seed: 0,
            cost: DsCostModel {
                grad_cost: cost.grad_cost,
                prox_cost: cost.prox_cost,
                add_cost: cost.add_cost,
                net_cost: cost.net_cost,
            },
        };
        write(out, cfg, "out")
    })
}

/// Simulates one run; on success `*out` owns the record.
///
/// # Safety
/// `problem` and `config` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_run(
    problem: *const DsProblem,
    config: *const DsRunConfig,
    out: *mut *mut DsRun,
) -> DsStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let cfg = AlgoConfig::from(deref(config, "config")?);
        let inner = engine::run(p, &cfg, false)?;
        write(out, Box::into_raw(Box::new(DsRun { inner })), "out")
    })
}

/// # Safety
/// `run` must come from [`ds_run`], or be null.
#[no_mangle]
pub unsafe extern "C" fn ds_run_free(run: *mut DsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of epoch rows: one before the first stage, then one per stage.
/// Returns 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ds_run_row_count(run: *const DsRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.rows.len())
}

/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_run_row(run: *const DsRun, index: usize, out: *mut DsEpochRow) -> DsStatus {
    guard(|| {
        let rows = &deref(run, "run")?.inner.rows;
        let row = rows.get(index).ok_or_else(|| {
            Failure(DsStatus::InvalidArgument, format!("row {index} out of range for {} rows", rows.len()))
        })?;
        write(
            out,
            DsEpochRow {
                stage: row.stage,
                epoch: row.epoch,
                grad_evals: row.grad_evals,
                sim_time: row.sim_time,
                objective: row.objective,
                max_staleness: row.max_staleness,
            },
            "out",
        )
    })
}

/// # Safety
/// `run` must be a live handle and `x_out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_run_final_iterate(run: *const DsRun, x_out: *mut f64, len: usize) -> DsStatus {
    guard(|| write_matrix(&deref(run, "run")?.inner.final_iterate, x_out, len, "x_out"))
}

/// Largest staleness observed over the run; 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ds_run_max_staleness(run: *const DsRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.max_staleness)
}

/// Per-stage contraction factor of the asynchronous rate bound.
///
/// # Safety
/// `params` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_theorem1_rho(params: *const DsConvergenceParams, out: *mut f64) -> DsStatus {
    guard(|| {
        let q = deref(params, "params")?;
        let p = ConvergenceParams { mu: q.mu, l: q.l, eta: q.eta, tau: q.tau, m: q.m, epsilon: q.epsilon };
        write(out, analysis::theorem1_rho(&p)?, "out")
    })
}
