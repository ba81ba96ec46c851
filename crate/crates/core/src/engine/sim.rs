//! Discrete-event simulation of one server and `K` workers.
//!
//! Workers hold at most one task each. A worker reads the server iterate,
//! computes its message, and sends it; the server applies messages one at a
//! time in `(arrival_time, worker_id)` order and replies with the updated
//! iterate, which starts that worker's next task. Exactly `m` tasks are
//! issued per stage, so every task is applied and the queue drains before
//! the synchronous snapshot barrier of the next stage.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use crate::engine::config::{AlgoConfig, Sampling};
use crate::engine::record::{EpochRow, RunRecord, TaskSpan, TraceEvent, UpdateKind, UpdateMessage};
use crate::error::{Error, Result};
use crate::grad::{self, DrawKey, Snapshot, STREAM_JITTER, STREAM_SAMPLE};
use crate::matrix::{Delta, ParamMatrix};
use crate::model::{CompositeProblem, Partition, Reference};
use crate::prox;

/// Frobenius norm beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record a [`TraceEvent`] for every applied update.
    pub instrument: bool,
    /// Optimum used for suboptimality and distance columns.
    pub reference: Option<Reference>,
    /// Keep the iterate after every update.
    pub record_iterates: bool,
    /// Sample indices (local to the sampling range) consumed in task issue
    /// order instead of keyed draws.
    pub scripted_samples: Option<Vec<usize>>,
}

impl RunOptions {
    pub fn instrumented(reference: Option<Reference>) -> Self {
        RunOptions { instrument: true, reference, ..Default::default() }
    }
}

/// Runs the configured algorithm.
pub fn run(problem: &CompositeProblem, cfg: &AlgoConfig, instrument: bool) -> Result<RunRecord> {
    run_with(problem, cfg, &RunOptions { instrument, ..Default::default() })
}

pub fn run_with(problem: &CompositeProblem, cfg: &AlgoConfig, opts: &RunOptions) -> Result<RunRecord> {
    cfg.validate()?;
    let partition = if problem.partition().workers() == cfg.workers {
        problem.partition().clone()
    } else {
        Partition::even(problem.n(), cfg.workers)?
    };
    if let Some(r) = &opts.reference {
        let (d1, d2) = problem.param_shape();
        r.x_star.check_shape(d1, d2)?;
    }
    let warnings = cfg.warnings(problem);
    for w in &warnings {
        log::warn!("{} with {} workers: {w}", cfg.algorithm, cfg.workers);
    }
    let mut sim = Sim::new(problem, cfg, opts, partition);
    sim.warnings = warnings;
    sim.execute()
}

#[derive(Debug, Clone, Copy)]
struct QueueKey {
    arrival: f64,
    worker: usize,
}

impl PartialEq for QueueKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueKey {}

impl PartialOrd for QueueKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.arrival.total_cmp(&other.arrival).then(self.worker.cmp(&other.worker))
    }
}

struct InFlight {
    msg: UpdateMessage,
    span: usize,
    // instrumentation only
    v: Option<ParamMatrix>,
    x_read: Option<ParamMatrix>,
    x_prime: Option<ParamMatrix>,
}

struct PointInfo {
    grad: ParamMatrix,
    objective: Option<f64>,
}

struct Sim<'a> {
    problem: &'a CompositeProblem,
    cfg: &'a AlgoConfig,
    opts: &'a RunOptions,
    partition: Partition,
    x: ParamMatrix,
    t: usize,
    stage: usize,
    eta: f64,
    snapshot: Option<Snapshot>,
    clock: f64,
    server_free: f64,
    server_busy: f64,
    queue: BinaryHeap<Reverse<QueueKey>>,
    in_flight: Vec<Option<InFlight>>,
    issued_in_stage: usize,
    issued_total: usize,
    grad_evals: u64,
    stage_max_staleness: usize,
    max_staleness: usize,
    points: HashMap<usize, PointInfo>,
    trace: Vec<TraceEvent>,
    spans: Vec<TaskSpan>,
    iterates: Vec<ParamMatrix>,
    rows: Vec<EpochRow>,
    warnings: Vec<String>,
}

impl<'a> Sim<'a> {
    fn new(problem: &'a CompositeProblem, cfg: &'a AlgoConfig, opts: &'a RunOptions, partition: Partition) -> Self {
        Sim {
            problem,
            cfg,
            opts,
            partition,
            x: problem.zeros(),
            t: 0,
            stage: 0,
            eta: cfg.eta,
            snapshot: None,
            clock: 0.0,
            server_free: 0.0,
            server_busy: 0.0,
            queue: BinaryHeap::new(),
            in_flight: (0..cfg.workers).map(|_| None).collect(),
            issued_in_stage: 0,
            issued_total: 0,
            grad_evals: 0,
            stage_max_staleness: 0,
            max_staleness: 0,
            points: HashMap::new(),
            trace: Vec::new(),
            spans: Vec::new(),
            iterates: Vec::new(),
            rows: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn execute(mut self) -> Result<RunRecord> {
        let cfg = self.cfg;
        let m = cfg.inner_iters;
        let net = cfg.cost.net_cost;
        let row = self.epoch_row(0, 0)?;
        self.rows.push(row);

        for s in 0..cfg.stages {
            self.stage = s;
            self.eta = cfg.step_size(s);
            self.stage_max_staleness = 0;
            self.issued_in_stage = 0;
            let trace_start = self.trace.len();

            if cfg.algorithm.is_svrg() {
                self.snapshot_phase()?;
            }

            let start = self.clock;
            self.server_free = start;
            for w in 0..cfg.workers.min(m) {
                self.issue(w, start)?;
            }
            while let Some(Reverse(key)) = self.queue.pop() {
                let finish = self.apply(key.worker, key.arrival)?;
                if self.issued_in_stage < m {
                    self.issue(key.worker, finish + net)?;
                }
            }
            self.clock = self.server_free;
            self.grad_evals += m as u64;
            let row = self.epoch_row(s + 1, trace_start)?;
            self.rows.push(row);
        }

        Ok(RunRecord {
            algorithm: cfg.algorithm,
            workers: cfg.workers,
            seed: cfg.seed,
            rows: self.rows,
            final_iterate: self.x,
            max_staleness: self.max_staleness,
            trace: self.trace,
            spans: self.spans,
            iterates: self.iterates,
            server_busy_time: self.server_busy,
            total_time: self.clock,
            updates_applied: self.t,
            warnings: self.warnings,
        })
    }

    fn jitter(&self, iteration: usize, worker: usize) -> f64 {
        if self.cfg.jitter == 0.0 {
            return 1.0;
        }
        let u = DrawKey::new(self.cfg.seed, self.stage, iteration, worker, STREAM_JITTER).unit();
        1.0 + self.cfg.jitter * (2.0 * u - 1.0)
    }

    /// Synchronous full-gradient barrier: every worker computes its block's
    /// partial sum, then the server aggregates and broadcasts.
    fn snapshot_phase(&mut self) -> Result<()> {
        let cost = self.cfg.cost;
        let start = self.clock;
        let mut done = start;
        for w in 0..self.cfg.workers {
            let dur = self.partition.block_size(w) as f64 * cost.grad_cost * self.jitter(usize::MAX, w);
            let begin = start + cost.net_cost;
            self.spans.push(TaskSpan {
                worker: w,
                stage: self.stage,
                start: begin,
                end: begin + dur,
                read_iter: None,
                applied_iter: None,
            });
            done = done.max(begin + dur + cost.net_cost);
        }
        let aggregate = self.cfg.workers as f64 * cost.add_cost;
        self.server_busy += aggregate;
        self.clock = done + aggregate + cost.net_cost;
        self.snapshot = Some(grad::make_snapshot(self.problem, &self.partition, &self.x, self.stage)?);
        self.grad_evals += self.problem.n() as u64;
        Ok(())
    }

    fn sample(&self, worker: usize, read_iter: usize) -> Result<usize> {
        let range = match self.cfg.sampling {
            Sampling::PerPartition => self.partition.block(worker),
            Sampling::Global => 0..self.problem.n(),
        };
        let len = range.len();
        let local = match &self.opts.scripted_samples {
            Some(script) => {
                let v = *script.get(self.issued_total).ok_or_else(|| {
                    Error::InvalidParameter(format!("sample script exhausted at task {}", self.issued_total))
                })?;
                if v >= len {
                    return Err(Error::IndexOutOfRange { index: v, n: len });
                }
                v
            }
            None => DrawKey::new(self.cfg.seed, self.stage, read_iter, worker, STREAM_SAMPLE).index(len),
        };
        Ok(range.start + local)
    }

    fn direction(&self, i: usize, x: &ParamMatrix) -> Result<ParamMatrix> {
        match &self.snapshot {
            Some(snap) if self.cfg.algorithm.is_svrg() => grad::reduced_gradient(self.problem, i, x, snap),
            _ => grad::sgd_gradient(self.problem, i, x),
        }
    }

    /// Worker `worker` reads the current iterate at `read_time` and computes
    /// its message.
    fn issue(&mut self, worker: usize, read_time: f64) -> Result<()> {
        let cost = self.cfg.cost;
        let read_iter = self.t;
        let i = self.sample(worker, read_iter)?;
        let v = self.direction(i, &self.x)?;
        let jit = self.jitter(read_iter, worker);
        let instrument = self.opts.instrument;

        let (kind, compute, x_prime, v_kept) = if self.cfg.algorithm.is_decoupled() {
            let step = prox::prox_step(&self.problem.regularizer(), &self.x, &v, self.eta)?;
            let delta = Delta::between(&self.x, &step.x_prime);
            let xp = instrument.then_some(step.x_prime);
            (UpdateKind::Delta(delta), (cost.grad_cost + cost.prox_cost) * jit, xp, instrument.then_some(v))
        } else {
            (UpdateKind::Gradient(v), cost.grad_cost * jit, None, None)
        };

        let end = read_time + compute;
        let arrival = end + cost.net_cost;
        self.spans.push(TaskSpan {
            worker,
            stage: self.stage,
            start: read_time,
            end,
            read_iter: Some(read_iter),
            applied_iter: None,
        });
        debug_assert!(self.in_flight[worker].is_none());
        self.in_flight[worker] = Some(InFlight {
            msg: UpdateMessage { kind, read_iter, worker_id: worker, sample_id: i, arrival_time: arrival },
            span: self.spans.len() - 1,
            v: v_kept,
            x_read: instrument.then(|| self.x.clone()),
            x_prime,
        });
        self.queue.push(Reverse(QueueKey { arrival, worker }));
        self.issued_in_stage += 1;
        self.issued_total += 1;
        Ok(())
    }

    /// Server applies the message from `worker`; returns the finish time.
    fn apply(&mut self, worker: usize, arrival: f64) -> Result<f64> {
        let task = self.in_flight[worker].take().expect("queued worker has a task in flight");
        let cost = self.cfg.cost;
        let start = self.server_free.max(arrival);
        let busy = if self.cfg.algorithm.is_decoupled() { cost.add_cost } else { cost.prox_cost };
        let finish = start + busy;
        let staleness = self.t - task.msg.read_iter;
        if let Some(cap) = self.cfg.max_delay_cap {
            if staleness > cap {
                return Err(Error::StalenessViolation { observed: staleness, cap, iteration: self.t });
            }
        }
        if self.opts.instrument {
            self.observe(&task, staleness);
        }

        match &task.msg.kind {
            UpdateKind::Gradient(v) => {
                self.x = prox::prox_step(&self.problem.regularizer(), &self.x, v, self.eta)?.x_prime;
            }
            UpdateKind::Delta(d) => d.apply(&mut self.x),
        }
        self.spans[task.span].applied_iter = Some(self.t);
        if !self.x.is_finite() || self.x.frobenius() > DIVERGENCE_NORM {
            return Err(Error::Divergence { stage: self.stage, iteration: self.t });
        }
        self.t += 1;
        self.server_free = finish;
        self.server_busy += busy;
        self.stage_max_staleness = self.stage_max_staleness.max(staleness);
        self.max_staleness = self.max_staleness.max(staleness);
        if self.opts.record_iterates {
            self.iterates.push(self.x.clone());
        }
        Ok(finish)
    }

    fn point_info(&self, x: &ParamMatrix) -> PointInfo {
        let grad =
            self.problem.grad_full_partitioned(&self.partition, x).expect("iterate shape checked at construction");
        let objective = match self.problem.objective_value(x) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("objective unavailable at iteration {}: {e}", self.t);
                None
            }
        };
        PointInfo { grad, objective }
    }

    /// Instrumentation hook. Reads state only; the trajectory and the draws
    /// are unaffected.
    fn observe(&mut self, task: &InFlight, staleness: usize) {
        let t = self.t;
        if !self.points.contains_key(&t) {
            let info = self.point_info(&self.x);
            self.points.insert(t, info);
        }
        let read_iter = task.msg.read_iter;
        let x_read = task.x_read.as_ref().expect("instrumented task keeps its read iterate");
        if !self.points.contains_key(&read_iter) {
            let info = self.point_info(x_read);
            self.points.insert(read_iter, info);
        }
        let at_t = &self.points[&t];
        let at_d = &self.points[&read_iter];

        let v = match (&task.v, &task.msg.kind) {
            (Some(v), _) => v,
            (None, UpdateKind::Gradient(v)) => v,
            (None, UpdateKind::Delta(_)) => unreachable!("decoupled tasks keep v when instrumented"),
        };
        let v_dev = v.dist_sq(&at_d.grad);
        let i = task.msg.sample_id;
        let u_dev = match self.direction(i, &self.x) {
            Ok(u) => u.dist_sq(&at_t.grad),
            Err(e) => {
                log::warn!("u_t unavailable at iteration {t}: {e}");
                f64::NAN
            }
        };
        let x_prime = match &task.x_prime {
            Some(xp) => Ok(xp.clone()),
            None => prox::prox_step(&self.problem.regularizer(), x_read, v, self.eta).map(|r| r.x_prime),
        };
        let p_gap = match (at_d.objective, x_prime.and_then(|xp| self.problem.objective_value(&xp))) {
            (Some(pd), Ok(pp)) => Some(pd - pp),
            (_, res) => {
                if let Err(e) = res {
                    log::warn!("prox gap unavailable at iteration {t}: {e}");
                }
                None
            }
        };
        let subopt = match (&self.opts.reference, at_t.objective) {
            (Some(r), Some(p)) => Some(p - r.p_star),
            _ => None,
        };
        self.trace.push(TraceEvent {
            t,
            stage: self.stage,
            x_read_iter: read_iter,
            staleness,
            worker: task.msg.worker_id,
            sample: i,
            v_norm_sq_dev: v_dev,
            u_norm_sq_dev: u_dev,
            p_gap,
            subopt,
        });

        let oldest = self.in_flight.iter().flatten().map(|f| f.msg.read_iter).min().unwrap_or(t).min(t);
        self.points.retain(|&k, _| k >= oldest);
    }

    fn epoch_row(&self, stage: usize, trace_start: usize) -> Result<EpochRow> {
        let objective = self.problem.objective_value(&self.x)?;
        let reference = self.opts.reference.as_ref();
        let events = &self.trace[trace_start..];
        let mean_v_dev = (self.opts.instrument && stage > 0 && !events.is_empty())
            .then(|| events.iter().map(|e| e.v_norm_sq_dev).sum::<f64>() / events.len() as f64);
        Ok(EpochRow {
            stage,
            epoch: self.grad_evals as f64 / self.problem.n() as f64,
            grad_evals: self.grad_evals,
            sim_time: self.clock,
            objective,
            subopt: reference.map(|r| objective - r.p_star),
            dist_sq: reference.map(|r| self.x.dist_sq(&r.x_star)),
            mean_v_dev,
            max_staleness: self.stage_max_staleness,
            iterate: self.x.clone(),
        })
    }
}
