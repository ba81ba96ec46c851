use crate::engine::config::Algorithm;
use crate::matrix::{Delta, ParamMatrix};

/// Contents of a worker-to-server message.
#[derive(Debug, Clone)]
pub enum UpdateKind {
    /// Variance-reduced gradient, prox applied by the server.
    Gradient(ParamMatrix),
    /// `x′ − x_read`, added by the server.
    Delta(Delta),
}

#[derive(Debug, Clone)]
pub struct UpdateMessage {
    pub kind: UpdateKind,
    /// Number of server updates applied when the worker read its iterate.
    pub read_iter: usize,
    pub worker_id: usize,
    pub sample_id: usize,
    pub arrival_time: f64,
}

/// One applied server update, observed by the instrumentation hook.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t: usize,
    pub stage: usize,
    pub x_read_iter: usize,
    pub staleness: usize,
    pub worker: usize,
    pub sample: usize,
    /// `‖v_t − ∇f(x_{d(t)})‖²`
    pub v_norm_sq_dev: f64,
    /// `‖u_t − ∇f(x_t)‖²`
    pub u_norm_sq_dev: f64,
    /// `P(x_{d(t)}) − P(x′_{d(t)})`
    pub p_gap: Option<f64>,
    /// `P(x_t) − P(x*)`
    pub subopt: Option<f64>,
}

/// Interval during which a worker was computing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpan {
    pub worker: usize,
    pub stage: usize,
    pub start: f64,
    pub end: f64,
    /// `None` for snapshot-phase partial gradients.
    pub read_iter: Option<usize>,
    pub applied_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    /// Stages completed; 0 is the starting point.
    pub stage: usize,
    pub epoch: f64,
    pub grad_evals: u64,
    pub sim_time: f64,
    pub objective: f64,
    pub subopt: Option<f64>,
    pub dist_sq: Option<f64>,
    pub mean_v_dev: Option<f64>,
    pub max_staleness: usize,
    pub iterate: ParamMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub workers: usize,
    pub seed: u64,
    pub rows: Vec<EpochRow>,
    pub final_iterate: ParamMatrix,
    pub max_staleness: usize,
    pub trace: Vec<TraceEvent>,
    pub spans: Vec<TaskSpan>,
    /// Iterate after every update, when requested.
    pub iterates: Vec<ParamMatrix>,
    pub server_busy_time: f64,
    pub total_time: f64,
    pub updates_applied: usize,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn server_utilization(&self) -> f64 {
        if self.total_time > 0.0 {
            self.server_busy_time / self.total_time
        } else {
            0.0
        }
    }

    pub fn stage_events(&self, stage: usize) -> impl Iterator<Item = &TraceEvent> {
        self.trace.iter().filter(move |e| e.stage == stage)
    }
}
