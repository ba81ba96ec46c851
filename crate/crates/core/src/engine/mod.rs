//! Deterministic parameter-server simulator for TAP-SVRG, DAP-SVRG and the
//! DAP-SGD baselines.

mod config;
mod record;
mod serial;
mod sim;
mod speedup;

pub use config::{AlgoConfig, Algorithm, CostModel, Sampling};
pub use record::{EpochRow, RunRecord, TaskSpan, TraceEvent, UpdateKind, UpdateMessage};
pub use serial::{serial_prox_svrg, UpdateForm};
pub use sim::{run, run_with, RunOptions, DIVERGENCE_NORM};
pub use speedup::{simulated_speedup, time_to_target, SpeedupRow};
