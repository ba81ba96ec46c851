//! Decoupled asynchronous proximal stochastic variance-reduced gradient
//! methods for `min_X (1/n) Σ ‖Xᵀa_i − b_i‖² + (λ1/2)‖X‖²_F + h(X)`, run on a
//! deterministic discrete-event model of a parameter server.
//!
//! ```
//! use dapsvrg::data::{generate_lowrank, LowRankSpec};
//! use dapsvrg::engine::{run, AlgoConfig, Algorithm};
//!
//! let spec = LowRankSpec { d1: 6, d2: 4, rank: 2, n: 40, ..LowRankSpec::desk(7) };
//! let problem = generate_lowrank(&spec).unwrap().problem;
//! let eta = 1.0 / (8.0 * problem.constants().sample_smoothness);
//! let cfg = AlgoConfig::new(Algorithm::DapSvrg, eta, 5, 80, 4);
//! let record = run(&problem, &cfg, false).unwrap();
//! assert!(record.rows.last().unwrap().objective < record.rows[0].objective);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod grad;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod prox;

pub use error::{Error, Result};
pub use matrix::ParamMatrix;
pub use model::{CompositeProblem, Constants, Partition, Reference, Regularizer, SampleSet};
