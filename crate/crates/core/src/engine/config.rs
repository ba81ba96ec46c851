use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::CompositeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    /// Server-side prox on received variance-reduced gradients.
    TapSvrg,
    /// Worker-side prox; the server adds the shipped deltas.
    DapSvrg,
    DapSgdConst,
    /// Step `η / (s+1)^β` at stage `s`.
    DapSgdDecay,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::TapSvrg, Algorithm::DapSvrg, Algorithm::DapSgdConst, Algorithm::DapSgdDecay];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::TapSvrg => "tap-svrg",
            Algorithm::DapSvrg => "dap-svrg",
            Algorithm::DapSgdConst => "dap-sgd-const",
            Algorithm::DapSgdDecay => "dap-sgd-decay",
        }
    }

    pub fn is_svrg(self) -> bool {
        matches!(self, Algorithm::TapSvrg | Algorithm::DapSvrg)
    }

    /// Workers evaluate the prox and ship deltas.
    pub fn is_decoupled(self) -> bool {
        !matches!(self, Algorithm::TapSvrg)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm '{s}'")))
    }
}

/// Simulated time units charged per operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub grad_cost: f64,
    pub prox_cost: f64,
    pub add_cost: f64,
    pub net_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { grad_cost: 1.0, prox_cost: 10.0, add_cost: 0.01, net_cost: 0.0 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.grad_cost, self.prox_cost, self.add_cost, self.net_cost];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(format!("costs must be finite and nonnegative: {self:?}")));
        }
        if self.prox_cost < self.add_cost {
            return Err(Error::InvalidParameter(format!(
                "prox_cost ({}) must be at least add_cost ({})",
                self.prox_cost, self.add_cost
            )));
        }
        Ok(())
    }
}

/// Where a worker draws its sample index from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Uniform over the worker's own block.
    #[default]
    PerPartition,
    /// Uniform over all samples.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    /// Decay exponent, used by [`Algorithm::DapSgdDecay`] only.
    pub beta: f64,
    pub stages: usize,
    pub inner_iters: usize,
    pub workers: usize,
    pub seed: u64,
    pub max_delay_cap: Option<usize>,
    pub cost: CostModel,
    pub sampling: Sampling,
    /// Half-width of the multiplicative compute jitter; 0 disables it.
    pub jitter: f64,
}

impl AlgoConfig {
    pub fn new(algorithm: Algorithm, eta: f64, stages: usize, inner_iters: usize, workers: usize) -> Self {
        AlgoConfig {
            algorithm,
            eta,
            beta: 0.5,
            stages,
            inner_iters,
            workers,
            seed: 0,
            max_delay_cap: None,
            cost: CostModel::default(),
            sampling: Sampling::default(),
            jitter: 0.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if self.algorithm == Algorithm::DapSgdDecay && (!self.beta.is_finite() || self.beta < 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if self.stages == 0 || self.inner_iters == 0 || self.workers == 0 {
            return Err(Error::InvalidParameter("stages, inner iterations and workers must all be positive".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::InvalidParameter(format!("jitter must be in [0, 1), got {}", self.jitter)));
        }
        self.cost.validate()
    }

    /// Step size used during stage `s`.
    pub fn step_size(&self, stage: usize) -> f64 {
        match self.algorithm {
            Algorithm::DapSgdDecay => self.eta / ((stage + 1) as f64).powf(self.beta),
            _ => self.eta,
        }
    }

    /// Conditions the convergence analysis needs but the engine does not
    /// enforce, checked against the per-sample smoothness and `τ = K − 1`.
    pub fn warnings(&self, problem: &CompositeProblem) -> Vec<String> {
        let mut out = Vec::new();
        if !self.algorithm.is_svrg() {
            return out;
        }
        let l = problem.constants().sample_smoothness;
        let tau = (self.workers - 1) as f64;
        if self.eta >= 1.0 / l {
            out.push(format!("eta {} is not below 1/L = {}", self.eta, 1.0 / l));
        }
        let q = 8.0 * l * l * self.eta * self.eta * tau * tau;
        if q >= 1.0 {
            out.push(format!("8 L^2 eta^2 tau^2 = {q} is not below 1"));
        }
        out
    }
}
