//! The composite least-squares problem `P(X) = f(X) + h(X)` with
//!
//! ```text
//! f(X) = (1/n) Σ_i ‖Xᵀa_i − b_i‖² + (λ1/2)‖X‖_F²
//! ```
//!
//! and `h` one of the closed-form [`Regularizer`]s. The Frobenius ridge term
//! is part of the smooth part; every `f_i` carries the full ridge so that
//! `f = (1/n) Σ f_i` holds exactly.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::ParamMatrix;
use crate::prox;

pub const EIGEN_TOLERANCE: f64 = 1e-8;
pub const EIGEN_MAX_ITERS: usize = 10_000;

/// Data samples: row `i` of `a` is `a_i` (length d1), row `i` of `b` is `b_i`
/// (length d2).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    a: ParamMatrix,
    b: ParamMatrix,
}

impl SampleSet {
    pub fn new(a: ParamMatrix, b: ParamMatrix) -> Result<Self> {
        if a.rows() != b.rows() {
            return Err(Error::DimensionMismatch {
                expected_rows: a.rows(),
                expected_cols: b.cols(),
                actual_rows: b.rows(),
                actual_cols: b.cols(),
            });
        }
        Ok(SampleSet { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn features(&self) -> &ParamMatrix {
        &self.a
    }

    pub fn targets(&self) -> &ParamMatrix {
        &self.b
    }

    /// Shape `(d1, d2)` of the parameter matrix.
    pub fn param_shape(&self) -> (usize, usize) {
        (self.a.cols(), self.b.cols())
    }
}

/// The nonsmooth term `h`. All weights are nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    None,
    L1(f64),
    SquaredL2(f64),
    ElasticNet { l1: f64, l2: f64 },
    Nuclear(f64),
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        let weights: &[f64] = match self {
            Regularizer::None => &[],
            Regularizer::L1(l) | Regularizer::SquaredL2(l) | Regularizer::Nuclear(l) => std::slice::from_ref(l),
            Regularizer::ElasticNet { l1, l2 } => return check_weights(&[*l1, *l2]),
        };
        check_weights(weights)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::L1(_) => "l1",
            Regularizer::SquaredL2(_) => "l2",
            Regularizer::ElasticNet { .. } => "elastic",
            Regularizer::Nuclear(_) => "nuclear",
        }
    }
}

fn check_weights(ws: &[f64]) -> Result<()> {
    if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "regularization weights must be finite and nonnegative, got {ws:?}"
        )));
    }
    Ok(())
}

/// Contiguous assignment of sample indices to workers, in worker order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    bounds: Vec<usize>,
}

impl Partition {
    /// Splits `n` samples into `k` contiguous blocks whose sizes differ by at
    /// most one; the first `n % k` blocks get the extra sample.
    pub fn even(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!("cannot split {n} samples across {k} workers")));
        }
        let base = n / k;
        let extra = n % k;
        let mut bounds = Vec::with_capacity(k + 1);
        bounds.push(0);
        for w in 0..k {
            let size = base + usize::from(w < extra);
            bounds.push(bounds[w] + size);
        }
        Ok(Partition { bounds })
    }

    pub fn workers(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn block(&self, worker: usize) -> Range<usize> {
        self.bounds[worker]..self.bounds[worker + 1]
    }

    pub fn block_size(&self, worker: usize) -> usize {
        self.bounds[worker + 1] - self.bounds[worker]
    }

    pub fn total(&self) -> usize {
        *self.bounds.last().unwrap()
    }
}

/// Smoothness and strong-convexity constants of `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// `L = 2 λ_max(AᵀA)/n + λ1`, the gradient Lipschitz constant of `f`.
    pub smoothness: f64,
    /// `μ = 2 λ_min(AᵀA)/n + λ1`.
    pub strong_convexity: f64,
    /// `max_i 2‖a_i‖² + λ1`, the largest Lipschitz constant among the `∇f_i`.
    /// Stochastic step-size rules are stated against this value.
    pub sample_smoothness: f64,
}

/// A reference optimum injected into runs for suboptimality reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: ParamMatrix,
    pub p_star: f64,
}

#[derive(Debug, Clone)]
pub struct CompositeProblem {
    samples: SampleSet,
    ridge: f64,
    reg: Regularizer,
    constants: Constants,
    partition: Partition,
}

impl CompositeProblem {
    /// Builds the problem and estimates its constants. Rejects an all-zero
    /// feature matrix unless the ridge keeps `f` strongly convex.
    pub fn new(samples: SampleSet, ridge: f64, reg: Regularizer) -> Result<Self> {
        if !ridge.is_finite() || ridge < 0.0 {
            return Err(Error::InvalidParameter(format!("ridge must be nonnegative, got {ridge}")));
        }
        reg.validate()?;
        if !samples.a.is_finite() || !samples.b.is_finite() {
            return Err(Error::NonFinite("samples"));
        }
        if ridge == 0.0 && samples.a.as_slice().iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter("feature matrix is all zero and ridge is zero".into()));
        }
        let partition = Partition::even(samples.n(), 1)?;
        let mut problem = CompositeProblem {
            samples,
            ridge,
            reg,
            constants: Constants { smoothness: 0.0, strong_convexity: 0.0, sample_smoothness: 0.0 },
            partition,
        };
        problem.constants = problem.estimate_constants()?;
        Ok(problem)
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.n()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn regularizer(&self) -> Regularizer {
        self.reg
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn param_shape(&self) -> (usize, usize) {
        self.samples.param_shape()
    }

    pub fn zeros(&self) -> ParamMatrix {
        let (d1, d2) = self.param_shape();
        ParamMatrix::zeros(d1, d2)
    }

    /// Same data with a different regularizer.
    pub fn with_regularizer(&self, reg: Regularizer) -> Result<Self> {
        reg.validate()?;
        let mut p = self.clone();
        p.reg = reg;
        Ok(p)
    }

    pub fn with_partition(mut self, partition: Partition) -> Result<Self> {
        if partition.total() != self.n() {
            return Err(Error::InvalidParameter(format!(
                "partition covers {} samples, problem has {}",
                partition.total(),
                self.n()
            )));
        }
        self.partition = partition;
        Ok(self)
    }

    /// Overrides the estimated `L` and `μ`.
    pub fn with_constants(mut self, smoothness: f64, strong_convexity: f64) -> Result<Self> {
        if !(smoothness > 0.0) || !(strong_convexity >= 0.0) || strong_convexity > smoothness {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= mu <= L and L > 0, got L={smoothness}, mu={strong_convexity}"
            )));
        }
        self.constants.smoothness = smoothness;
        self.constants.strong_convexity = strong_convexity;
        Ok(self)
    }

    fn check_x(&self, x: &ParamMatrix) -> Result<()> {
        let (d1, d2) = self.param_shape();
        x.check_shape(d1, d2)
    }

    /// Residual `Xᵀa_i − b_i` written into `out` (length d2).
    fn residual_into(&self, i: usize, x: &ParamMatrix, out: &mut [f64]) {
        let a = self.samples.a.row(i);
        out.copy_from_slice(self.samples.b.row(i));
        out.iter_mut().for_each(|r| *r = -*r);
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            for (r, &xv) in out.iter_mut().zip(x.row(k)) {
                *r += ak * xv;
            }
        }
    }

    /// `f(X)`.
    pub fn smooth_value(&self, x: &ParamMatrix) -> Result<f64> {
        self.check_x(x)?;
        let mut r = vec![0.0; x.cols()];
        let mut total = 0.0;
        for i in 0..self.n() {
            self.residual_into(i, x, &mut r);
            total += r.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(total / self.n() as f64 + 0.5 * self.ridge * x.frobenius_sq())
    }

    /// `P(X) = f(X) + h(X)`.
    pub fn objective_value(&self, x: &ParamMatrix) -> Result<f64> {
        Ok(self.smooth_value(x)? + prox::regularizer_value(&self.reg, x)?)
    }

    /// `f_i(X) = ‖Xᵀa_i − b_i‖² + (λ1/2)‖X‖_F²`.
    pub fn sample_value(&self, i: usize, x: &ParamMatrix) -> Result<f64> {
        self.check_index(i)?;
        self.check_x(x)?;
        let mut r = vec![0.0; x.cols()];
        self.residual_into(i, x, &mut r);
        Ok(r.iter().map(|v| v * v).sum::<f64>() + 0.5 * self.ridge * x.frobenius_sq())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    /// `∇f_i(X) = 2 a_i (Xᵀa_i − b_i)ᵀ + λ1 X`.
    pub fn grad_sample(&self, i: usize, x: &ParamMatrix) -> Result<ParamMatrix> {
        self.check_index(i)?;
        self.check_x(x)?;
        let mut out = x.scaled(self.ridge);
        self.add_data_grad(i, x, 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale · 2 a_i (Xᵀa_i − b_i)ᵀ`
    fn add_data_grad(&self, i: usize, x: &ParamMatrix, scale: f64, out: &mut ParamMatrix) {
        let mut r = vec![0.0; x.cols()];
        self.residual_into(i, x, &mut r);
        let a = self.samples.a.row(i);
        for (k, &ak) in a.iter().enumerate() {
            let c = 2.0 * scale * ak;
            if c == 0.0 {
                continue;
            }
            for (o, &rv) in out.row_mut(k).iter_mut().zip(&r) {
                *o += c * rv;
            }
        }
    }

    /// `Σ_{i ∈ range} ∇f_i(X)`, summed left to right. This is the partial
    /// gradient a worker reports for its block.
    pub fn grad_partial(&self, range: Range<usize>, x: &ParamMatrix) -> Result<ParamMatrix> {
        self.check_x(x)?;
        if range.end > self.n() || range.start > range.end {
            return Err(Error::IndexOutOfRange { index: range.end.saturating_sub(1), n: self.n() });
        }
        let mut acc = x.scaled(0.0);
        let mut g = x.scaled(0.0);
        for i in range {
            g.as_mut_slice().copy_from_slice(x.as_slice());
            g.scale_mut(self.ridge);
            self.add_data_grad(i, x, 1.0, &mut g);
            acc.add_assign(&g);
        }
        Ok(acc)
    }

    /// Full gradient aggregated from the per-block partial sums of
    /// `partition`, in block order, divided by `n`.
    pub fn grad_full_partitioned(&self, partition: &Partition, x: &ParamMatrix) -> Result<ParamMatrix> {
        if partition.total() != self.n() {
            return Err(Error::InvalidParameter("partition does not cover the samples".into()));
        }
        let mut total = self.zeros();
        self.check_x(x)?;
        for k in 0..partition.workers() {
            total.add_assign(&self.grad_partial(partition.block(k), x)?);
        }
        total.scale_mut(1.0 / self.n() as f64);
        Ok(total)
    }

    /// `∇f(X)` using the problem's own partition.
    pub fn grad_full(&self, x: &ParamMatrix) -> Result<ParamMatrix> {
        self.grad_full_partitioned(&self.partition, x)
    }

    fn estimate_constants(&self) -> Result<Constants> {
        let n = self.n() as f64;
        let gram = self.samples.a.gram();
        let (hi, lo) = linalg::psd_extreme_eigenvalues(&gram, EIGEN_TOLERANCE, EIGEN_MAX_ITERS)?;
        let max_row =
            (0..self.n()).map(|i| self.samples.a.row(i).iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
        Ok(Constants {
            smoothness: 2.0 * hi / n + self.ridge,
            strong_convexity: 2.0 * lo / n + self.ridge,
            sample_smoothness: 2.0 * max_row + self.ridge,
        })
    }
}

/// `(L, μ)` estimated by power iteration on `AᵀA`.
pub fn estimate_constants(problem: &CompositeProblem) -> (f64, f64) {
    let c = problem.constants();
    (c.smoothness, c.strong_convexity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(a: f64, b: f64, ridge: f64) -> CompositeProblem {
        let s = SampleSet::new(ParamMatrix::column(&[a]).unwrap(), ParamMatrix::column(&[b]).unwrap()).unwrap();
        CompositeProblem::new(s, ridge, Regularizer::None).unwrap()
    }

    #[test]
    fn zero_iterate_gives_mean_target_energy() {
        let a = ParamMatrix::from_rows(&[&[1.0, 0.0], &[0.5, 2.0], &[1.0, 1.0]]).unwrap();
        let b = ParamMatrix::from_rows(&[&[1.0], &[-2.0], &[3.0]]).unwrap();
        let p = CompositeProblem::new(SampleSet::new(a, b.clone()).unwrap(), 0.0, Regularizer::L1(0.3)).unwrap();
        let x = p.zeros();
        let expected = b.frobenius_sq() / 3.0;
        assert_eq!(p.smooth_value(&x).unwrap(), expected);
        assert_eq!(p.objective_value(&x).unwrap(), expected);
    }

    #[test]
    fn exact_fit_scalar() {
        let p = scalar_problem(1.0, 2.0, 0.0);
        let x = ParamMatrix::column(&[2.0]).unwrap();
        assert_eq!(p.smooth_value(&x).unwrap(), 0.0);
        assert_eq!(p.grad_sample(0, &x).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn scalar_gradient() {
        let p = scalar_problem(1.0, 0.0, 0.0);
        let g = p.grad_sample(0, &ParamMatrix::column(&[3.0]).unwrap()).unwrap();
        assert_eq!(g.as_slice(), &[6.0]);
    }

    #[test]
    fn errors_on_shape_and_index() {
        let p = scalar_problem(1.0, 0.0, 0.0);
        let bad = ParamMatrix::zeros(2, 1);
        assert!(matches!(p.smooth_value(&bad), Err(Error::DimensionMismatch { .. })));
        assert_eq!(p.grad_sample(1, &p.zeros()).unwrap_err(), Error::IndexOutOfRange { index: 1, n: 1 });
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let s = SampleSet::new(ParamMatrix::zeros(2, 2), ParamMatrix::zeros(2, 1)).unwrap();
        assert!(CompositeProblem::new(s.clone(), 0.0, Regularizer::None).is_err());
        assert!(CompositeProblem::new(s.clone(), 0.5, Regularizer::None).is_ok());
        assert!(CompositeProblem::new(s, 0.5, Regularizer::L1(-1.0)).is_err());
        assert!(SampleSet::new(ParamMatrix::zeros(2, 2), ParamMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn identity_design_constants() {
        let n = 4;
        let s = SampleSet::new(ParamMatrix::identity(n), ParamMatrix::zeros(n, 1)).unwrap();
        let p = CompositeProblem::new(s, 0.0, Regularizer::None).unwrap();
        let (l, mu) = estimate_constants(&p);
        assert!((l - 2.0 / n as f64).abs() < 1e-14);
        assert!((mu - 2.0 / n as f64).abs() < 1e-14);
    }

    #[test]
    fn rank_one_constants() {
        let a = ParamMatrix::from_rows(&[&[1.0, 2.0, 2.0]]).unwrap();
        let s = SampleSet::new(a, ParamMatrix::zeros(1, 1)).unwrap();
        let p = CompositeProblem::new(s, 0.0, Regularizer::None).unwrap();
        let (l, mu) = estimate_constants(&p);
        assert!((l - 18.0).abs() < 1e-9);
        assert_eq!(mu, 0.0);
        assert_eq!(p.constants().sample_smoothness, 18.0);
    }

    #[test]
    fn partition_blocks() {
        let p = Partition::even(10, 4).unwrap();
        let sizes: Vec<usize> = (0..4).map(|k| p.block_size(k)).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        assert_eq!(p.block(3), 8..10);
        assert!(Partition::even(3, 4).is_err());
        assert!(Partition::even(3, 0).is_err());
    }

    #[test]
    fn partitioned_full_gradient_matches_single_pass() {
        let a = ParamMatrix::from_rows(&[&[1.0, 0.2], &[0.5, 2.0], &[1.0, 1.0], &[-1.0, 0.3], &[0.7, -0.4]]).unwrap();
        let b = ParamMatrix::from_rows(&[&[1.0, 0.0], &[-2.0, 1.0], &[3.0, 0.5], &[0.1, 0.1], &[2.0, -1.0]]).unwrap();
        let p = CompositeProblem::new(SampleSet::new(a, b).unwrap(), 0.1, Regularizer::None).unwrap();
        let x = ParamMatrix::from_rows(&[&[0.3, -0.2], &[1.1, 0.4]]).unwrap();
        let single = p.grad_full(&x).unwrap();
        let split = p.grad_full_partitioned(&Partition::even(5, 3).unwrap(), &x).unwrap();
        assert!(single.max_abs_diff(&split) < 1e-12);
    }
}
