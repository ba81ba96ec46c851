//! Seeded synthetic datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::ParamMatrix;
use crate::model::{CompositeProblem, Regularizer, SampleSet};

/// Low-rank matrix regression `B = A·X_true` with `X_true = U·Vᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowRankSpec {
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    pub n: usize,
    pub seed: u64,
    /// Frobenius ridge folded into the smooth part.
    pub lambda1: f64,
    /// Nuclear-norm weight.
    pub lambda2: f64,
}

impl LowRankSpec {
    /// 30 x 15, rank 5, 500 samples.
    pub fn desk(seed: u64) -> Self {
        LowRankSpec { d1: 30, d2: 15, rank: 5, n: 500, seed, lambda1: 1e-3, lambda2: 1e-3 }
    }

    /// 100 x 50, rank 10, 10 000 samples.
    pub fn paper(seed: u64) -> Self {
        LowRankSpec { d1: 100, d2: 50, rank: 10, n: 10_000, ..Self::desk(seed) }
    }
}

#[derive(Debug, Clone)]
pub struct LowRankData {
    pub problem: CompositeProblem,
    pub x_true: ParamMatrix,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ParamMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    ParamMatrix::from_vec(rows, cols, data).expect("normal draws are finite")
}

/// Draws `U` (d1 x rank), `V` (d2 x rank) and `A` (n x d1), in that order,
/// with i.i.d. standard normal entries. The problem carries ridge `λ1` and
/// `Nuclear(λ2)`.
pub fn generate_lowrank(spec: &LowRankSpec) -> Result<LowRankData> {
    let LowRankSpec { d1, d2, rank, n, seed, lambda1, lambda2 } = *spec;
    if d1 == 0 || d2 == 0 || n == 0 || rank == 0 || rank > d1.min(d2) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= rank <= min(d1, d2) and n >= 1; got d1={d1}, d2={d2}, rank={rank}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = normal_matrix(&mut rng, d1, rank);
    let v = normal_matrix(&mut rng, d2, rank);
    let a = normal_matrix(&mut rng, n, d1);
    let x_true = u.matmul(&v.transpose())?;
    let b = a.matmul(&x_true)?;
    let problem = CompositeProblem::new(SampleSet::new(a, b)?, lambda1, Regularizer::Nuclear(lambda2))?;
    Ok(LowRankData { problem, x_true })
}

/// Noisy linear regression `b = A·x_true + σ·ε` with a single target column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpec {
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub seed: u64,
    pub ridge: f64,
    pub reg: Regularizer,
}

impl LinearSpec {
    /// One feature, 30 samples, unit noise, `L1(0.1)`.
    pub fn scalar_lasso(seed: u64) -> Self {
        LinearSpec { n: 30, d: 1, noise: 1.0, seed, ridge: 0.0, reg: Regularizer::L1(0.1) }
    }
}

pub fn generate_linear(spec: &LinearSpec) -> Result<LowRankData> {
    if spec.n == 0 || spec.d == 0 || !(spec.noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("invalid linear spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x_true = normal_matrix(&mut rng, spec.d, 1);
    let a = normal_matrix(&mut rng, spec.n, spec.d);
    let noise = normal_matrix(&mut rng, spec.n, 1);
    let mut b = a.matmul(&x_true)?;
    b.axpy(spec.noise, &noise);
    let problem = CompositeProblem::new(SampleSet::new(a, b)?, spec.ridge, spec.reg)?;
    Ok(LowRankData { problem, x_true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn lowrank_has_exact_rank_and_zero_residual() {
        let mut spec = LowRankSpec::desk(3);
        spec.n = 60;
        let d = generate_lowrank(&spec).unwrap();
        let s = linalg::singular_values(&d.x_true).unwrap();
        assert!(s[spec.rank - 1] > 1e-6 * s[0]);
        assert!(s[spec.rank..].iter().all(|&v| v <= 1e-10 * s[0]));
        let resid = d.problem.samples().features().matmul(&d.x_true).unwrap();
        assert_eq!(resid.sub(d.problem.samples().targets()).frobenius(), 0.0);
    }

    #[test]
    fn lowrank_is_deterministic() {
        let spec = LowRankSpec { n: 20, ..LowRankSpec::desk(9) };
        let a = generate_lowrank(&spec).unwrap();
        let b = generate_lowrank(&spec).unwrap();
        let bytes = |m: &ParamMatrix| m.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>();
        assert_eq!(bytes(a.problem.samples().features()), bytes(b.problem.samples().features()));
        assert_eq!(bytes(a.problem.samples().targets()), bytes(b.problem.samples().targets()));
        let c = generate_lowrank(&LowRankSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a.x_true, c.x_true);
    }

    #[test]
    fn invalid_dims() {
        let spec = LowRankSpec { rank: 16, ..LowRankSpec::desk(0) };
        assert!(generate_lowrank(&spec).is_err());
        assert!(generate_lowrank(&LowRankSpec { n: 0, ..LowRankSpec::desk(0) }).is_err());
    }
}
