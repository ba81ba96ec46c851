//! SVRG snapshots, variance-reduced and plain stochastic gradients, and the
//! counter-keyed sample draws that make trajectories independent of event
//! interleaving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::matrix::ParamMatrix;
use crate::model::{CompositeProblem, Partition};

/// Anchor point `x̃` of stage `s` with its full gradient.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub x_tilde: ParamMatrix,
    pub full_grad: ParamMatrix,
    pub stage: usize,
}

/// Full gradient at `x` assembled from the partial sums `∇f^k` of each
/// block, in block order.
pub fn make_snapshot(
    problem: &CompositeProblem,
    partition: &Partition,
    x: &ParamMatrix,
    stage: usize,
) -> Result<Snapshot> {
    let full_grad = problem.grad_full_partitioned(partition, x)?;
    Ok(Snapshot { x_tilde: x.clone(), full_grad, stage })
}

/// `v = ∇f_i(x_stale) − ∇f_i(x̃) + ∇f(x̃)`.
pub fn reduced_gradient(
    problem: &CompositeProblem,
    i: usize,
    x_stale: &ParamMatrix,
    snap: &Snapshot,
) -> Result<ParamMatrix> {
    let mut v = problem.grad_sample(i, x_stale)?;
    v.sub_assign(&problem.grad_sample(i, &snap.x_tilde)?);
    v.add_assign(&snap.full_grad);
    Ok(v)
}

/// `∇f_i(x_stale)`, no correction.
pub fn sgd_gradient(problem: &CompositeProblem, i: usize, x_stale: &ParamMatrix) -> Result<ParamMatrix> {
    problem.grad_sample(i, x_stale)
}

/// Key of one random draw. Every draw in a run is a pure function of its key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DrawKey {
    pub seed: u64,
    pub stage: u64,
    pub iteration: u64,
    pub worker: u32,
    pub stream: u32,
}

/// Stream tags separating independent uses of the same key.
pub const STREAM_SAMPLE: u32 = 0;
pub const STREAM_JITTER: u32 = 1;

impl DrawKey {
    pub fn new(seed: u64, stage: usize, iteration: usize, worker: usize, stream: u32) -> Self {
        DrawKey { seed, stage: stage as u64, iteration: iteration as u64, worker: worker as u32, stream }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&self.stage.to_le_bytes());
        bytes[16..24].copy_from_slice(&self.iteration.to_le_bytes());
        bytes[24..28].copy_from_slice(&self.worker.to_le_bytes());
        bytes[28..32].copy_from_slice(&self.stream.to_le_bytes());
        ChaCha8Rng::from_seed(bytes)
    }

    /// Uniform index in `0..n`.
    pub fn index(&self, n: usize) -> usize {
        self.rng().random_range(0..n)
    }

    /// Uniform value in `[0, 1)`.
    pub fn unit(&self) -> f64 {
        self.rng().random::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Regularizer, SampleSet};

    fn problem() -> CompositeProblem {
        let a = ParamMatrix::from_rows(&[&[1.0, 0.5], &[-1.0, 2.0], &[0.3, 0.3], &[2.0, -1.0]]).unwrap();
        let b = ParamMatrix::from_rows(&[&[1.0], &[0.0], &[2.0], &[-1.0]]).unwrap();
        CompositeProblem::new(SampleSet::new(a, b).unwrap(), 0.01, Regularizer::L1(0.1)).unwrap()
    }

    #[test]
    fn reduced_gradient_at_anchor_is_full_gradient() {
        let p = problem();
        let x = ParamMatrix::column(&[0.4, -0.7]).unwrap();
        let snap = make_snapshot(&p, p.partition(), &x, 0).unwrap();
        for i in 0..p.n() {
            let v = reduced_gradient(&p, i, &x, &snap).unwrap();
            assert!(v.max_abs_diff(&snap.full_grad) < 1e-14);
        }
    }

    #[test]
    fn snapshot_independent_of_block_count() {
        let p = problem();
        let x = ParamMatrix::column(&[0.1, 0.2]).unwrap();
        let one = make_snapshot(&p, &Partition::even(4, 1).unwrap(), &x, 3).unwrap();
        let four = make_snapshot(&p, &Partition::even(4, 4).unwrap(), &x, 3).unwrap();
        assert!(one.full_grad.max_abs_diff(&four.full_grad) < 1e-12);
        assert_eq!(one.stage, 3);
    }

    #[test]
    fn sgd_gradient_is_sample_gradient() {
        let p = problem();
        let x = ParamMatrix::column(&[0.1, 0.2]).unwrap();
        assert_eq!(sgd_gradient(&p, 2, &x).unwrap(), p.grad_sample(2, &x).unwrap());
        assert!(sgd_gradient(&p, 4, &x).is_err());
    }

    #[test]
    fn draws_are_keyed() {
        let k = DrawKey::new(7, 1, 2, 3, STREAM_SAMPLE);
        assert_eq!(k.index(1000), k.index(1000));
        let other = DrawKey::new(7, 1, 2, 4, STREAM_SAMPLE);
        let hits = (0..64)
            .filter(|&t| DrawKey::new(7, 1, t, 3, 0).index(1 << 20) == DrawKey::new(7, 1, t, 4, 0).index(1 << 20))
            .count();
        assert!(hits < 2);
        assert!(other.unit() < 1.0);
    }
}
