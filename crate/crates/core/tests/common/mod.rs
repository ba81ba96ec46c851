#![allow(dead_code)]

use dapsvrg::{CompositeProblem, ParamMatrix, Regularizer, SampleSet};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ParamMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    ParamMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn to_na(x: &ParamMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice())
}

pub fn from_na(x: &DMatrix<f64>) -> ParamMatrix {
    let data = (0..x.nrows()).flat_map(|i| (0..x.ncols()).map(move |j| x[(i, j)])).collect();
    ParamMatrix::from_vec(x.nrows(), x.ncols(), data).unwrap()
}

/// Random dense `n x d1 -> d2` regression problem with ridge only.
pub fn random_problem(seed: u64, n: usize, d1: usize, d2: usize, ridge: f64, reg: Regularizer) -> CompositeProblem {
    let mut r = rng(seed);
    let a = random_matrix(&mut r, n, d1);
    let b = random_matrix(&mut r, n, d2);
    CompositeProblem::new(SampleSet::new(a, b).unwrap(), ridge, reg).unwrap()
}

pub fn all_regularizers(l: f64) -> Vec<Regularizer> {
    vec![
        Regularizer::None,
        Regularizer::L1(l),
        Regularizer::SquaredL2(l),
        Regularizer::ElasticNet { l1: l, l2: 0.5 * l },
        Regularizer::Nuclear(l),
    ]
}

pub fn rel_err(a: &ParamMatrix, b: &ParamMatrix) -> f64 {
    a.sub(b).frobenius() / b.frobenius().max(1e-300)
}
