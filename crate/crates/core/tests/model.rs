mod common;

use common::*;
use dapsvrg::data::{generate_lowrank, LowRankSpec};
use dapsvrg::model::estimate_constants;
use dapsvrg::{CompositeProblem, Error, ParamMatrix, Partition, Regularizer, SampleSet};
use nalgebra::SymmetricEigen;

fn scalar(a: f64, b: f64, ridge: f64) -> CompositeProblem {
    let s = SampleSet::new(ParamMatrix::column(&[a]).unwrap(), ParamMatrix::column(&[b]).unwrap()).unwrap();
    CompositeProblem::new(s, ridge, Regularizer::None).unwrap()
}

#[test]
fn smooth_value_zero_iterate_is_target_energy() {
    let p = random_problem(1, 12, 4, 3, 0.0, Regularizer::None);
    let expected = p.samples().targets().frobenius_sq() / 12.0;
    assert!((p.smooth_value(&p.zeros()).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn smooth_value_exact_fit_is_zero() {
    let p = scalar(1.0, 2.0, 0.0);
    assert_eq!(p.smooth_value(&ParamMatrix::column(&[2.0]).unwrap()).unwrap(), 0.0);
}

#[test]
fn smooth_value_at_generating_matrix_is_ridge_only() {
    let spec = LowRankSpec { d1: 20, d2: 12, rank: 10, n: 80, ..LowRankSpec::desk(5) };
    let d = generate_lowrank(&spec).unwrap();
    let v = d.problem.smooth_value(&d.x_true).unwrap();
    let ridge = 0.5 * spec.lambda1 * d.x_true.frobenius_sq();
    assert!((v - ridge).abs() <= 1e-12 * ridge, "{v} vs {ridge}");
}

#[test]
fn objective_with_regularizers() {
    let mut p = random_problem(2, 10, 3, 2, 0.1, Regularizer::None);
    let mut r = rng(3);
    let x = random_matrix(&mut r, 3, 2);
    assert_eq!(p.objective_value(&x).unwrap(), p.smooth_value(&x).unwrap());
    let zero_value = p.samples().targets().frobenius_sq() / 10.0;
    for reg in all_regularizers(0.7) {
        p = p.with_regularizer(reg).unwrap();
        assert!((p.objective_value(&p.zeros()).unwrap() - zero_value).abs() < 1e-14);
    }
    // nuclear part through an independent eigendecomposition of XᵀX
    p = p.with_regularizer(Regularizer::Nuclear(0.5)).unwrap();
    let xt = to_na(&x);
    let eig = SymmetricEigen::new(xt.transpose() * &xt);
    let nuclear: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let expected = p.smooth_value(&x).unwrap() + 0.5 * nuclear;
    assert!((p.objective_value(&x).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn grad_sample_examples() {
    let p = scalar(1.0, 0.0, 0.0);
    assert_eq!(p.grad_sample(0, &ParamMatrix::column(&[3.0]).unwrap()).unwrap()[(0, 0)], 6.0);
    let spec = LowRankSpec { d1: 5, d2: 3, rank: 2, n: 10, lambda1: 0.0, ..LowRankSpec::desk(1) };
    let d = generate_lowrank(&spec).unwrap();
    for i in 0..10 {
        let g = d.problem.grad_sample(i, &d.x_true).unwrap();
        assert!(g.frobenius() < 1e-12 * (1.0 + d.x_true.frobenius()));
    }
    assert_eq!(d.problem.grad_sample(10, &d.x_true).unwrap_err(), Error::IndexOutOfRange { index: 10, n: 10 });
}

#[test]
fn grad_sample_matches_central_differences() {
    let h = 1e-6;
    for case in 0..50u64 {
        let (d1, d2) = (1 + case as usize % 4, 1 + (case as usize / 4) % 3);
        let p = random_problem(100 + case, 6, d1, d2, 0.05 * (case % 3) as f64, Regularizer::None);
        let mut r = rng(500 + case);
        let x = random_matrix(&mut r, d1, d2);
        let i = case as usize % 6;
        let g = p.grad_sample(i, &x).unwrap();
        let mut fd = ParamMatrix::zeros(d1, d2);
        for k in 0..d1 * d2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_mut_slice()[k] += h;
            xm.as_mut_slice()[k] -= h;
            fd.as_mut_slice()[k] = (p.sample_value(i, &xp).unwrap() - p.sample_value(i, &xm).unwrap()) / (2.0 * h);
        }
        let err = rel_err(&g, &fd);
        assert!(err < 1e-5, "case {case}: relative error {err}");
    }
}

#[test]
fn grad_full_is_mean_of_samples() {
    let p = random_problem(7, 13, 4, 3, 0.2, Regularizer::None);
    let mut r = rng(8);
    let x = random_matrix(&mut r, 4, 3);
    let mut mean = ParamMatrix::zeros(4, 3);
    for i in 0..13 {
        mean.add_assign(&p.grad_sample(i, &x).unwrap());
    }
    mean.scale_mut(1.0 / 13.0);
    assert!(p.grad_full(&x).unwrap().max_abs_diff(&mean) < 1e-12);
    for k in 1..=5 {
        let part = Partition::even(13, k).unwrap();
        let agg = p.grad_full_partitioned(&part, &x).unwrap();
        assert!(agg.max_abs_diff(&p.grad_full(&x).unwrap()) < 1e-12, "K = {k}");
    }
    let single = random_problem(9, 1, 2, 2, 0.1, Regularizer::None);
    let x = random_matrix(&mut r, 2, 2);
    assert_eq!(single.grad_full(&x).unwrap(), single.grad_sample(0, &x).unwrap());
}

#[test]
fn dimension_mismatch_reports_shapes() {
    let p = random_problem(1, 5, 3, 2, 0.0, Regularizer::None);
    let err = p.smooth_value(&ParamMatrix::zeros(2, 3)).unwrap_err();
    assert_eq!(err, Error::DimensionMismatch { expected_rows: 3, expected_cols: 2, actual_rows: 2, actual_cols: 3 });
}

#[test]
fn constants_identity_design() {
    let n = 4;
    let s = SampleSet::new(ParamMatrix::identity(n), ParamMatrix::zeros(n, 1)).unwrap();
    let p = CompositeProblem::new(s, 0.0, Regularizer::None).unwrap();
    let (l, mu) = estimate_constants(&p);
    assert!((l - 0.5).abs() < 1e-8 && (mu - 0.5).abs() < 1e-8);
}

#[test]
fn constants_rank_one() {
    let a = ParamMatrix::from_rows(&[&[1.0, 2.0, 2.0]]).unwrap();
    let s = SampleSet::new(a, ParamMatrix::zeros(1, 1)).unwrap();
    let p = CompositeProblem::new(s, 0.0, Regularizer::None).unwrap();
    let c = p.constants();
    assert!((c.smoothness - 18.0).abs() < 1e-7);
    assert_eq!(c.strong_convexity, 0.0);
}

#[test]
fn constants_match_dense_eigensolver() {
    for seed in 0..5 {
        let p = random_problem(seed, 20, 5, 1, 0.01, Regularizer::None);
        let a = to_na(p.samples().features());
        let eig = SymmetricEigen::new(a.transpose() * &a);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        let l = 2.0 * lmax / 20.0 + 0.01;
        let mu = 2.0 * lmin / 20.0 + 0.01;
        let c = p.constants();
        assert!((c.smoothness - l).abs() / l < 1e-6, "{} vs {l}", c.smoothness);
        assert!((c.strong_convexity - mu).abs() / mu < 1e-6, "{} vs {mu}", c.strong_convexity);
        assert!(c.strong_convexity <= c.smoothness);
    }
}

#[test]
fn convexity_and_smoothness_witness() {
    for seed in 0..20 {
        let p = random_problem(seed, 15, 4, 2, 0.05, Regularizer::None);
        let c = p.constants();
        let mut r = rng(1000 + seed);
        let x = random_matrix(&mut r, 4, 2);
        let y = random_matrix(&mut r, 4, 2);
        let fx = p.smooth_value(&x).unwrap();
        let fy = p.smooth_value(&y).unwrap();
        let lin = fx + p.grad_full(&x).unwrap().dot(&y.sub(&x));
        let d2 = y.dist_sq(&x);
        assert!(fy >= lin + 0.5 * c.strong_convexity * d2 - 1e-9);
        assert!(fy <= lin + 0.5 * c.smoothness * d2 + 1e-9);
    }
}

#[test]
fn degenerate_problems_rejected() {
    let zero_a = SampleSet::new(ParamMatrix::zeros(3, 2), ParamMatrix::zeros(3, 1)).unwrap();
    assert!(CompositeProblem::new(zero_a.clone(), 0.0, Regularizer::None).is_err());
    assert!(CompositeProblem::new(zero_a, 0.1, Regularizer::None).is_ok());
    assert!(SampleSet::new(ParamMatrix::zeros(3, 2), ParamMatrix::zeros(2, 1)).is_err());
    assert!(Regularizer::L1(-1.0).validate().is_err());
}
