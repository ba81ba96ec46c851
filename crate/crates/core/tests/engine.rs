mod common;

use common::*;
use dapsvrg::analysis::solve_reference;
use dapsvrg::data::{generate_linear, generate_lowrank, LinearSpec, LowRankSpec};
use dapsvrg::engine::{
    run, run_with, serial_prox_svrg, simulated_speedup, AlgoConfig, Algorithm, CostModel, RunOptions, RunRecord,
    Sampling, UpdateForm,
};
use dapsvrg::{CompositeProblem, Error, Regularizer};

fn small_lowrank(seed: u64) -> CompositeProblem {
    generate_lowrank(&LowRankSpec { d1: 6, d2: 4, rank: 2, n: 48, ..LowRankSpec::desk(seed) }).unwrap().problem
}

fn eta_for(p: &CompositeProblem, c: f64) -> f64 {
    c / p.constants().sample_smoothness
}

fn check_spans(rec: &RunRecord, workers: usize) {
    for w in 0..workers {
        let mut spans: Vec<_> = rec.spans.iter().filter(|s| s.worker == w).collect();
        spans.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in spans.windows(2) {
            assert!(pair[1].start >= pair[0].end - 1e-9, "worker {w} overlaps: {:?}", pair);
        }
    }
}

#[test]
fn single_worker_matches_serial_loop_bitwise() {
    let p = small_lowrank(1);
    let eta = eta_for(&p, 0.125);
    for alg in [Algorithm::DapSvrg, Algorithm::TapSvrg] {
        let cfg = AlgoConfig::new(alg, eta, 4, 96, 1).with_seed(5);
        let rec = run_with(&p, &cfg, &RunOptions { record_iterates: true, ..Default::default() }).unwrap();
        for form in [UpdateForm::Direct, UpdateForm::Decoupled] {
            assert_eq!(rec.iterates, serial_prox_svrg(&p, eta, 4, 96, 5, form).unwrap(), "{alg} {form:?}");
        }
    }
}

#[test]
fn deterministic_records() {
    let p = small_lowrank(2);
    for alg in Algorithm::ALL {
        let mut cfg = AlgoConfig::new(alg, eta_for(&p, 0.05), 3, 50, 3).with_seed(9);
        cfg.jitter = 0.3;
        let a = run(&p, &cfg, true).unwrap();
        let b = run(&p, &cfg, true).unwrap();
        assert_eq!(a, b, "{alg}");
    }
}

#[test]
fn instrumentation_does_not_perturb() {
    let p = small_lowrank(3);
    let reference = solve_reference(&p, 1e-10, 200_000).unwrap();
    for alg in Algorithm::ALL {
        let mut cfg = AlgoConfig::new(alg, eta_for(&p, 0.05), 3, 60, 4).with_seed(1);
        cfg.jitter = 0.5;
        let plain = run(&p, &cfg, false).unwrap();
        let inst = run_with(&p, &cfg, &RunOptions::instrumented(Some(reference.clone()))).unwrap();
        assert_eq!(plain.final_iterate, inst.final_iterate);
        assert_eq!(plain.spans, inst.spans);
        assert_eq!(inst.trace.len(), 3 * 60);
        assert!(plain.trace.is_empty());
    }
}

#[test]
fn staleness_bounded_by_workers_minus_one() {
    // many cost settings and jittered schedules, K = 3, m = 20
    let p = small_lowrank(4);
    let mut seen_max = 0;
    for seed in 0..10 {
        for (grad, prox, add, net) in
            [(1.0, 10.0, 0.01, 0.0), (1.0, 0.5, 0.5, 0.2), (3.0, 1.0, 0.0, 1.0), (1.0, 1.0, 1.0, 0.0)]
        {
            for alg in Algorithm::ALL {
                let cfg = AlgoConfig::new(alg, eta_for(&p, 0.05), 2, 20, 3).with_seed(seed).with_cost(CostModel {
                    grad_cost: grad,
                    prox_cost: prox,
                    add_cost: add,
                    net_cost: net,
                });
                let rec = run(&p, &cfg, true).unwrap();
                assert!(rec.max_staleness <= 2, "{alg} seed {seed}: {}", rec.max_staleness);
                assert!(rec
                    .trace
                    .iter()
                    .all(|e| e.staleness == e.t - e.x_read_iter && e.staleness <= rec.max_staleness));
                seen_max = seen_max.max(rec.max_staleness);
            }
        }
    }
    assert_eq!(seen_max, 2, "the bound is attained");
}

#[test]
fn jitter_can_exceed_the_uniform_bound() {
    // heterogeneous task lengths let a fast worker land several updates
    // inside one slow task
    let p = small_lowrank(4);
    let worst = (0..10)
        .map(|seed| {
            let mut cfg = AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.05), 2, 40, 3).with_seed(seed);
            cfg.jitter = 0.9;
            run(&p, &cfg, false).unwrap().max_staleness
        })
        .max()
        .unwrap();
    assert!(worst > 2);
}

#[test]
fn one_worker_has_zero_staleness() {
    let p = small_lowrank(5);
    let rec = run(&p, &AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.1), 2, 30, 1), true).unwrap();
    assert!(rec.trace.iter().all(|e| e.staleness == 0));
    // first update of the first stage reads x̃ itself
    assert!(rec.trace[0].v_norm_sq_dev < 1e-20);
    assert!(rec.trace[0].u_norm_sq_dev < 1e-20);
}

#[test]
fn messages_conserved_and_workers_never_overlap() {
    let p = small_lowrank(6);
    for alg in Algorithm::ALL {
        for k in [1, 2, 5] {
            let mut cfg = AlgoConfig::new(alg, eta_for(&p, 0.05), 3, 25, k).with_seed(2);
            cfg.jitter = 0.4;
            let rec = run(&p, &cfg, false).unwrap();
            assert_eq!(rec.updates_applied, 75);
            let mut applied: Vec<usize> =
                rec.spans.iter().filter(|s| s.read_iter.is_some()).map(|s| s.applied_iter.unwrap()).collect();
            applied.sort();
            assert_eq!(applied, (0..75).collect::<Vec<_>>());
            for s in 0..3 {
                assert_eq!(rec.spans.iter().filter(|x| x.stage == s && x.read_iter.is_some()).count(), 25);
            }
            check_spans(&rec, k);
            for pair in rec.rows.windows(2) {
                assert!(pair[1].sim_time >= pair[0].sim_time);
                assert!(pair[1].grad_evals >= pair[0].grad_evals);
                assert!(pair[1].epoch >= pair[0].epoch);
            }
        }
    }
}

#[test]
fn epoch_accounting() {
    let p = small_lowrank(7);
    let svrg = run(&p, &AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.1), 2, 96, 2), false).unwrap();
    let epochs: Vec<f64> = svrg.rows.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, vec![0.0, 3.0, 6.0]);
    let sgd = run(&p, &AlgoConfig::new(Algorithm::DapSgdConst, eta_for(&p, 0.1), 2, 96, 2), false).unwrap();
    let epochs: Vec<f64> = sgd.rows.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, vec![0.0, 2.0, 4.0]);
}

#[test]
fn staleness_cap_aborts() {
    let p = small_lowrank(8);
    let mut cfg = AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.05), 2, 30, 4);
    cfg.max_delay_cap = Some(1);
    assert!(matches!(run(&p, &cfg, false), Err(Error::StalenessViolation { cap: 1, .. })));
    cfg.max_delay_cap = Some(3);
    assert!(run(&p, &cfg, false).is_ok());
}

#[test]
fn divergence_names_stage() {
    let p = small_lowrank(9);
    let cfg = AlgoConfig::new(Algorithm::DapSgdConst, 5.0, 5, 50, 2);
    match run(&p, &cfg, false) {
        Err(Error::Divergence { stage, .. }) => assert_eq!(stage, 0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn small_instance_converges_with_four_workers() {
    let spec = LowRankSpec { d1: 5, d2: 1, rank: 1, n: 50, ..LowRankSpec::desk(3) };
    let p = generate_lowrank(&spec).unwrap().problem;
    let reference = solve_reference(&p, 1e-12, 200_000).unwrap();
    let eta = eta_for(&p, 0.25);
    // the serial reference reaches the target first
    let serial = serial_prox_svrg(&p, eta, 15, 100, 0, UpdateForm::Direct).unwrap();
    let initial = p.objective_value(&p.zeros()).unwrap() - reference.p_star;
    let serial_final = p.objective_value(serial.last().unwrap()).unwrap() - reference.p_star;
    assert!(serial_final < 1e-8 * initial);
    let rec = run(&p, &AlgoConfig::new(Algorithm::DapSvrg, eta, 15, 100, 4), false).unwrap();
    let last = p.objective_value(&rec.final_iterate).unwrap() - reference.p_star;
    assert!(last < 1e-8 * initial, "{last} vs {initial}");
}

#[test]
fn free_server_gives_linear_speedup() {
    let p = small_lowrank(10);
    let reference = solve_reference(&p, 1e-10, 200_000).unwrap();
    let cost = CostModel { grad_cost: 1.0, prox_cost: 0.0, add_cost: 0.0, net_cost: 0.0 };
    let base = AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.25), 12, 192, 1).with_cost(cost);
    let rows = simulated_speedup(&p, &base, &[1, 2, 4], &reference, 1e-4).unwrap();
    assert_eq!(rows[0].speedup, Some(1.0));
    for r in &rows {
        let s = r.speedup.expect("target reached");
        assert!((s - r.workers as f64).abs() < 0.1 * r.workers as f64, "K={} speedup {s}", r.workers);
    }
}

#[test]
fn unreachable_target_is_reported_not_raised() {
    let p = small_lowrank(11);
    let reference = solve_reference(&p, 1e-10, 200_000).unwrap();
    let base = AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.001), 1, 10, 1);
    let rows = simulated_speedup(&p, &base, &[1, 2], &reference, 1e-12).unwrap();
    assert!(rows.iter().all(|r| r.time_to_target.is_none() && r.speedup.is_none()));
}

#[test]
fn prox_bound_server_saturates() {
    let p = small_lowrank(12);
    let rec = run(&p, &AlgoConfig::new(Algorithm::TapSvrg, eta_for(&p, 0.01), 2, 200, 10), false).unwrap();
    let inner_busy = 2.0 * 200.0 * 10.0;
    let snapshot_total: f64 = rec.rows.windows(2).map(|_| 48.0 / 10.0 * 1.0).sum();
    assert!(rec.server_busy_time >= inner_busy);
    assert!(rec.server_busy_time / (rec.total_time - snapshot_total) > 0.99);
}

#[test]
fn global_sampling_and_partition_override() {
    let p = small_lowrank(13);
    let mut cfg = AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.1), 3, 60, 3);
    cfg.sampling = Sampling::Global;
    let rec = run(&p, &cfg, false).unwrap();
    assert!(rec.rows.last().unwrap().objective < rec.rows[0].objective);
    let uneven = p.clone().with_partition(dapsvrg::Partition::even(48, 5).unwrap()).unwrap();
    assert!(run(&uneven, &cfg.clone().with_workers(5), false).is_ok());
}

#[test]
fn invalid_configs_rejected() {
    let p = small_lowrank(14);
    let mut cfg = AlgoConfig::new(Algorithm::DapSvrg, 0.01, 1, 10, 2);
    cfg.cost.prox_cost = 0.001;
    assert!(matches!(run(&p, &cfg, false), Err(Error::InvalidParameter(_))));
    let cfg = AlgoConfig::new(Algorithm::DapSvrg, 0.01, 1, 10, 100);
    assert!(run(&p, &cfg, false).is_err());
}

#[test]
fn step_size_warnings() {
    let p = small_lowrank(15);
    let cfg = AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.5), 1, 10, 4);
    let w = cfg.warnings(&p);
    assert_eq!(w.len(), 1, "{w:?}");
    let cfg = AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 0.01), 1, 10, 4);
    assert!(cfg.warnings(&p).is_empty());
    let rec = run(&p, &AlgoConfig::new(Algorithm::DapSvrg, eta_for(&p, 2.0), 1, 5, 4), false);
    assert!(rec.map(|r| r.warnings.len() == 2).unwrap_or(true));
}

#[test]
fn svrg_variance_vanishes_sgd_does_not() {
    let d = generate_linear(&LinearSpec::scalar_lasso(0)).unwrap();
    let p = d.problem;
    let reference = solve_reference(&p, 1e-12, 200_000).unwrap();
    let eta = eta_for(&p, 0.1);
    let mut ratios = Vec::new();
    for alg in [Algorithm::DapSvrg, Algorithm::DapSgdConst] {
        let (mut first, mut last) = (0.0, 0.0);
        for seed in 0..10 {
            let cfg = AlgoConfig::new(alg, eta, 8, 60, 3).with_seed(seed);
            let rec = run_with(&p, &cfg, &RunOptions::instrumented(Some(reference.clone()))).unwrap();
            first += rec.rows[1].mean_v_dev.unwrap();
            last += rec.rows[8].mean_v_dev.unwrap();
        }
        ratios.push(last / first);
    }
    assert!(ratios[0] < 0.1, "{ratios:?}");
    assert!(ratios[1] >= 0.5, "{ratios:?}");
}

#[test]
fn regularizers_all_run() {
    let p = small_lowrank(16);
    for reg in all_regularizers(1e-3) {
        let q = p.with_regularizer(reg).unwrap();
        let rec = run(&q, &AlgoConfig::new(Algorithm::TapSvrg, eta_for(&q, 0.1), 2, 48, 2), false).unwrap();
        assert!(rec.rows[2].objective < rec.rows[0].objective, "{reg:?}");
    }
    let _ = Regularizer::None;
}
