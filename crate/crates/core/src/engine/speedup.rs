use rayon::prelude::*;

use crate::engine::config::AlgoConfig;
use crate::engine::record::RunRecord;
use crate::engine::sim::{run_with, RunOptions};
use crate::error::Result;
use crate::model::{CompositeProblem, Reference};

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub workers: usize,
    /// `None` when the target was not reached within the stage budget.
    pub time_to_target: Option<f64>,
    pub speedup: Option<f64>,
}

/// First simulated time at which a stage boundary reaches `target`.
pub fn time_to_target(record: &RunRecord, target: f64) -> Option<f64> {
    record.rows.iter().find(|r| r.subopt.is_some_and(|s| s <= target)).map(|r| r.sim_time)
}

/// Runs `base` once per worker count and reports `time(1) / time(K)`.
/// The one-worker baseline is run even when it is not listed.
pub fn simulated_speedup(
    problem: &CompositeProblem,
    base: &AlgoConfig,
    worker_counts: &[usize],
    reference: &Reference,
    target: f64,
) -> Result<Vec<SpeedupRow>> {
    let mut counts: Vec<usize> = worker_counts.to_vec();
    if !counts.contains(&1) {
        counts.push(1);
    }
    let opts = RunOptions { reference: Some(reference.clone()), ..Default::default() };
    let times: Vec<(usize, Option<f64>)> = counts
        .par_iter()
        .map(|&k| {
            let cfg = base.clone().with_workers(k);
            run_with(problem, &cfg, &opts).map(|rec| (k, time_to_target(&rec, target)))
        })
        .collect::<Result<_>>()?;
    let baseline = times.iter().find(|(k, _)| *k == 1).and_then(|(_, t)| *t);
    Ok(worker_counts
        .iter()
        .map(|&k| {
            let t = times.iter().find(|(kk, _)| *kk == k).and_then(|(_, t)| *t);
            SpeedupRow {
                workers: k,
                time_to_target: t,
                speedup: match (baseline, t) {
                    (Some(b), Some(t)) if t > 0.0 => Some(b / t),
                    _ => None,
                },
            }
        })
        .collect())
}
