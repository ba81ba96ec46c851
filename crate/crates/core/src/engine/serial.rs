//! Single-process Prox-SVRG used as the zero-staleness reference.

use crate::error::Result;
use crate::grad::{self, DrawKey, STREAM_SAMPLE};
use crate::matrix::{Delta, ParamMatrix};
use crate::model::{CompositeProblem, Partition};
use crate::prox;

/// How an inner step is written back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateForm {
    /// `x ← Prox(x − ηv)`
    Direct,
    /// `x ← x + (Prox(x − ηv) − x)` through [`Delta`], as a decoupled
    /// server applies it.
    Decoupled,
}

/// Serial Prox-SVRG starting from zero with the engine's draw keys for one
/// worker. Returns the iterate after every inner step.
pub fn serial_prox_svrg(
    problem: &CompositeProblem,
    eta: f64,
    stages: usize,
    inner_iters: usize,
    seed: u64,
    form: UpdateForm,
) -> Result<Vec<ParamMatrix>> {
    let n = problem.n();
    let whole = Partition::even(n, 1)?;
    let reg = problem.regularizer();
    let mut x = problem.zeros();
    let mut out = Vec::with_capacity(stages * inner_iters);
    for s in 0..stages {
        let snap = grad::make_snapshot(problem, &whole, &x, s)?;
        for j in 0..inner_iters {
            let t = s * inner_iters + j;
            let i = DrawKey::new(seed, s, t, 0, STREAM_SAMPLE).index(n);
            let v = grad::reduced_gradient(problem, i, &x, &snap)?;
            let step = prox::prox_step(&reg, &x, &v, eta)?;
            match form {
                UpdateForm::Direct => x = step.x_prime,
                UpdateForm::Decoupled => {
                    Delta::between(&x, &step.x_prime).apply(&mut x);
                }
            }
            out.push(x.clone());
        }
    }
    Ok(out)
}
