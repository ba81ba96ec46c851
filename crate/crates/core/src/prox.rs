//! Closed-form proximal operators `Prox_{η,h}(x) = argmin_y (1/2η)‖y − x‖² + h(y)`
//! and the matching optimality residuals.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::ParamMatrix;
use crate::model::Regularizer;

/// Singular values at or below this fraction of the largest one are treated
/// as zero when reading off the rank of a prox output.
const RANK_TOLERANCE: f64 = 1e-10;

/// Output of a proximal gradient step taken from `x` along `v`.
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub x_prime: ParamMatrix,
    pub h_value_at_x_prime: f64,
    /// `(x − x′)/η − v`, an element of `∂h(x′)`.
    pub subgradient_witness: ParamMatrix,
}

pub fn regularizer_value(reg: &Regularizer, x: &ParamMatrix) -> Result<f64> {
    Ok(match *reg {
        Regularizer::None => 0.0,
        Regularizer::L1(l) => l * x.abs_sum(),
        Regularizer::SquaredL2(l) => 0.5 * l * x.frobenius_sq(),
        Regularizer::ElasticNet { l1, l2 } => l1 * x.abs_sum() + 0.5 * l2 * x.frobenius_sq(),
        Regularizer::Nuclear(l) => {
            if l == 0.0 {
                0.0
            } else {
                l * linalg::singular_values(x)?.iter().sum::<f64>()
            }
        }
    })
}

/// Soft threshold; `|v| <= t` maps to zero.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {eta}")));
    }
    Ok(())
}

pub fn prox(reg: &Regularizer, x: &ParamMatrix, eta: f64) -> Result<ParamMatrix> {
    Ok(prox_with_value(reg, x, eta)?.0)
}

/// `Prox_{η,h}(x)` and `h` at the result; the nuclear case reads the value
/// off the shrunk spectrum instead of decomposing the output again.
fn prox_with_value(reg: &Regularizer, x: &ParamMatrix, eta: f64) -> Result<(ParamMatrix, f64)> {
    check_eta(eta)?;
    let out = match *reg {
        Regularizer::None => x.clone(),
        Regularizer::L1(l) => {
            let t = eta * l;
            x.map(|v| soft_threshold(v, t))
        }
        Regularizer::SquaredL2(l) => x.scaled(1.0 / (1.0 + eta * l)),
        Regularizer::ElasticNet { l1, l2 } => {
            let t = eta * l1;
            let s = 1.0 / (1.0 + eta * l2);
            x.map(|v| soft_threshold(v, t) * s)
        }
        Regularizer::Nuclear(l) => {
            if l == 0.0 {
                return Ok((x.clone(), 0.0));
            }
            let d = linalg::svd(x)?;
            let t = eta * l;
            let shrunk: Vec<f64> = d.singular_values.iter().map(|&s| (s - t).max(0.0)).collect();
            let value = l * shrunk.iter().sum::<f64>();
            return Ok((d.reconstruct_with(&shrunk), value));
        }
    };
    let value = regularizer_value(reg, &out)?;
    Ok((out, value))
}

/// `Prox_{η,h}(x − η v)` together with `h(x′)` and the subgradient witness.
pub fn prox_step(reg: &Regularizer, x: &ParamMatrix, v: &ParamMatrix, eta: f64) -> Result<ProxResult> {
    x.check_same_shape(v)?;
    let mut point = x.clone();
    point.axpy(-eta, v);
    let (x_prime, h) = prox_with_value(reg, &point, eta)?;
    let mut witness = x.sub(&x_prime);
    witness.scale_mut(1.0 / eta);
    witness.sub_assign(v);
    Ok(ProxResult { x_prime, h_value_at_x_prime: h, subgradient_witness: witness })
}

/// Distance from `(x − x′)/η` to `∂h(x′)`; zero exactly when
/// `x′ = Prox_{η,h}(x)`.
pub fn prox_optimality_residual(reg: &Regularizer, x: &ParamMatrix, x_prime: &ParamMatrix, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    x.check_same_shape(x_prime)?;
    let mut g = x.sub(x_prime);
    g.scale_mut(1.0 / eta);
    subdifferential_distance(reg, x_prime, &g)
}

/// Distance from `g` to `∂h(at)`.
pub fn subdifferential_distance(reg: &Regularizer, at: &ParamMatrix, g: &ParamMatrix) -> Result<f64> {
    at.check_same_shape(g)?;
    Ok(match *reg {
        Regularizer::None => g.frobenius(),
        Regularizer::L1(l) => l1_distance(at, g, l, 0.0),
        Regularizer::ElasticNet { l1, l2 } => l1_distance(at, g, l1, l2),
        Regularizer::SquaredL2(l) => {
            let mut d = g.clone();
            d.axpy(-l, at);
            d.frobenius()
        }
        Regularizer::Nuclear(l) => nuclear_distance(at, g, l)?,
    })
}

// ∂(λ1|x| + λ2/2 x²) coordinatewise
fn l1_distance(at: &ParamMatrix, g: &ParamMatrix, l1: f64, l2: f64) -> f64 {
    at.as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(&x, &gv)| {
            let r = gv - l2 * x;
            let d = if x > 0.0 {
                r - l1
            } else if x < 0.0 {
                r + l1
            } else {
                (r.abs() - l1).max(0.0)
            };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `∂(λ‖·‖_*)(X) = {λ(U_r V_rᵀ + W) : U_rᵀW = 0, W V_r = 0, ‖W‖₂ ≤ 1}`.
/// The tangent and normal parts separate, so the distance is exact.
fn nuclear_distance(at: &ParamMatrix, g: &ParamMatrix, l: f64) -> Result<f64> {
    let d = linalg::svd(at)?;
    let smax = d.singular_values.first().copied().unwrap_or(0.0);
    let rank = d.singular_values.iter().take_while(|&&s| s > RANK_TOLERANCE * smax.max(1.0)).count();
    let (rows, cols) = at.shape();

    // projectors onto the leading singular subspaces
    let mut pu = ParamMatrix::zeros(rows, rows);
    let mut pv = ParamMatrix::zeros(cols, cols);
    let mut uvt = ParamMatrix::zeros(rows, cols);
    for j in 0..rank {
        for a in 0..rows {
            for b in 0..rows {
                pu[(a, b)] += d.u[(a, j)] * d.u[(b, j)];
            }
            for b in 0..cols {
                uvt[(a, b)] += d.u[(a, j)] * d.v[(b, j)];
            }
        }
        for a in 0..cols {
            for b in 0..cols {
                pv[(a, b)] += d.v[(a, j)] * d.v[(b, j)];
            }
        }
    }
    let left = ParamMatrix::identity(rows).sub(&pu);
    let right = ParamMatrix::identity(cols).sub(&pv);
    let g_perp = left.matmul(g)?.matmul(&right)?;
    let mut tangent = g.sub(&g_perp);
    tangent.axpy(-l, &uvt);
    let excess: f64 = linalg::singular_values(&g_perp)?.iter().map(|&s| (s - l).max(0.0).powi(2)).sum();
    Ok((tangent.frobenius_sq() + excess).sqrt())
}
