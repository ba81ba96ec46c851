//! Dense kernels: one-sided Jacobi SVD and symmetric extreme eigenvalues.

use crate::error::{Error, Result};
use crate::matrix::ParamMatrix;

/// Off-diagonal tolerance for the Jacobi sweeps.
pub const SVD_TOLERANCE: f64 = 1e-10;
pub const SVD_MAX_SWEEPS: usize = 60;

/// Thin SVD `X = U · diag(σ) · Vᵀ` with `k = min(rows, cols)` components,
/// singular values sorted in non-increasing order. `U` and `V` have
/// orthonormal columns; columns paired with zero singular values are filled
/// in to complete the orthonormal set.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ParamMatrix,
    pub singular_values: Vec<f64>,
    pub v: ParamMatrix,
}

impl Svd {
    /// `U · diag(values) · Vᵀ`.
    pub fn reconstruct_with(&self, values: &[f64]) -> ParamMatrix {
        let rows = self.u.rows();
        let cols = self.v.rows();
        let mut out = ParamMatrix::zeros(rows, cols);
        for (j, &s) in values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for r in 0..rows {
                let us = self.u[(r, j)] * s;
                if us == 0.0 {
                    continue;
                }
                for c in 0..cols {
                    out[(r, c)] += us * self.v[(c, j)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ParamMatrix {
        self.reconstruct_with(&self.singular_values)
    }
}

/// One-sided (Hestenes) Jacobi SVD. Works on the columns of the orientation
/// with fewer columns, so the rotations act on the smaller Gram dimension;
/// strictly tall inputs are first reduced to their square QR factor `R`.
pub fn svd(x: &ParamMatrix) -> Result<Svd> {
    if x.rows() >= x.cols() {
        tall_svd(x)
    } else {
        let t = tall_svd(&x.transpose())?;
        Ok(Svd { u: t.v, singular_values: t.singular_values, v: t.u })
    }
}

fn tall_svd(x: &ParamMatrix) -> Result<Svd> {
    let (m, n) = x.shape();
    if m == n {
        return jacobi_tall(x);
    }
    let qr = HouseholderQr::new(x);
    let inner = jacobi_tall(&qr.r())?;
    Ok(Svd { u: qr.apply_q(&inner.u), singular_values: inner.singular_values, v: inner.v })
}

/// `X = Q·R` with `Q` kept as a product of reflectors.
struct HouseholderQr {
    m: usize,
    n: usize,
    /// reduced matrix, column-major
    a: Vec<Vec<f64>>,
    /// unit reflector `v_k` acting on rows `k..`
    reflectors: Vec<Option<Vec<f64>>>,
}

impl HouseholderQr {
    fn new(x: &ParamMatrix) -> Self {
        let (m, n) = x.shape();
        let mut a: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| x[(i, j)]).collect()).collect();
        let mut reflectors = Vec::with_capacity(n);
        for k in 0..n {
            let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                reflectors.push(None);
                continue;
            }
            let alpha = if a[k][k] > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = a[k][k..].to_vec();
            v[0] -= alpha;
            let vn = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if vn == 0.0 {
                reflectors.push(None);
                continue;
            }
            v.iter_mut().for_each(|t| *t /= vn);
            for col in a.iter_mut().skip(k) {
                reflect(&v, &mut col[k..]);
            }
            reflectors.push(Some(v));
        }
        HouseholderQr { m, n, a, reflectors }
    }

    fn r(&self) -> ParamMatrix {
        let mut r = ParamMatrix::zeros(self.n, self.n);
        for (j, col) in self.a.iter().enumerate() {
            for i in 0..=j {
                r[(i, j)] = col[i];
            }
        }
        r
    }

    /// `Q · [y; 0]` for an `n x c` block `y`.
    fn apply_q(&self, y: &ParamMatrix) -> ParamMatrix {
        let c = y.cols();
        let mut cols: Vec<Vec<f64>> =
            (0..c).map(|j| (0..self.m).map(|i| if i < self.n { y[(i, j)] } else { 0.0 }).collect()).collect();
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            if let Some(v) = v {
                for col in cols.iter_mut() {
                    reflect(v, &mut col[k..]);
                }
            }
        }
        let mut out = ParamMatrix::zeros(self.m, c);
        for (j, col) in cols.iter().enumerate() {
            for (i, &val) in col.iter().enumerate() {
                out[(i, j)] = val;
            }
        }
        out
    }
}

/// `w ← (I − 2vvᵀ) w`
fn reflect(v: &[f64], w: &mut [f64]) {
    let d: f64 = v.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
    if d != 0.0 {
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= 2.0 * d * vi;
        }
    }
}

pub fn singular_values(x: &ParamMatrix) -> Result<Vec<f64>> {
    Ok(svd(x)?.singular_values)
}

fn jacobi_tall(x: &ParamMatrix) -> Result<Svd> {
    let (m, n) = x.shape();
    debug_assert!(m >= n);
    // column-major working copies
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| x[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();

    // columns below rounding level of the whole matrix count as zero; rotating
    // them against large columns only shuffles rounding noise
    let total: f64 = w.iter().flatten().map(|a| a * a).sum();
    let negligible = (f64::EPSILON * f64::EPSILON) * total;
    let mut converged = n == 1;
    let mut sweeps = 0;
    let mut worst = 0.0_f64;
    while !converged && sweeps < SVD_MAX_SWEEPS {
        sweeps += 1;
        worst = 0.0;
        let mut rotated = false;
        // squared column norms, recomputed after each rotation
        let mut sq: Vec<f64> = w.iter().map(|col| col.iter().map(|a| a * a).sum()).collect();
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta) = (sq[p], sq[q]);
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(a, b)| a * b).sum();
                if alpha <= negligible || beta <= negligible || gamma == 0.0 {
                    continue;
                }
                let ratio = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                worst = worst.max(ratio);
                if ratio <= SVD_TOLERANCE {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
                sq[p] = w[p].iter().map(|a| a * a).sum();
                sq[q] = w[q].iter().map(|a| a * a).sum();
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps, off_diagonal: worst });
    }

    let norms: Vec<f64> = w.iter().map(|col| col.iter().map(|a| a * a).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let floor = scale * f64::EPSILON * (m as f64);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for &j in &order {
        let s = norms[j];
        v_cols.push(v[j].clone());
        if s > floor && s > 0.0 {
            u_cols.push(w[j].iter().map(|a| a / s).collect());
            sigma.push(s);
        } else {
            missing.push(u_cols.len());
            u_cols.push(vec![0.0; m]);
            sigma.push(0.0);
        }
    }
    for idx in missing {
        u_cols[idx] = orthonormal_completion(&u_cols, idx, m);
    }

    let mut u = ParamMatrix::zeros(m, n);
    let mut vm = ParamMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..m {
            u[(i, j)] = u_cols[j][i];
        }
        for i in 0..n {
            vm[(i, j)] = v_cols[j][i];
        }
    }
    Ok(Svd { u, singular_values: sigma, v: vm })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let ap = *a;
        let aq = *b;
        *a = c * ap - s * aq;
        *b = s * ap + c * aq;
    }
}

/// Unit vector orthogonal to every nonzero column in `cols` other than
/// `skip`, found by Gram-Schmidt over the standard basis.
fn orthonormal_completion(cols: &[Vec<f64>], skip: usize, m: usize) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for e in 0..m {
        let mut cand = vec![0.0; m];
        cand[e] = 1.0;
        for _ in 0..2 {
            for (k, col) in cols.iter().enumerate() {
                if k == skip || col.iter().all(|&a| a == 0.0) {
                    continue;
                }
                let proj: f64 = col.iter().zip(&cand).map(|(a, b)| a * b).sum();
                for (c, a) in cand.iter_mut().zip(col) {
                    *c -= proj * a;
                }
            }
        }
        let norm = cand.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > best_norm {
            best_norm = norm;
            best = Some(cand);
        }
        if norm > 0.5 {
            break;
        }
    }
    let cand = best.unwrap_or_else(|| vec![0.0; m]);
    cand.iter().map(|a| a / best_norm.max(f64::MIN_POSITIVE)).collect()
}

/// Largest and smallest eigenvalues of a symmetric positive semidefinite
/// matrix by power iteration.
///
/// The smallest eigenvalue comes from power iteration on the shifted matrix
/// `λ_max·I − G`, which stays well defined when `G` is singular. Iteration
/// stops once the relative residual `‖Gv − θv‖ / θ` drops below `tol`.
pub fn psd_extreme_eigenvalues(g: &ParamMatrix, tol: f64, max_iters: usize) -> Result<(f64, f64)> {
    let n = g.rows();
    g.check_shape(n, n)?;
    let lmax = power_iteration(n, |v, out| sym_matvec(g, v, out), tol, max_iters)?;
    if lmax <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let gap = power_iteration(
        n,
        |v, out| {
            sym_matvec(g, v, out);
            for (o, &x) in out.iter_mut().zip(v) {
                *o = lmax * x - *o;
            }
        },
        tol,
        max_iters,
    )?;
    let mut lmin = lmax - gap;
    if lmin.abs() <= 64.0 * f64::EPSILON * lmax * (n as f64) {
        lmin = 0.0;
    }
    Ok((lmax, lmin.max(0.0)))
}

fn sym_matvec(g: &ParamMatrix, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = g.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn power_iteration(n: usize, apply: impl Fn(&[f64], &mut [f64]), tol: f64, max_iters: usize) -> Result<f64> {
    // deterministic start with components in every direction
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i as f64) * 0.618).sin()).collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        apply(&v, &mut w);
        let theta: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let wnorm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if wnorm == 0.0 {
            return Ok(0.0);
        }
        residual = v.iter().zip(&w).map(|(a, b)| (b - theta * a) * (b - theta * a)).sum::<f64>().sqrt()
            / theta.abs().max(f64::MIN_POSITIVE);
        if residual <= tol {
            return Ok(theta);
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / wnorm;
        }
    }
    Err(Error::EigenNoConvergence { iterations: max_iters, residual })
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
}
