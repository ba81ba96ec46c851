//! Dense row-major matrices used for iterates, gradients and data.
//!
//! Vectors are single-column matrices, so every formula is applied
//! entrywise with the Frobenius inner product.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct ParamMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ParamMatrix {
    /// All-zero matrix. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        ParamMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, checking the shape and
    /// rejecting non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(ParamMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    /// Column vector.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn diag(rows: usize, cols: usize, values: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &v) in values.iter().enumerate().take(rows.min(cols)) {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Errors unless `other` has the same shape as `self`.
    pub fn check_same_shape(&self, other: &ParamMatrix) -> Result<()> {
        self.check_shape(other.rows, other.cols)
    }

    /// Errors unless `self` is `rows x cols`.
    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::DimensionMismatch {
                expected_rows: rows,
                expected_cols: cols,
                actual_rows: self.rows,
                actual_cols: self.cols,
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn abs_sum(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Frobenius inner product. Shapes must match.
    pub fn dot(&self, other: &ParamMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn dist_sq(&self, other: &ParamMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn max_abs_diff(&self, other: &ParamMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn scale_mut(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> ParamMatrix {
        let mut out = self.clone();
        out.scale_mut(alpha);
        out
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add_assign(&mut self, other: &ParamMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sub_assign(&mut self, other: &ParamMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
    }

    pub fn add(&self, other: &ParamMatrix) -> ParamMatrix {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &ParamMatrix) -> ParamMatrix {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ParamMatrix {
        ParamMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn transpose(&self) -> ParamMatrix {
        let mut out = ParamMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &ParamMatrix) -> Result<ParamMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected_rows: self.cols,
                expected_cols: other.cols,
                actual_rows: other.rows,
                actual_cols: other.cols,
            });
        }
        let mut out = ParamMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · self`, the Gram matrix of the columns.
    pub fn gram(&self) -> ParamMatrix {
        let c = self.cols;
        let mut g = ParamMatrix::zeros(c, c);
        for i in 0..self.rows {
            let r = self.row(i);
            for p in 0..c {
                let rp = r[p];
                if rp == 0.0 {
                    continue;
                }
                for (q, rq) in r.iter().enumerate().skip(p) {
                    g.data[p * c + q] += rp * rq;
                }
            }
        }
        for p in 0..c {
            for q in 0..p {
                g.data[p * c + q] = g.data[q * c + p];
            }
        }
        g
    }
}

impl Index<(usize, usize)> for ParamMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ParamMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ParamMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ParamMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Exact difference `to − from` held as an unevaluated sum `hi + lo`, so
/// that `apply` on `from` reproduces `to` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub hi: ParamMatrix,
    pub lo: ParamMatrix,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Delta {
    pub fn between(from: &ParamMatrix, to: &ParamMatrix) -> Self {
        from.check_same_shape(to).expect("delta endpoints share a shape");
        let (hi, lo): (Vec<f64>, Vec<f64>) = to.data.iter().zip(&from.data).map(|(&t, &f)| two_sum(t, -f)).unzip();
        Delta {
            hi: ParamMatrix { rows: to.rows, cols: to.cols, data: hi },
            lo: ParamMatrix { rows: to.rows, cols: to.cols, data: lo },
        }
    }

    /// `x ← x + hi + lo` with the rounding error of the first addition
    /// carried into the second.
    pub fn apply(&self, x: &mut ParamMatrix) {
        x.check_same_shape(&self.hi).expect("delta shape matches iterate");
        for ((xv, &h), &l) in x.data.iter_mut().zip(&self.hi.data).zip(&self.lo.data) {
            let (s, e) = two_sum(*xv, h);
            *xv = s + (e + l);
        }
    }

    pub fn to_matrix(&self) -> ParamMatrix {
        self.hi.add(&self.lo)
    }
}
