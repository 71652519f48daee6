//! Dense Cholesky factorization with the diagonal jitter escalation used by
//! every covariance solve in the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Initial diagonal jitter, relative to the kernel amplitude.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Cholesky factor of a symmetric positive-definite matrix together with the
/// jitter that had to be added to its diagonal.
#[derive(Debug, Clone)]
pub struct Factor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl Factor {
    /// Factorizes `matrix` as given, then `matrix + jitter * I` starting from
    /// `JITTER_START * scale` and escalating by 10x up to `JITTER_MAX * scale`.
    pub fn new(matrix: &DMatrix<f64>, scale: f64, what: &'static str) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        let mut jitter = 0.0;
        loop {
            let mut m = matrix.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                if chol.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                    return Ok(Self { chol, jitter });
                }
            }
            if jitter >= JITTER_MAX * scale * (1.0 - 1e-12) {
                return Err(Error::NotPositiveDefinite { what, jitter });
            }
            jitter = if jitter == 0.0 { JITTER_START * scale } else { (jitter * 10.0).min(JITTER_MAX * scale) };
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor `L` with `L Lᵀ = A + jitter I`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Overwrites `b` with `L⁻¹ b`.
    pub fn forward_solve_in_place(&self, b: &mut [f64]) {
        forward_solve(self.chol.l_dirty(), b);
    }

    /// `bᵀ A⁻¹ b` via a single triangular solve.
    pub fn quad_form(&self, b: &[f64]) -> f64 {
        let mut v = b.to_vec();
        self.forward_solve_in_place(&mut v);
        v.iter().map(|x| x * x).sum()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Extends the factor by one row and column: the new matrix is
    /// `[[A, c], [cᵀ, diag]]`, with the current jitter added to `diag`.
    pub fn append(&self, cross: &[f64], diag: f64) -> Result<Self> {
        let n = self.dim();
        let mut row = cross.to_vec();
        self.forward_solve_in_place(&mut row);
        let pivot = diag + self.jitter - row.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { what: "appended covariance", jitter: self.jitter });
        }
        let old = self.chol.l_dirty();
        let mut l = DMatrix::zeros(n + 1, n + 1);
        for j in 0..n {
            for i in j..n {
                l[(i, j)] = old[(i, j)];
            }
            l[(n, j)] = row[j];
        }
        l[(n, n)] = pivot.sqrt();
        Ok(Self { chol: Cholesky::pack_dirty(l), jitter: self.jitter })
    }
}

/// Forward substitution with a column-major lower-triangular matrix.
pub(crate) fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    for j in 0..n {
        let col = l.column(j);
        let bj = b[j] / col[j];
        b[j] = bj;
        for i in j + 1..n {
            b[i] -= col[i] * bj;
        }
    }
}

/// Largest absolute deviation between a matrix and its transpose.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
