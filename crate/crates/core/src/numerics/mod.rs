//! Dense small-matrix utilities used by the synthesis routines.

mod decomp;
mod eigen;
mod kron;
mod place;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};

pub use decomp::{observable_decomposition, ObservableDecomposition};
pub use eigen::{eigenvalues, Spectrum};
pub use kron::{solve_kron, KronTerm};
pub use place::{ackermann_feedback, pole_place_observer, MAX_PLACEMENT_ATTEMPTS};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Threshold on eigenvalue real parts for stability classifications.
pub const EIG_TOL: f64 = 1e-9;

/// Numerical rank by Gaussian elimination with complete pivoting.
///
/// A pivot counts when its magnitude exceeds `tol` times the largest
/// absolute entry of `m`.
pub fn rank(m: &Matrix, tol: f64) -> usize {
    let scale = m.amax();
    if scale == 0.0 {
        return 0;
    }
    let thresh = tol * scale;
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut r = 0;
    while r < rows.min(cols) {
        // complete pivot search over the trailing block
        let mut best = (r, r, 0.0);
        for i in r..rows {
            for j in r..cols {
                let v = a[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= thresh {
            break;
        }
        a.swap_rows(r, best.0);
        a.swap_columns(r, best.1);
        let piv = a[(r, r)];
        for i in (r + 1)..rows {
            let f = a[(i, r)] / piv;
            if f != 0.0 {
                for j in r..cols {
                    a[(i, j)] -= f * a[(r, j)];
                }
            }
        }
        r += 1;
    }
    r
}

pub fn is_hurwitz(m: &Matrix, tol: f64) -> Result<bool> {
    Ok(eigenvalues(m)?.max_real() < -tol)
}

/// Left inverse `(EᵀE)⁻¹Eᵀ` of a full-column-rank matrix.
pub fn left_pinv(e: &Matrix) -> Result<Matrix> {
    let gram = e.transpose() * e;
    let inv = gram
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular { what: "left_pinv: EᵀE", residual: f64::NAN })?;
    let out = inv * e.transpose();
    let resid = (&out * e - Matrix::identity(e.ncols(), e.ncols())).amax();
    if !resid.is_finite() || resid > 1e-6 {
        return Err(Error::Singular { what: "left_pinv: EᵀE", residual: resid });
    }
    Ok(out)
}

/// `[C; CA; …; CA^{n-1}]`
pub fn observability_matrix(c: &Matrix, a: &Matrix) -> Matrix {
    let n = a.nrows();
    let p = c.nrows();
    let mut out = Matrix::zeros(p * n, n);
    let mut blk = c.clone();
    for k in 0..n {
        out.view_mut((k * p, 0), (p, n)).copy_from(&blk);
        blk = &blk * a;
    }
    out
}

/// `[B, AB, …, A^{n-1}B]`
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Matrix::zeros(n, m * n);
    let mut blk = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&blk);
        blk = a * &blk;
    }
    out
}

/// Greedy selection of independent rows `cᵢ·Aᵏ` of the observability
/// matrix, in order, with an orthonormal basis of their span.
///
/// A row counts as new when its component off the current span exceeds
/// `tol·‖cᵢ‖·‖A‖ᵏ`, the scale at which roundoff in the product lives. A
/// single global threshold would accept amplified roundoff in high powers.
pub(crate) fn observable_rows(c: &Matrix, a: &Matrix, tol: f64) -> (Vec<Vector>, Vec<Vector>) {
    let n = a.nrows();
    let a_norm = a.norm();
    let mut chosen: Vec<Vector> = Vec::new();
    let mut basis: Vec<Vector> = Vec::new();
    let mut blk = c.clone();
    let mut growth = 1.0;
    'powers: for _ in 0..n {
        for (i, row) in blk.row_iter().enumerate() {
            if basis.len() == n {
                break 'powers;
            }
            let raw: Vector = row.transpose();
            let mut r = raw.clone();
            for _ in 0..2 {
                for b in &basis {
                    r -= b * b.dot(&r);
                }
            }
            let norm = r.norm();
            let reference = c.row(i).norm() * growth;
            if norm > 0.0 && norm > tol * reference {
                chosen.push(raw);
                basis.push(r / norm);
            }
        }
        blk = &blk * a;
        growth *= a_norm;
    }
    (chosen, basis)
}

pub fn is_observable(c: &Matrix, a: &Matrix, tol: f64) -> bool {
    observable_rows(c, a, tol).0.len() == a.nrows()
}

pub fn is_controllable(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    is_observable(&b.transpose(), &a.transpose(), tol)
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Evaluates the polynomial `Σ coeffs[k]·Mᵏ` (lowest degree first) by Horner.
pub fn matrix_poly(m: &Matrix, coeffs: &[f64]) -> Matrix {
    let n = m.nrows();
    let mut acc = Matrix::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = &acc * m + Matrix::identity(n, n) * c;
    }
    acc
}

/// Builds a matrix from nested row slices.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(dim_err("from_rows", "non-empty rows", format!("{r}x{c}")));
    }
    if let Some(bad) = rows.iter().find(|row| row.len() != c) {
        return Err(dim_err("from_rows", format!("rows of length {c}"), format!("row of length {}", bad.len())));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
