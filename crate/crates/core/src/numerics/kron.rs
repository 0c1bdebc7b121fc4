use super::{Matrix, Vector};
use crate::error::{dim_err, Error, Result};

/// One term `P·X·Q` of a linear matrix equation `Σ Pᵢ·X·Qᵢ = R`.
#[derive(Debug, Clone)]
pub struct KronTerm {
    pub left: Matrix,
    pub right: Matrix,
}

impl KronTerm {
    pub fn new(left: Matrix, right: Matrix) -> Self {
        KronTerm { left, right }
    }
}

/// Solves `Σ Pᵢ·X·Qᵢ = R` for `X` of shape `x_shape` through
/// `vec(P·X·Q) = (Qᵀ ⊗ P)·vec(X)`.
///
/// Square systems go through LU with partial pivoting; anything else (or a
/// singular LU) falls back to SVD least squares. The result is accepted only
/// when the substituted residual is at most `1e-8·max(‖R‖, 1)`.
pub fn solve_kron(terms: &[KronTerm], rhs: &Matrix, x_shape: (usize, usize)) -> Result<Matrix> {
    let (xr, xc) = x_shape;
    let unknowns = xr * xc;
    let eqs = rhs.len();
    let mut k = Matrix::zeros(eqs, unknowns);
    for t in terms {
        if t.left.ncols() != xr || t.right.nrows() != xc || t.left.nrows() != rhs.nrows() || t.right.ncols() != rhs.ncols() {
            return Err(dim_err(
                "solve_kron term",
                format!("P {}x{xr}, Q {xc}x{}", rhs.nrows(), rhs.ncols()),
                format!("P {:?}, Q {:?}", t.left.shape(), t.right.shape()),
            ));
        }
        k += t.right.transpose().kronecker(&t.left);
    }
    let b = Vector::from_column_slice(rhs.as_slice());

    let direct = if eqs == unknowns { k.clone().lu().solve(&b) } else { None };
    let sol = match direct {
        Some(s) => s,
        None => k
            .clone()
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|_| Error::Singular { what: "solve_kron", residual: f64::NAN })?,
    };
    let resid = (&k * &sol - &b).norm();
    if !resid.is_finite() || resid > 1e-8 * b.norm().max(1.0) {
        return Err(Error::Singular { what: "solve_kron", residual: resid });
    }
    Ok(Matrix::from_column_slice(xr, xc, sol.as_slice()))
}
