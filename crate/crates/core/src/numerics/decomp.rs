use super::{observable_rows, Matrix, Vector};
use crate::error::{Error, Result};

/// Observability staircase `P·A·P⁻¹ = [[A11, 0], [A21, A22]]`, `C·P⁻¹ = [C*, 0]`.
#[derive(Debug, Clone)]
pub struct ObservableDecomposition {
    pub p: Matrix,
    pub p_inv: Matrix,
    pub a11: Matrix,
    pub a21: Matrix,
    pub a22: Matrix,
    pub c_star: Matrix,
    /// Dimension of the observable subspace.
    pub n1: usize,
}

impl ObservableDecomposition {
    pub fn is_fully_observable(&self) -> bool {
        self.n1 == self.p.nrows()
    }
}

/// Splits `(C, A)` into observable and unobservable parts.
///
/// The first `n1` rows of `P` are linearly independent rows of the
/// observability matrix; the remaining rows are an orthonormal basis of the
/// orthogonal complement of its row space. A fully observable pair yields
/// `P = I`.
pub fn observable_decomposition(c: &Matrix, a: &Matrix, tol: f64) -> Result<ObservableDecomposition> {
    let n = a.nrows();
    let (chosen, mut basis) = observable_rows(c, a, tol);
    let n1 = chosen.len();

    if n1 == n {
        return Ok(ObservableDecomposition {
            p: Matrix::identity(n, n),
            p_inv: Matrix::identity(n, n),
            a11: a.clone(),
            a21: Matrix::zeros(0, n),
            a22: Matrix::zeros(0, 0),
            c_star: c.clone(),
            n1,
        });
    }

    // Complete with unit vectors projected off the accepted span.
    let mut complement: Vec<Vector> = Vec::new();
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut r = Vector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for b in &basis {
                r -= b * b.dot(&r);
            }
        }
        let norm = r.norm();
        if norm > 1e-6 {
            let unit = r / norm;
            basis.push(unit.clone());
            complement.push(unit);
        }
    }

    let mut p = Matrix::zeros(n, n);
    for (i, row) in chosen.iter().chain(complement.iter()).enumerate() {
        p.set_row(i, &row.transpose());
    }
    let p_inv = p.clone().lu().try_inverse().ok_or(Error::Singular {
        what: "observable_decomposition: P",
        residual: f64::NAN,
    })?;
    let t = &p * a * &p_inv;
    let cp = c * &p_inv;
    let n2 = n - n1;
    Ok(ObservableDecomposition {
        a11: t.view((0, 0), (n1, n1)).into_owned(),
        a21: t.view((n1, 0), (n2, n1)).into_owned(),
        a22: t.view((n1, n1), (n2, n2)).into_owned(),
        c_star: cp.view((0, 0), (c.nrows(), n1)).into_owned(),
        p,
        p_inv,
        n1,
    })
}
