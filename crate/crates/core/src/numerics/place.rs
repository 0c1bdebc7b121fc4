//! Pole placement by Ackermann's formula, with the cyclic reduction for
//! multi-output observers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    controllability_matrix, eigenvalues, is_observable, matrix_poly, observability_matrix, Matrix, Spectrum,
    RANK_TOL,
};
use crate::error::{dim_err, Error, Result};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 8;

const PLACEMENT_TOL: f64 = 1e-6;

/// Row gain `k` with `char(G − L·k)` equal to the monic polynomial `poly`
/// (coefficients lowest degree first, `poly.len() == n + 1`).
pub fn ackermann_feedback(g: &Matrix, l: &Matrix, poly: &[f64]) -> Result<Matrix> {
    let n = g.nrows();
    if l.shape() != (n, 1) {
        return Err(dim_err("ackermann_feedback: input vector", format!("{n}x1"), format!("{:?}", l.shape())));
    }
    if poly.len() != n + 1 {
        return Err(dim_err("ackermann_feedback: polynomial", n + 1, poly.len()));
    }
    let wc = controllability_matrix(g, l);
    let wc_inv = wc.lu().try_inverse().ok_or(Error::Uncontrollable { what: "G, L" })?;
    let last = Matrix::from_iterator(1, n, wc_inv.row(n - 1).iter().copied());
    Ok(last * matrix_poly(g, poly))
}

// Column gain `k` with char(A − k·c) equal to `poly`, for a single output row `c`.
fn ackermann_observer(a: &Matrix, c: &Matrix, poly: &[f64]) -> Option<Matrix> {
    let n = a.nrows();
    let wo = observability_matrix(c, a);
    let wo_inv = wo.lu().try_inverse()?;
    let en = Matrix::from_column_slice(n, 1, wo_inv.column(n - 1).as_slice());
    Some(matrix_poly(a, poly) * en)
}

fn check_request(desired: &Spectrum, n: usize) -> Result<()> {
    if desired.len() != n {
        return Err(Error::PoleRequest(format!("expected {n} poles, got {}", desired.len())));
    }
    if !desired.is_self_conjugate(1e-8) {
        return Err(Error::PoleRequest("requested spectrum is not closed under conjugation".into()));
    }
    Ok(())
}

/// Observer gain `K₁` with `eig(A − K₁C)` equal to `desired`.
///
/// Multi-output pairs are reduced to a single output `vᵀC` with a random
/// combination vector; later attempts also apply a random output pre-gain
/// so that a non-cyclic `A` becomes cyclic. `seed` fixes the draws.
pub fn pole_place_observer(a: &Matrix, c: &Matrix, desired: &Spectrum, seed: u64) -> Result<Matrix> {
    let n = a.nrows();
    if !a.is_square() || c.ncols() != n {
        return Err(dim_err("pole_place_observer", format!("A {n}x{n}, C ?x{n}"), format!("A {:?}, C {:?}", a.shape(), c.shape())));
    }
    check_request(desired, n)?;
    if !is_observable(c, a, RANK_TOL) {
        return Err(Error::Unobservable { what: "C, A" });
    }
    let poly = desired.poly();
    let p = c.nrows();

    let achieved = |k1: &Matrix| -> f64 {
        eigenvalues(&(a - k1 * c)).map_or(f64::INFINITY, |s| desired.match_distance(&s))
    };

    if p == 1 {
        let k1 = ackermann_observer(a, c, &poly).ok_or(Error::Unobservable { what: "C, A" })?;
        let err = achieved(&k1);
        if err <= PLACEMENT_TOL {
            return Ok(k1);
        }
        return Err(Error::PolePlacement { attempts: 1, mismatch: err });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = a.amax().max(1.0);
    let mut best = f64::INFINITY;
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let v = Matrix::from_fn(p, 1, |_, _| rng.random_range(-1.0..1.0));
        let k0 = if attempt == 0 {
            Matrix::zeros(n, p)
        } else {
            Matrix::from_fn(n, p, |_, _| scale * rng.random_range(-1.0..1.0))
        };
        let a0 = a - &k0 * c;
        let row = v.transpose() * c;
        if !is_observable(&row, &a0, RANK_TOL) {
            continue;
        }
        let Some(k) = ackermann_observer(&a0, &row, &poly) else {
            continue;
        };
        let k1 = k0 + k * v.transpose();
        let err = achieved(&k1);
        if err <= PLACEMENT_TOL {
            return Ok(k1);
        }
        best = best.min(err);
    }
    Err(Error::PolePlacement { attempts: MAX_PLACEMENT_ATTEMPTS, mismatch: best })
}

#[cfg(test)]
mod tests {
    use nalgebra::Complex;

    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn double_integrator() {
        let k = pole_place_observer(
            &m(&[&[0.0, 1.0], &[0.0, 0.0]]),
            &m(&[&[1.0, 0.0]]),
            &Spectrum::real(&[-1.0, -2.0]),
            0,
        )
        .unwrap();
        assert!((k - m(&[&[3.0], &[2.0]])).amax() < 1e-12);
    }

    #[test]
    fn already_placed_scalar() {
        let k = pole_place_observer(&m(&[&[-5.0]]), &m(&[&[1.0]]), &Spectrum::real(&[-5.0]), 0).unwrap();
        assert!(k[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn multi_output_non_cyclic() {
        // diag(-1, -1, 2) is not cyclic: every single-output reduction fails
        // without the random pre-gain.
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -1.0, 2.0]));
        let c = m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        let want = Spectrum(vec![Complex::new(-2.0, 1.0), Complex::new(-2.0, -1.0), Complex::new(-4.0, 0.0)]);
        let k = pole_place_observer(&a, &c, &want, 7).unwrap();
        let got = eigenvalues(&(&a - &k * &c)).unwrap();
        assert!(want.match_distance(&got) < 1e-6);
    }

    #[test]
    fn unobservable_is_rejected() {
        let a = m(&[&[-1.0, 0.0], &[0.0, -7.0]]);
        let c = m(&[&[1.0, 0.0]]);
        let err = pole_place_observer(&a, &c, &Spectrum::real(&[-1.0, -2.0]), 0).unwrap_err();
        assert!(matches!(err, Error::Unobservable { .. }));
    }

    #[test]
    fn bad_requests() {
        let a = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let c = m(&[&[1.0, 0.0]]);
        assert!(pole_place_observer(&a, &c, &Spectrum::real(&[-1.0]), 0).is_err());
        let lone = Spectrum(vec![Complex::new(-1.0, 1.0), Complex::new(-2.0, 0.0)]);
        assert!(matches!(pole_place_observer(&a, &c, &lone, 0), Err(Error::PoleRequest(_))));
    }

    #[test]
    fn ackermann_state_feedback() {
        // G₁ + L₁θ with θ = −k must have char poly s² + 4.
        let g = m(&[&[0.0, 1.0], &[-3.0, -4.0]]);
        let l = m(&[&[0.0], &[2.0]]);
        let k = ackermann_feedback(&g, &l, &[4.0, 0.0, 1.0]).unwrap();
        assert!((-k - m(&[&[-0.5, 2.0]])).amax() < 1e-12);
    }
}
