//! Disturbance observer: reconstructs the filter-bank regressor from the
//! plant state estimate.
//!
//! `ξ̂ = φ + Q_Σ·x̂`, `φ̇ = G_Σ·φ + (G_Σ·Q_Σ − Q_Σ·A)·x̂ − Q_Σ·B·u`.
//! With `Q_Σ·E = L_Σ` the regressor error `ξ − ξ̂` obeys `ė = G_Σ·e` when
//! `x̂ = x`.

use crate::error::{dim_err, Error, Result};
use crate::model::{FilterBank, LtiPlant};
use crate::numerics::{left_pinv, Matrix, Vector};

/// Auxiliary observer state with its derived regressor estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct DobsState {
    pub phi: Vector,
    pub xi_hat: Vector,
}

impl DobsState {
    pub fn new(bank: &FilterBank, phi: Vector, x_hat: &Vector) -> Self {
        let xi_hat = dobs_estimate(bank, &phi, x_hat);
        DobsState { phi, xi_hat }
    }
}

/// `qᵢ × n_dist` matrix whose column `i` (zero-based) is `Lᵢ`.
pub fn build_l0(i: usize, l_i: &Vector, n_dist: usize) -> Result<Matrix> {
    if i >= n_dist {
        return Err(dim_err("build_l0: channel index", format!("< {n_dist}"), i));
    }
    let mut out = Matrix::zeros(l_i.len(), n_dist);
    out.set_column(i, l_i);
    Ok(out)
}

/// Minimum-norm solution of `Qᵢ·E = L0ᵢ`, i.e. `L0ᵢ·(EᵀE)⁻¹Eᵀ`.
pub fn solve_q(e: &Matrix, l0_i: &Matrix) -> Result<Matrix> {
    if l0_i.ncols() != e.ncols() {
        return Err(dim_err("solve_q: L0 columns", e.ncols(), l0_i.ncols()));
    }
    let q = l0_i * left_pinv(e)?;
    let resid = (&q * e - l0_i).amax();
    if resid > 1e-10 * l0_i.amax().max(1.0) {
        return Err(Error::Singular { what: "solve_q", residual: resid });
    }
    Ok(q)
}

pub fn dobs_derivative(bank: &FilterBank, plant: &LtiPlant, phi: &Vector, x_hat: &Vector, u: &Vector) -> Vector {
    debug_assert_eq!(bank.q_sigma().ncols(), plant.n());
    bank.g_sigma() * phi + bank.gq_minus_qa() * x_hat - bank.qb() * u
}

pub fn dobs_estimate(bank: &FilterBank, phi: &Vector, x_hat: &Vector) -> Vector {
    phi + bank.q_sigma() * x_hat
}

/// `f̂ = θ·ξ̂`; row `i` of `theta` may only touch channel `i`'s block.
pub fn reconstruct_f(bank: &FilterBank, theta: &Matrix, xi_hat: &Vector) -> Result<Vector> {
    let n_dist = bank.pairs().len();
    if theta.shape() != (n_dist, bank.q()) || xi_hat.len() != bank.q() {
        return Err(dim_err(
            "reconstruct_f",
            format!("theta {n_dist}x{}, xi {}", bank.q(), bank.q()),
            format!("theta {:?}, xi {}", theta.shape(), xi_hat.len()),
        ));
    }
    let orders = bank.orders();
    for (i, &start) in bank.offsets().iter().enumerate() {
        let end = start + orders[i];
        let stray = (0..bank.q()).filter(|&k| k < start || k >= end).any(|k| theta[(i, k)] != 0.0);
        if stray {
            return Err(Error::Structure(format!("theta row {i} has entries outside its channel block")));
        }
    }
    Ok(theta * xi_hat)
}
