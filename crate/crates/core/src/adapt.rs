//! Online adaptation of the feedback parameters `Ψ̂`.
//!
//! The plant transfer `W(s) = C(sI − A)⁻¹B` is applied to the regressor with
//! one state-space filter per input channel:
//! `Żⱼ = A·Zⱼ + bⱼ·ξ̂ᵀ`, `Φ = [C·Z₁ | … | C·Z_{n_in}]`.
//! Entry `(i, j·q + k)` of `Φ` is `Wᵢⱼ(s)[ξ̂ₖ]`, so for constant `Ψ̂`,
//! `W(s)[Ψ̂·ξ̂] = Φ·vec(Ψ̂)` with `vec` stacking the rows of `Ψ̂`.

use crate::error::{dim_err, Error, Result};
use crate::model::LtiPlant;
use crate::numerics::{Matrix, Vector};

/// States of the `W(s)` filters for the regressor and for `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorFilterState {
    pub z: Vec<Matrix>,
    pub x_u: Vector,
}

impl RegressorFilterState {
    pub fn zeros(n: usize, n_in: usize, q: usize) -> Self {
        RegressorFilterState { z: vec![Matrix::zeros(n, q); n_in], x_u: Vector::zeros(n) }
    }

    /// `Φ = [C·Z₁ | … | C·Z_{n_in}]`
    pub fn phi(&self, c: &Matrix) -> Matrix {
        let q = self.z.first().map_or(0, Matrix::ncols);
        let mut out = Matrix::zeros(c.nrows(), q * self.z.len());
        for (j, zj) in self.z.iter().enumerate() {
            out.view_mut((0, j * q), (c.nrows(), q)).copy_from(&(c * zj));
        }
        out
    }
}

/// `Żⱼ = A·Zⱼ + bⱼ·ξ̂ᵀ`, `ẋ_u = A·x_u + B·u`.
pub fn filter_derivatives(plant: &LtiPlant, state: &RegressorFilterState, xi_hat: &Vector, u: &Vector) -> RegressorFilterState {
    let a = plant.a();
    let b = plant.b();
    let z = state
        .z
        .iter()
        .enumerate()
        .map(|(j, zj)| a * zj + b.column(j) * xi_hat.transpose())
        .collect();
    RegressorFilterState { z, x_u: a * &state.x_u + b * u }
}

/// Row-major stacking of `Ψ̂` (`n_in × q`), matching the column order of `Φ`.
pub fn psi_to_vec(psi: &Matrix) -> Vector {
    Vector::from_iterator(psi.len(), psi.transpose().iter().copied())
}

pub fn psi_from_vec(v: &Vector, n_in: usize, q: usize) -> Result<Matrix> {
    if v.len() != n_in * q {
        return Err(dim_err("psi_from_vec", n_in * q, v.len()));
    }
    Ok(Matrix::from_row_slice(n_in, q, v.as_slice()))
}

/// `ȳ = y − Φ·ψ̂ − C·x_u`
pub fn extended_error(c: &Matrix, y: &Vector, state: &RegressorFilterState, psi_hat_vec: &Vector) -> Vector {
    extended_error_from(&state.phi(c), y, &(c * &state.x_u), psi_hat_vec)
}

pub fn extended_error_from(phi: &Matrix, y: &Vector, c_xu: &Vector, psi_hat_vec: &Vector) -> Vector {
    y - phi * psi_hat_vec - c_xu
}

/// Which update law drives `ψ̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptLaw {
    /// `ψ̂̇ = γ·Φᵀ·ȳ`
    Gradient { gain: f64 },
    /// Memory regressor extension through `H(s) = 1/(τs + 1)`:
    /// `ψ̂̇ = γ·(Y − Ω·ψ̂)`.
    Mre { gain: f64, tau: f64 },
}

impl AdaptLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AdaptLaw::Gradient { gain } if gain > 0.0 && gain.is_finite() => Ok(()),
            AdaptLaw::Mre { gain, tau } if gain > 0.0 && gain.is_finite() && tau > 0.0 && tau.is_finite() => Ok(()),
            _ => Err(Error::Config(format!("adaptation gain and filter time constant must be positive: {self:?}"))),
        }
    }
}

/// Filtered regression `Y = H[Φᵀŷ]`, `Ω = H[ΦᵀΦ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MreState {
    pub y_f: Vector,
    pub omega: Matrix,
}

impl MreState {
    pub fn zeros(dim: usize) -> Self {
        MreState { y_f: Vector::zeros(dim), omega: Matrix::zeros(dim, dim) }
    }

    /// Restores exact symmetry of `Ω`.
    pub fn symmetrize(&mut self) {
        let t = self.omega.transpose();
        self.omega = (&self.omega + t) * 0.5;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptState {
    pub psi_hat_vec: Vector,
    pub mre: Option<MreState>,
}

impl AdaptState {
    pub fn new(law: &AdaptLaw, dim: usize) -> Self {
        let mre = matches!(law, AdaptLaw::Mre { .. }).then(|| MreState::zeros(dim));
        AdaptState { psi_hat_vec: Vector::zeros(dim), mre }
    }
}

pub fn gradient_update_derivative(phi: &Matrix, y_bar: &Vector, adapt_gain: f64) -> Vector {
    phi.tr_mul(y_bar) * adapt_gain
}

/// Returns `(Ẏ, Ω̇, ψ̂̇)` given `Δ = Φ` and `ŷ = y − C·x_u`.
pub fn mre_update_derivatives(
    phi: &Matrix,
    y_r: &Vector,
    mre: &MreState,
    psi_hat_vec: &Vector,
    tau: f64,
    adapt_gain: f64,
) -> (Vector, Matrix, Vector) {
    let dy = (phi.tr_mul(y_r) - &mre.y_f) / tau;
    let domega = (phi.tr_mul(phi) - &mre.omega) / tau;
    let dpsi = (&mre.y_f - &mre.omega * psi_hat_vec) * adapt_gain;
    (dy, domega, dpsi)
}
