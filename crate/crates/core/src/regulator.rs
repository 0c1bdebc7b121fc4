//! Regulator equations, the true internal-model parameters and the
//! certainty-equivalence control law.

use crate::error::{dim_err, Error, Result};
use crate::model::{DisturbanceChannel, FilterBank, LtiPlant};
use crate::numerics::{ackermann_feedback, solve_kron, KronTerm, Matrix, Vector};

/// `θ` (`n_dist × q`) with `f = θ·ξ` once the filter bank is in steady state.
/// Row `i` is supported on channel `i`'s block only.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueTheta {
    pub theta: Matrix,
}

impl TrueTheta {
    /// `G_Σ + L_Σ·θ`, the filter bank closed by the true parameters.
    pub fn closed_generator(&self, bank: &FilterBank) -> Matrix {
        bank.g_sigma() + bank.l_sigma() * &self.theta
    }
}

/// Solution `(Π, Ψ)` of
/// `A·Π − Π·(G_Σ + L_Σθ) = B·Ψ − E·θ`, `C·Π = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrancisSolution {
    pub pi: Matrix,
    pub psi: Matrix,
}

impl FrancisSolution {
    /// Max-abs residuals of the two regulator equations.
    pub fn residuals(&self, plant: &LtiPlant, bank: &FilterBank, theta: &TrueTheta) -> (f64, f64) {
        let s = theta.closed_generator(bank);
        let r1 = plant.a() * &self.pi - &self.pi * s - plant.b() * &self.psi + plant.e() * &theta.theta;
        let r2 = plant.c() * &self.pi;
        (r1.amax(), r2.amax())
    }
}

/// Per channel, the row `θᵢ` that moves `eig(Gᵢ + Lᵢθᵢ)` onto the
/// disturbance generator spectrum (characteristic polynomial matching).
pub fn true_theta(bank: &FilterBank, channels: &[DisturbanceChannel]) -> Result<TrueTheta> {
    let pairs = bank.pairs();
    if channels.len() != pairs.len() {
        return Err(dim_err("true_theta: channels", pairs.len(), channels.len()));
    }
    let mut theta = Matrix::zeros(pairs.len(), bank.q());
    for (i, (pair, ch)) in pairs.iter().zip(channels).enumerate() {
        let qz = ch.generator_order();
        if qz != pair.order() {
            return Err(Error::Config(format!(
                "channel {i}: filter order {} must equal the disturbance generator order {qz}",
                pair.order()
            )));
        }
        let l = Matrix::from_column_slice(pair.order(), 1, pair.l().as_slice());
        let k = ackermann_feedback(pair.g(), &l, &ch.characteristic_polynomial())?;
        let start = bank.offsets()[i];
        for (j, v) in k.iter().enumerate() {
            theta[(i, start + j)] = -v;
        }
    }
    Ok(TrueTheta { theta })
}

/// Solves both regulator equations jointly for `Z = [Π; Ψ]`:
/// `[[A, −B], [C, 0]]·Z − [[I, 0], [0, 0]]·Z·S = [[−Eθ], [0]]`.
pub fn solve_francis(plant: &LtiPlant, bank: &FilterBank, theta: &TrueTheta) -> Result<FrancisSolution> {
    let (n, m, p, q) = (plant.n(), plant.n_in(), plant.n_out(), bank.q());
    let s = theta.closed_generator(bank);

    let mut left = Matrix::zeros(n + p, n + m);
    left.view_mut((0, 0), (n, n)).copy_from(plant.a());
    left.view_mut((0, n), (n, m)).copy_from(&(-plant.b()));
    left.view_mut((n, 0), (p, n)).copy_from(plant.c());
    let mut sel = Matrix::zeros(n + p, n + m);
    sel.view_mut((0, 0), (n, n)).fill_with_identity();

    let mut rhs = Matrix::zeros(n + p, q);
    rhs.view_mut((0, 0), (n, q)).copy_from(&(-(plant.e() * &theta.theta)));

    let terms = [KronTerm::new(left, Matrix::identity(q, q)), KronTerm::new(-sel, s)];
    let z = solve_kron(&terms, &rhs, (n + m, q))?;
    Ok(FrancisSolution {
        pi: z.rows(0, n).into_owned(),
        psi: z.rows(n, m).into_owned(),
    })
}

/// `u = −Ψ̂·ξ̂` with `Ψ̂` stored as `n_in × q`.
pub fn control_law(psi_hat: &Matrix, xi_hat: &Vector) -> Vector {
    -(psi_hat * xi_hat)
}
