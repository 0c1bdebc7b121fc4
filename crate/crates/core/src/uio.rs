//! Full-order unknown-input observer.
//!
//! ```text
//! ẇ = M·w + T·B·u + K·y,   x̂ = w + N·y
//! N = E[(CE)ᵀCE]⁻¹(CE)ᵀ,  T = I − NC,  M = TA − K₁C,  K = K₁ + MN
//! ```
//!
//! `(NC − I)E = 0` cancels the disturbance in the estimation error, which
//! then obeys `ė_x = M·e_x`.

use crate::error::{dim_err, Error, Result};
use crate::model::LtiPlant;
use crate::numerics::{
    eigenvalues, left_pinv, observable_decomposition, pole_place_observer, rank, Matrix, Spectrum, Vector, EIG_TOL,
    RANK_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct UioGains {
    pub m: Matrix,
    pub t: Matrix,
    pub k: Matrix,
    pub n: Matrix,
    pub k1: Matrix,
    pub k2: Matrix,
    /// `T·B`, cached for the runtime update.
    pub tb: Matrix,
}

/// Observer state `w` with the derived estimate `x̂ = w + N·y`.
#[derive(Debug, Clone, PartialEq)]
pub struct UioState {
    pub w: Vector,
    pub x_hat: Vector,
}

impl UioState {
    pub fn new(gains: &UioGains, w: Vector, y: &Vector) -> Self {
        let x_hat = uio_estimate(gains, &w, y);
        UioState { w, x_hat }
    }
}

/// How `K₁` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ObserverGain {
    /// Place the observable part of `(C, TA)` at these poles.
    Poles(Spectrum),
    /// Use this `K₁` verbatim.
    Explicit(Matrix),
}

/// Outcome of the two existence conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceReport {
    pub rank_e: usize,
    pub rank_ce: usize,
    /// Observable dimension of `(C, TA)`; `None` when the rank test fails.
    pub observable_dim: Option<usize>,
    /// Spectrum of the unobservable block of `(C, TA)`.
    pub unobservable_spectrum: Option<Spectrum>,
    pub detectable: Option<bool>,
}

impl ExistenceReport {
    pub fn rank_condition(&self) -> bool {
        self.rank_e == self.rank_ce
    }

    pub fn exists(&self) -> bool {
        self.rank_condition() && self.detectable == Some(true)
    }

    pub fn reason(&self) -> Option<String> {
        if !self.rank_condition() {
            return Some(format!("rank(CE) = {} differs from rank(E) = {}", self.rank_ce, self.rank_e));
        }
        if self.detectable != Some(true) {
            return Some("(C, TA) is not detectable: an unobservable mode is not asymptotically stable".into());
        }
        None
    }
}

/// Rank factorization `E = E₁·R` with `E₁` of full column rank.
pub fn split_e(e: &Matrix) -> Result<(Matrix, Matrix)> {
    let r = rank(e, RANK_TOL);
    if r == 0 {
        return Err(Error::Structure("split_e: E is zero".into()));
    }
    if r == e.ncols() {
        return Ok((e.clone(), Matrix::identity(r, r)));
    }
    let mut basis: Vec<Vector> = Vec::new();
    let mut cols = Vec::new();
    let scale = e.amax();
    for (j, col) in e.column_iter().enumerate() {
        let mut v: Vector = col.into_owned();
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let norm = v.norm();
        if norm > RANK_TOL * scale.max(1.0) {
            basis.push(v / norm);
            cols.push(j);
        }
        if cols.len() == r {
            break;
        }
    }
    let e1 = e.select_columns(&cols);
    let mix = left_pinv(&e1)? * e;
    Ok((e1, mix))
}

// N, T for a plant; N = 0 when E vanishes.
fn projection(plant: &LtiPlant) -> Result<(Matrix, Matrix)> {
    let n = plant.n();
    let c = plant.c();
    let nn = if rank(plant.e(), RANK_TOL) == 0 {
        Matrix::zeros(n, plant.n_out())
    } else {
        let (e1, _) = split_e(plant.e())?;
        let ce = c * &e1;
        &e1 * left_pinv(&ce)?
    };
    let t = Matrix::identity(n, n) - &nn * c;
    Ok((nn, t))
}

pub fn check_existence(plant: &LtiPlant) -> Result<ExistenceReport> {
    let rank_e = rank(plant.e(), RANK_TOL);
    let rank_ce = rank(&(plant.c() * plant.e()), RANK_TOL);
    let mut report = ExistenceReport {
        rank_e,
        rank_ce,
        observable_dim: None,
        unobservable_spectrum: None,
        detectable: None,
    };
    if rank_e != rank_ce {
        return Ok(report);
    }
    let (_, t) = projection(plant)?;
    let a1 = &t * plant.a();
    let d = observable_decomposition(plant.c(), &a1, RANK_TOL)?;
    report.observable_dim = Some(d.n1);
    if d.is_fully_observable() {
        report.unobservable_spectrum = Some(Spectrum(vec![]));
        report.detectable = Some(true);
    } else {
        let s = eigenvalues(&d.a22)?;
        report.detectable = Some(s.max_real() < -EIG_TOL);
        report.unobservable_spectrum = Some(s);
    }
    Ok(report)
}

/// Runs the full synthesis: existence check, projection, `K₁` (explicit, by
/// pole placement, or through the observable decomposition), then `M`, `K₂`, `K`.
pub fn synthesize(plant: &LtiPlant, request: &ObserverGain, seed: u64) -> Result<UioGains> {
    let report = check_existence(plant)?;
    if !report.rank_condition() {
        return Err(Error::ObserverDoesNotExist(report.reason().unwrap_or_default()));
    }
    let n = plant.n();
    let (a, c) = (plant.a(), plant.c());
    let (nn, t) = projection(plant)?;
    let a1 = &t * a;

    // The detectability matrix A − N·C·A must coincide with T·A.
    let a_bar = a - &nn * c * a;
    let gap = (&a_bar - &a1).amax();
    if gap > 1e-10 * a.amax().max(1.0) {
        return Err(Error::Structure(format!("A − NCA differs from TA by {gap:.3e}")));
    }

    let k1 = match request {
        ObserverGain::Explicit(k1) => {
            if k1.shape() != (n, plant.n_out()) {
                return Err(dim_err("explicit K1", format!("{n}x{}", plant.n_out()), format!("{:?}", k1.shape())));
            }
            k1.clone()
        }
        ObserverGain::Poles(poles) => {
            let d = observable_decomposition(c, &a1, RANK_TOL)?;
            if d.is_fully_observable() {
                pole_place_observer(&a1, c, poles, seed)?
            } else {
                let s22 = eigenvalues(&d.a22)?;
                if s22.max_real() >= -EIG_TOL {
                    return Err(Error::ObserverDoesNotExist(format!(
                        "unobservable block of (C, TA) has eigenvalue with Re = {:.6e}",
                        s22.max_real()
                    )));
                }
                let wanted = if poles.len() == d.n1 {
                    poles.clone()
                } else if poles.len() == n {
                    Spectrum(poles.0[..d.n1].to_vec())
                } else {
                    return Err(Error::PoleRequest(format!(
                        "observable subsystem has order {}, got {} poles",
                        d.n1,
                        poles.len()
                    )));
                };
                let kp1 = pole_place_observer(&d.a11, &d.c_star, &wanted, seed)?;
                let mut kp = Matrix::zeros(n, plant.n_out());
                kp.view_mut((0, 0), kp1.shape()).copy_from(&kp1);
                &d.p_inv * kp
            }
        }
    };

    let m = &a1 - &k1 * c;
    let spec = eigenvalues(&m)?;
    if spec.max_real() >= -EIG_TOL {
        return Err(Error::NotHurwitz { what: "observer matrix M", max_re: spec.max_real() });
    }
    let k2 = &m * &nn;
    let k = &k1 + &k2;
    let tb = &t * plant.b();
    Ok(UioGains { m, t, k, n: nn, k1, k2, tb })
}

/// `ẇ = M·w + T·B·u + K·y`
pub fn uio_derivative(gains: &UioGains, w: &Vector, u: &Vector, y: &Vector) -> Vector {
    &gains.m * w + &gains.tb * u + &gains.k * y
}

/// `x̂ = w + N·y`
pub fn uio_estimate(gains: &UioGains, w: &Vector, y: &Vector) -> Vector {
    w + &gains.n * y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn worked_example_gains() {
        let plant = golden::plant();
        let g = synthesize(&plant, &ObserverGain::Explicit(golden::k1()), 0).unwrap();
        assert!((&g.k - golden::expected_k()).amax() < 1e-12);
        assert!((&g.n - m(&[&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]])).amax() < 1e-12);
        assert!((&g.t - m(&[&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, -1.0, 0.0]])).amax() < 1e-12);
        assert!((&g.m - m(&[&[-3.0, 5.0, 5.0], &[1.0, -5.0, -4.0], &[3.0, -7.0, -8.0]])).amax() < 1e-12);
        let e = plant.e();
        assert!(((&g.n * plant.c() - Matrix::identity(3, 3)) * e).amax() < 1e-12);
    }

    #[test]
    fn worked_example_existence() {
        let r = check_existence(&golden::plant()).unwrap();
        assert!(r.rank_condition());
        assert_eq!(r.observable_dim, Some(2));
        assert!(r.exists());
    }

    #[test]
    fn single_output_fails_rank_test() {
        let p = golden::plant();
        let plant = LtiPlant::new(
            p.a().clone(),
            p.b().select_columns(&[0]),
            m(&[&[1.0, 0.0, 0.0]]),
            p.e().clone(),
            p.x0().clone(),
        )
        .unwrap();
        let r = check_existence(&plant).unwrap();
        assert_eq!(r.rank_e, 2);
        assert_eq!(r.rank_ce, 1);
        assert!(!r.exists());
        assert!(matches!(
            synthesize(&plant, &ObserverGain::Poles(Spectrum::real(&[-1.0, -2.0, -3.0])), 0),
            Err(Error::ObserverDoesNotExist(_))
        ));
    }

    #[test]
    fn zero_e_reduces_to_luenberger() {
        let plant = golden::plant().with_e(Matrix::zeros(3, 1)).unwrap();
        let r = check_existence(&plant).unwrap();
        assert_eq!((r.rank_e, r.rank_ce), (0, 0));
        let poles = Spectrum::real(&[-2.0, -3.0, -4.0]);
        let g = synthesize(&plant, &ObserverGain::Poles(poles.clone()), 3).unwrap();
        assert_eq!(g.n, Matrix::zeros(3, 2));
        assert_eq!(g.t, Matrix::identity(3, 3));
        assert!((&g.m - (plant.a() - &g.k1 * plant.c())).amax() < 1e-12);
        assert!(poles.match_distance(&eigenvalues(&g.m).unwrap()) < 1e-6);
    }

    #[test]
    fn pole_request_through_decomposition() {
        let plant = golden::plant();
        let g = synthesize(&plant, &ObserverGain::Poles(Spectrum::real(&[-2.0, -5.0])), 1).unwrap();
        let got = eigenvalues(&g.m).unwrap();
        // the unobservable mode at -1 stays, the other two are placed
        assert!(Spectrum::real(&[-1.0, -2.0, -5.0]).match_distance(&got) < 1e-6);
        assert!((&g.k - (&g.k1 + &g.m * &g.n)).amax() < 1e-12);
    }

    #[test]
    fn split_e_examples() {
        let e = golden::plant().e().clone();
        let (e1, r) = split_e(&e).unwrap();
        assert_eq!(e1, e);
        assert_eq!(r, Matrix::identity(2, 2));

        let col = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let e = Matrix::from_columns(&[col.clone(), &col * 2.0]);
        let (e1, r) = split_e(&e).unwrap();
        assert_eq!(e1.ncols(), 1);
        assert!((&r - m(&[&[1.0, 2.0]])).amax() < 1e-12);
        assert!((&e1 * &r - &e).amax() < 1e-10);

        let first = golden::plant().e().column(0).into_owned();
        let dup = Matrix::from_columns(&[first.clone(), first]);
        let (e1, r) = split_e(&dup).unwrap();
        assert_eq!(e1.ncols(), 1);
        assert!((&e1 * &r - &dup).amax() < 1e-10);
    }

    #[test]
    fn runtime_examples() {
        let plant = golden::plant();
        let g = synthesize(&plant, &ObserverGain::Explicit(golden::k1()), 0).unwrap();
        let z3 = Vector::zeros(3);
        let z2 = Vector::zeros(2);
        assert_eq!(uio_derivative(&g, &z3, &z2, &z2), z3);
        let y0 = plant.c() * plant.x0();
        assert_eq!(y0, Vector::from_vec(vec![1.0, 1.0]));
        let d = uio_derivative(&g, &z3, &z2, &y0);
        assert!((d - Vector::from_vec(vec![0.0, 1.0, -1.0])).amax() < 1e-12);
        assert_eq!(uio_estimate(&g, &z3, &z2), z3);
        assert_eq!(uio_estimate(&g, &z3, &y0), Vector::from_vec(vec![1.0, 0.0, 1.0]));

        let mut ident = g.clone();
        ident.m = -Matrix::identity(3, 3);
        let e1 = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(uio_derivative(&ident, &e1, &z2, &z2), -e1);
    }
}
