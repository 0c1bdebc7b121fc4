//! Fixed-step closed-loop simulation of plant, observers, regressor filters
//! and adaptation.

use serde::{Deserialize, Serialize};

use crate::adapt::{
    extended_error_from, filter_derivatives, gradient_update_derivative, mre_update_derivatives, psi_from_vec,
    AdaptLaw, MreState, RegressorFilterState,
};
use crate::dobs::{dobs_derivative, dobs_estimate};
use crate::error::{Error, Result};
use crate::model::{build_exo_generator, build_filter_bank, DisturbanceChannel, ExoGenerator, FilterBank, FilterPair, LtiPlant};
use crate::numerics::{Matrix, Vector};
use crate::regulator::{control_law, solve_francis, true_theta, FrancisSolution, TrueTheta};
use crate::uio::{check_existence, synthesize, uio_derivative, uio_estimate, ExistenceReport, ObserverGain, UioGains};

/// State norm above which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_SETTLE_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Gradient law on the extended error.
    Gradient,
    /// Memory regressor extension.
    Mre,
    /// Regulator-equation feedback with the true regressor (no estimation).
    Ideal,
    /// No control.
    #[value(name = "openloop")]
    #[serde(rename = "openloop")]
    OpenLoop,
}

/// Which state drives the disturbance observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DobsInput {
    /// The unknown-input observer estimate (normal operation).
    #[default]
    Estimate,
    /// The true plant state (diagnostic).
    TrueState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: LtiPlant,
    pub channels: Vec<DisturbanceChannel>,
    pub filters: Vec<FilterPair>,
    pub observer: ObserverGain,
    pub algorithm: Algorithm,
    pub adapt_gain: f64,
    pub tau: f64,
    pub step: f64,
    pub duration: f64,
    pub stride: usize,
    pub dobs_input: DobsInput,
    pub seed: u64,
    pub settle_eps: f64,
    pub max_harmonics: Option<usize>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 0.01) {
            return Err(Error::Config(format!("step must lie in (0, 0.01], got {}", self.step)));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(self.settle_eps > 0.0) {
            return Err(Error::Config("settling threshold must be positive".into()));
        }
        if self.channels.len() != self.plant.n_dist() {
            return Err(Error::Config(format!(
                "{} disturbance channels given for a plant with {} disturbance inputs",
                self.channels.len(),
                self.plant.n_dist()
            )));
        }
        if let Some(max) = self.max_harmonics {
            for ch in &self.channels {
                ch.check_harmonic_bound(max)?;
            }
        }
        if let Some(law) = self.law() {
            law.validate()?;
        }
        Ok(())
    }

    pub fn law(&self) -> Option<AdaptLaw> {
        match self.algorithm {
            Algorithm::Gradient => Some(AdaptLaw::Gradient { gain: self.adapt_gain }),
            Algorithm::Mre => Some(AdaptLaw::Mre { gain: self.adapt_gain, tau: self.tau }),
            Algorithm::Ideal | Algorithm::OpenLoop => None,
        }
    }
}

/// Everything computed offline from a scenario.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub existence: ExistenceReport,
    pub gains: UioGains,
    pub bank: FilterBank,
    pub generators: Vec<ExoGenerator>,
    pub theta: TrueTheta,
    pub francis: FrancisSolution,
}

pub fn synthesize_scenario(cfg: &ScenarioConfig) -> Result<Synthesis> {
    cfg.validate()?;
    let existence = check_existence(&cfg.plant)?;
    if !existence.exists() {
        return Err(Error::ObserverDoesNotExist(existence.reason().unwrap_or_default()));
    }
    let gains = synthesize(&cfg.plant, &cfg.observer, cfg.seed)?;
    let bank = build_filter_bank(cfg.filters.clone(), &cfg.plant)?;
    let generators = cfg.channels.iter().map(build_exo_generator).collect::<Result<Vec<_>>>()?;
    let theta = true_theta(&bank, &cfg.channels)?;
    let francis = solve_francis(&cfg.plant, &bank, &theta)?;
    Ok(Synthesis { existence, gains, bank, generators, theta, francis })
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(mut f: F, t: f64, y: &Vector, h: f64) -> Result<Vector>
where
    F: FnMut(f64, &Vector) -> Vector,
{
    let check = |v: Vector, t: f64| -> Result<Vector> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFinite { location: "rk4 stage derivative", t })
        }
    };
    let k1 = check(f(t, y), t)?;
    let k2 = check(f(t + 0.5 * h, &(y + &k1 * (0.5 * h))), t)?;
    let k3 = check(f(t + 0.5 * h, &(y + &k2 * (0.5 * h))), t)?;
    let k4 = check(f(t + h, &(y + &k3 * h)), t)?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Offsets of each sub-state inside the joint vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    n_in: usize,
    q: usize,
    x: usize,
    w: usize,
    phi: usize,
    xi: usize,
    z: usize,
    xu: usize,
    psi: usize,
    yf: usize,
    omega: usize,
    len: usize,
}

impl Layout {
    fn new(n: usize, n_in: usize, q: usize, mre: bool) -> Self {
        let p = n_in * q;
        let x = 0;
        let w = x + n;
        let phi = w + n;
        let xi = phi + q;
        let z = xi + q;
        let xu = z + n_in * n * q;
        let psi = xu + n;
        let yf = psi + p;
        let omega = yf + if mre { p } else { 0 };
        let len = omega + if mre { p * p } else { 0 };
        Layout { n, n_in, q, x, w, phi, xi, z, xu, psi, yf, omega, len }
    }

    fn p(&self) -> usize {
        self.n_in * self.q
    }
}

fn seg(s: &Vector, start: usize, len: usize) -> Vector {
    s.rows(start, len).into_owned()
}

fn put(out: &mut Vector, start: usize, v: &[f64]) {
    out.as_mut_slice()[start..start + v.len()].copy_from_slice(v);
}

/// Instantaneous closed-loop signals at one state.
struct Signals {
    x: Vector,
    w: Vector,
    y: Vector,
    x_hat: Vector,
    phi: Vector,
    xi_hat: Vector,
    xi: Vector,
    filters: RegressorFilterState,
    psi: Vector,
    mre: Option<MreState>,
    u: Vector,
    f: Vector,
    regressor: Matrix,
    c_xu: Vector,
}

struct ClosedLoop<'a> {
    cfg: &'a ScenarioConfig,
    syn: &'a Synthesis,
    layout: Layout,
    law: Option<AdaptLaw>,
}

impl ClosedLoop<'_> {
    fn disturbance(&self, t: f64) -> Vector {
        Vector::from_iterator(self.syn.generators.len(), self.syn.generators.iter().map(|g| g.output_at(t)))
    }

    fn initial_state(&self) -> Vector {
        let mut s = Vector::zeros(self.layout.len);
        put(&mut s, self.layout.x, self.cfg.plant.x0().as_slice());
        s
    }

    fn signals(&self, t: f64, s: &Vector) -> Signals {
        let l = &self.layout;
        let plant = &self.cfg.plant;
        let x = seg(s, l.x, l.n);
        let w = seg(s, l.w, l.n);
        let y = plant.c() * &x;
        let x_hat = uio_estimate(&self.syn.gains, &w, &y);
        let phi = seg(s, l.phi, l.q);
        let dobs_src = match self.cfg.dobs_input {
            DobsInput::Estimate => &x_hat,
            DobsInput::TrueState => &x,
        };
        let xi_hat = dobs_estimate(&self.syn.bank, &phi, dobs_src);
        let xi = seg(s, l.xi, l.q);
        let blk = l.n * l.q;
        let z = (0..l.n_in)
            .map(|j| Matrix::from_column_slice(l.n, l.q, &s.as_slice()[l.z + j * blk..l.z + (j + 1) * blk]))
            .collect();
        let filters = RegressorFilterState { z, x_u: seg(s, l.xu, l.n) };
        let psi = seg(s, l.psi, l.p());
        let mre = matches!(self.law, Some(AdaptLaw::Mre { .. })).then(|| MreState {
            y_f: seg(s, l.yf, l.p()),
            omega: Matrix::from_column_slice(l.p(), l.p(), &s.as_slice()[l.omega..l.omega + l.p() * l.p()]),
        });
        let u = match self.cfg.algorithm {
            Algorithm::Gradient | Algorithm::Mre => {
                let psi_hat = psi_from_vec(&psi, l.n_in, l.q).expect("layout sized");
                control_law(&psi_hat, &xi_hat)
            }
            Algorithm::Ideal => control_law(&self.syn.francis.psi, &xi),
            Algorithm::OpenLoop => Vector::zeros(l.n_in),
        };
        let regressor = filters.phi(plant.c());
        let c_xu = plant.c() * &filters.x_u;
        Signals { x, w, y, x_hat, phi, xi_hat, xi, filters, psi, mre, u, f: self.disturbance(t), regressor, c_xu }
    }

    fn derivative(&self, t: f64, s: &Vector) -> Vector {
        let l = &self.layout;
        let plant = &self.cfg.plant;
        let sig = self.signals(t, s);
        let mut out = Vector::zeros(l.len);

        let dx = plant.a() * &sig.x + plant.b() * &sig.u + plant.e() * &sig.f;
        put(&mut out, l.x, dx.as_slice());
        let dw = uio_derivative(&self.syn.gains, &sig.w, &sig.u, &sig.y);
        put(&mut out, l.w, dw.as_slice());
        let dobs_src = match self.cfg.dobs_input {
            DobsInput::Estimate => &sig.x_hat,
            DobsInput::TrueState => &sig.x,
        };
        let dphi = dobs_derivative(&self.syn.bank, plant, &sig.phi, dobs_src, &sig.u);
        put(&mut out, l.phi, dphi.as_slice());
        let dxi = self.syn.bank.g_sigma() * &sig.xi + self.syn.bank.l_sigma() * &sig.f;
        put(&mut out, l.xi, dxi.as_slice());

        let dfil = filter_derivatives(plant, &sig.filters, &sig.xi_hat, &sig.u);
        let blk = l.n * l.q;
        for (j, dz) in dfil.z.iter().enumerate() {
            put(&mut out, l.z + j * blk, dz.as_slice());
        }
        put(&mut out, l.xu, dfil.x_u.as_slice());

        match (self.law, &sig.mre) {
            (Some(AdaptLaw::Gradient { gain }), _) => {
                let ybar = extended_error_from(&sig.regressor, &sig.y, &sig.c_xu, &sig.psi);
                let dpsi = gradient_update_derivative(&sig.regressor, &ybar, gain);
                put(&mut out, l.psi, dpsi.as_slice());
            }
            (Some(AdaptLaw::Mre { gain, tau }), Some(mre)) => {
                let y_r = &sig.y - &sig.c_xu;
                let (dy, dom, dpsi) = mre_update_derivatives(&sig.regressor, &y_r, mre, &sig.psi, tau, gain);
                put(&mut out, l.psi, dpsi.as_slice());
                put(&mut out, l.yf, dy.as_slice());
                put(&mut out, l.omega, dom.as_slice());
            }
            _ => {}
        }
        out
    }

    fn symmetrize(&self, s: &mut Vector) {
        if !matches!(self.law, Some(AdaptLaw::Mre { .. })) {
            return;
        }
        let l = &self.layout;
        let p = l.p();
        let sl = &mut s.as_mut_slice()[l.omega..l.omega + p * p];
        for i in 0..p {
            for j in (i + 1)..p {
                let avg = 0.5 * (sl[i + j * p] + sl[j + i * p]);
                sl[i + j * p] = avg;
                sl[j + i * p] = avg;
            }
        }
    }

    fn sample(&self, t: f64, s: &Vector) -> Sample {
        let sig = self.signals(t, s);
        let ybar = extended_error_from(&sig.regressor, &sig.y, &sig.c_xu, &sig.psi);
        let f_hat = &self.syn.theta.theta * &sig.xi_hat;
        Sample {
            t,
            ex_norm: (&sig.x - &sig.x_hat).norm(),
            exi_norm: (&sig.xi - &sig.xi_hat).norm(),
            ybar_norm: ybar.norm(),
            omega_min_eig: sig.mre.as_ref().map(|m| m.omega.clone().symmetric_eigenvalues().min()),
            x: sig.x,
            x_hat: sig.x_hat,
            w: sig.w,
            phi: sig.phi,
            xi_hat: sig.xi_hat,
            xi: sig.xi,
            psi_hat: sig.psi,
            u: sig.u,
            y: sig.y,
            f: sig.f,
            f_hat,
        }
    }
}

/// One recorded instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vector,
    pub x_hat: Vector,
    pub w: Vector,
    pub phi: Vector,
    pub xi_hat: Vector,
    /// True filter-bank regressor driven by the actual disturbance.
    pub xi: Vector,
    pub psi_hat: Vector,
    pub u: Vector,
    pub y: Vector,
    pub f: Vector,
    pub f_hat: Vector,
    pub ex_norm: f64,
    pub exi_norm: f64,
    pub ybar_norm: f64,
    /// Smallest eigenvalue of `Ω` (memory regressor extension only).
    pub omega_min_eig: Option<f64>,
}

#[derive(Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<Sample>,
    /// Full joint state at the last integrated instant.
    pub terminal_state: Vector,
}

impl std::fmt::Debug for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let span = match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => format!("[{}, {}]", a.t, b.t),
            _ => "[]".into(),
        };
        f.debug_struct("Trace").field("samples", &self.samples.len()).field("span", &span).finish_non_exhaustive()
    }
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn y_norms(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y.norm()).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> Option<&Sample> {
        self.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub settle_eps: f64,
    /// `None` when `‖y‖` is still above the threshold at the end of the run.
    pub settling_time: Option<f64>,
    pub terminal_y_norm: f64,
    pub terminal_ex_norm: f64,
    pub peak_u_norm: f64,
}

impl Metrics {
    pub fn from_trace(trace: &Trace, eps: f64) -> Metrics {
        let last = trace.last();
        Metrics {
            settle_eps: eps,
            settling_time: settling_time(trace, eps),
            terminal_y_norm: last.map_or(f64::NAN, |s| s.y.norm()),
            terminal_ex_norm: last.map_or(f64::NAN, |s| s.ex_norm),
            peak_u_norm: trace.samples.iter().map(|s| s.u.norm()).fold(0.0, f64::max),
        }
    }
}

/// Earliest recorded time after which every sample satisfies `‖y‖ ≤ eps`.
pub fn settling_time(trace: &Trace, eps: f64) -> Option<f64> {
    settling_time_of(&trace.times(), &trace.y_norms(), eps)
}

pub fn settling_time_of(times: &[f64], norms: &[f64], eps: f64) -> Option<f64> {
    match norms.iter().rposition(|&v| v > eps) {
        None => times.first().copied(),
        Some(k) if k + 1 == norms.len() => None,
        Some(k) => Some(times[k + 1]),
    }
}

/// `true` when `a` settles strictly before `b` (not settled counts as never).
pub fn settles_before(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

/// Integrates a scenario whose synthesis has already been carried out.
pub fn simulate(cfg: &ScenarioConfig, syn: &Synthesis) -> Result<Trace> {
    let law = cfg.law();
    let mre = matches!(law, Some(AdaptLaw::Mre { .. }));
    let layout = Layout::new(cfg.plant.n(), cfg.plant.n_in(), syn.bank.q(), mre);
    let sys = ClosedLoop { cfg, syn, layout, law };

    let h = cfg.step;
    let steps = (cfg.duration / h).round() as usize;
    let mut s = sys.initial_state();
    let mut samples = vec![sys.sample(0.0, &s)];
    for k in 0..steps {
        let t = k as f64 * h;
        s = rk4_step(|tt, v| sys.derivative(tt, v), t, &s, h)?;
        sys.symmetrize(&mut s);
        let t_next = (k + 1) as f64 * h;
        if s.norm() > DIVERGENCE_LIMIT {
            samples.push(sys.sample(t_next, &s));
            return Err(Error::Diverged {
                t: t_next,
                limit: DIVERGENCE_LIMIT,
                partial: Box::new(Trace { samples, terminal_state: s }),
            });
        }
        if (k + 1) % cfg.stride == 0 {
            samples.push(sys.sample(t_next, &s));
        }
    }
    Ok(Trace { samples, terminal_state: s })
}

/// Synthesis followed by simulation.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Trace, Metrics)> {
    let syn = synthesize_scenario(cfg)?;
    let trace = simulate(cfg, &syn)?;
    let metrics = Metrics::from_trace(&trace, cfg.settle_eps);
    Ok((trace, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_constant() {
        let y = Vector::from_vec(vec![3.0, -1.0]);
        let out = rk4_step(|_, v| Vector::zeros(v.len()), 0.0, &y, 0.1).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn rk4_exponential() {
        let mut y = Vector::from_element(1, 1.0);
        for k in 0..1000 {
            y = rk4_step(|_, v| -v, k as f64 * 1e-3, &y, 1e-3).unwrap();
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rk4_rotation() {
        // ẋ = [[0, 2], [−2, 0]]x from [0, 5]: x = [5 sin 2t, 5 cos 2t]
        let a = Matrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let mut y = Vector::from_vec(vec![0.0, 5.0]);
        let h = 1e-3;
        for k in 0..1000 {
            y = rk4_step(|_, v| &a * v, k as f64 * h, &y, h).unwrap();
        }
        assert!((y[0] - 5.0 * 2f64.sin()).abs() < 1e-8);
        assert!((y[1] - 5.0 * 2f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn rk4_non_finite() {
        let y = Vector::from_element(1, 1.0);
        let err = rk4_step(|_, _| Vector::from_element(1, f64::NAN), 0.5, &y, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn settling_examples() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        assert_eq!(settling_time_of(&times, &vec![0.0; times.len()], 0.05), Some(0.0));
        assert_eq!(settling_time_of(&times, &vec![1.0; times.len()], 0.05), None);
        let h = 1e-3;
        let times: Vec<f64> = (0..=6000).map(|k| k as f64 * h).collect();
        let norms: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let ts = settling_time_of(&times, &norms, (-3.0f64).exp()).unwrap();
        assert!((ts - 3.0).abs() <= h + 1e-12, "{ts}");
    }

    #[test]
    fn settle_ordering() {
        assert!(settles_before(Some(1.0), Some(2.0)));
        assert!(settles_before(Some(50.0), None));
        assert!(!settles_before(None, None));
        assert!(!settles_before(Some(2.0), Some(2.0)));
    }
}
