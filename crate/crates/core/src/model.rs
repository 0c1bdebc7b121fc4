//! Plant, true disturbance generator and the designer's internal-model
//! filter bank.

use crate::dobs;
use crate::error::{dim_err, Assumption, Error, Result};
use crate::numerics::{
    self, block_diag, eigenvalues, is_controllable, is_observable, rank, Matrix, Vector, EIG_TOL, RANK_TOL,
};

/// Dimension record of a configured problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub n_dist: usize,
    pub q_i: Vec<usize>,
    pub q: usize,
}

impl Dims {
    pub fn new(n: usize, n_in: usize, n_out: usize, n_dist: usize, q_i: Vec<usize>) -> Result<Self> {
        if n == 0 || n_in == 0 || n_out == 0 || n_dist == 0 || q_i.iter().any(|&q| q == 0) {
            return Err(Error::Config("all dimensions must be strictly positive".into()));
        }
        if n_in > n || n_out > n || n_dist > n {
            return Err(Error::Config(format!(
                "input/output/disturbance counts ({n_in}, {n_out}, {n_dist}) must not exceed the state dimension {n}"
            )));
        }
        if q_i.len() != n_dist {
            return Err(dim_err("Dims: filter orders", n_dist, q_i.len()));
        }
        let q = q_i.iter().sum();
        Ok(Dims { n, n_in, n_out, n_dist, q_i, q })
    }
}

/// `ẋ = Ax + Bu + Ef`, `y = Cx`, with `C` stored as the `n_out × n` map.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    e: Matrix,
    x0: Vector,
}

impl LtiPlant {
    /// Validates shapes, stability, rank and controllability/observability.
    pub fn new(a: Matrix, b: Matrix, c: Matrix, e: Matrix, x0: Vector) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(dim_err("plant A", "non-empty square", format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(dim_err("plant B", format!("{n}xm"), format!("{}x{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(dim_err("plant C", format!("px{n}"), format!("{}x{}", c.nrows(), c.ncols())));
        }
        if e.nrows() != n || e.ncols() == 0 {
            return Err(dim_err("plant E", format!("{n}xk"), format!("{}x{}", e.nrows(), e.ncols())));
        }
        if x0.len() != n {
            return Err(dim_err("plant x0", n, x0.len()));
        }
        let finite = [&a, &b, &c, &e].iter().all(|m| m.iter().all(|v| v.is_finite())) && x0.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("plant matrices must be finite".into()));
        }

        let spec = eigenvalues(&a)?;
        if spec.max_real() >= -EIG_TOL {
            return Err(Error::Assumption {
                assumption: Assumption::StableControllableObservable,
                detail: format!("A is not Hurwitz (max Re λ = {:.6e})", spec.max_real()),
            });
        }
        if rank(&b, RANK_TOL) != b.ncols() {
            return Err(Error::Assumption {
                assumption: Assumption::FullRank,
                detail: "B does not have full column rank".into(),
            });
        }
        if rank(&c, RANK_TOL) != c.nrows() {
            return Err(Error::Assumption {
                assumption: Assumption::FullRank,
                detail: "C does not have full row rank".into(),
            });
        }
        if !is_controllable(&a, &b, RANK_TOL) {
            return Err(Error::Assumption {
                assumption: Assumption::StableControllableObservable,
                detail: "(A, B) is not controllable".into(),
            });
        }
        if !is_observable(&c, &a, RANK_TOL) {
            return Err(Error::Assumption {
                assumption: Assumption::StableControllableObservable,
                detail: "(C, A) is not observable".into(),
            });
        }
        Ok(LtiPlant { a, b, c, e, x0 })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn e(&self) -> &Matrix {
        &self.e
    }
    pub fn x0(&self) -> &Vector {
        &self.x0
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_in(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_out(&self) -> usize {
        self.c.nrows()
    }
    pub fn n_dist(&self) -> usize {
        self.e.ncols()
    }

    /// Same plant with a different disturbance map (used by tests and the
    /// rank-factorization path).
    pub fn with_e(&self, e: Matrix) -> Result<Self> {
        LtiPlant::new(self.a.clone(), self.b.clone(), self.c.clone(), e, self.x0.clone())
    }
}

/// `R·sin(ωt + φ)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicComponent {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// One scalar disturbance `Σ Rⱼ sin(ωⱼt + φⱼ) + R₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceChannel {
    components: Vec<HarmonicComponent>,
    bias: f64,
}

impl DisturbanceChannel {
    pub fn new(components: Vec<HarmonicComponent>, bias: f64) -> Result<Self> {
        for (i, c) in components.iter().enumerate() {
            if !(c.frequency > 0.0) || !c.frequency.is_finite() {
                return Err(Error::Channel(format!("component {i}: frequency must be positive, got {}", c.frequency)));
            }
            if !(c.amplitude >= 0.0) || !c.amplitude.is_finite() || !c.phase.is_finite() {
                return Err(Error::Channel(format!("component {i}: amplitude must be finite and non-negative")));
            }
            if components[..i].iter().any(|o| (o.frequency - c.frequency).abs() <= 1e-12 * c.frequency) {
                return Err(Error::Assumption {
                    assumption: Assumption::NeutralGenerator,
                    detail: format!("duplicate frequency {} makes the generator unobservable", c.frequency),
                });
            }
        }
        if !bias.is_finite() {
            return Err(Error::Channel("bias must be finite".into()));
        }
        Ok(DisturbanceChannel { components, bias })
    }

    pub fn components(&self) -> &[HarmonicComponent] {
        &self.components
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn check_harmonic_bound(&self, max_harmonics: usize) -> Result<()> {
        if self.components.len() > max_harmonics {
            return Err(Error::Assumption {
                assumption: Assumption::KnownHarmonicBound,
                detail: format!("{} harmonics exceed the declared maximum {max_harmonics}", self.components.len()),
            });
        }
        Ok(())
    }

    /// Order of the minimal generator: two states per harmonic plus one for a bias.
    pub fn generator_order(&self) -> usize {
        2 * self.components.len() + usize::from(self.bias != 0.0)
    }

    /// Monic `Π (s² + ωⱼ²) · s^[bias ≠ 0]`, lowest degree first.
    pub fn characteristic_polynomial(&self) -> Vec<f64> {
        let mut p = if self.bias != 0.0 { vec![0.0, 1.0] } else { vec![1.0] };
        for c in &self.components {
            let w2 = c.frequency * c.frequency;
            let mut next = vec![0.0; p.len() + 2];
            for (k, &pk) in p.iter().enumerate() {
                next[k] += w2 * pk;
                next[k + 2] += pk;
            }
            p = next;
        }
        p
    }
}

pub fn sample_disturbance(channel: &DisturbanceChannel, t: f64) -> f64 {
    channel
        .components
        .iter()
        .map(|c| c.amplitude * (c.frequency * t + c.phase).sin())
        .sum::<f64>()
        + channel.bias
}

/// Autonomous generator `ż = Γz`, `f = hᵀz`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoGenerator {
    gamma: Matrix,
    h: Vector,
    z0: Vector,
    // One rotation block per entry; a trailing scalar zero block when biased.
    freqs: Vec<f64>,
    biased: bool,
}

impl ExoGenerator {
    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }
    pub fn h(&self) -> &Vector {
        &self.h
    }
    pub fn z0(&self) -> &Vector {
        &self.z0
    }
    pub fn order(&self) -> usize {
        self.gamma.nrows()
    }
    pub fn has_bias(&self) -> bool {
        self.biased
    }

    /// Exact `e^{Γt}·z₀` from the rotation blocks.
    pub fn state_at(&self, t: f64) -> Vector {
        let mut z = self.z0.clone();
        for (k, &w) in self.freqs.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            let (a, b) = (self.z0[2 * k], self.z0[2 * k + 1]);
            z[2 * k] = a * c + b * s;
            z[2 * k + 1] = -a * s + b * c;
        }
        z
    }

    pub fn output_at(&self, t: f64) -> f64 {
        self.h.dot(&self.state_at(t))
    }

    /// Every eigenvalue on the imaginary axis and `(Γ, hᵀ)` observable.
    pub fn validate(&self) -> Result<()> {
        let spec = eigenvalues(&self.gamma)?;
        let worst = spec.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        if worst > EIG_TOL {
            return Err(Error::Assumption {
                assumption: Assumption::NeutralGenerator,
                detail: format!("generator eigenvalue off the imaginary axis (|Re λ| = {worst:.3e})"),
            });
        }
        if !is_observable(&Matrix::from_row_slice(1, self.h.len(), self.h.as_slice()), &self.gamma, RANK_TOL) {
            return Err(Error::Assumption {
                assumption: Assumption::NeutralGenerator,
                detail: "(Γ, hᵀ) is not observable".into(),
            });
        }
        Ok(())
    }
}

/// Block-diagonal rotation realization of a disturbance channel.
pub fn build_exo_generator(channel: &DisturbanceChannel) -> Result<ExoGenerator> {
    let order = channel.generator_order();
    if order == 0 {
        return Err(Error::DegenerateGenerator);
    }
    let mut gamma = Matrix::zeros(order, order);
    let mut h = Vector::zeros(order);
    let mut z0 = Vector::zeros(order);
    let mut freqs = Vec::with_capacity(channel.components.len());
    for (k, c) in channel.components.iter().enumerate() {
        let i = 2 * k;
        gamma[(i, i + 1)] = c.frequency;
        gamma[(i + 1, i)] = -c.frequency;
        h[i] = 1.0;
        z0[i] = c.amplitude * c.phase.sin();
        z0[i + 1] = c.amplitude * c.phase.cos();
        freqs.push(c.frequency);
    }
    let biased = channel.bias != 0.0;
    if biased {
        h[order - 1] = 1.0;
        z0[order - 1] = channel.bias;
    }
    let gen = ExoGenerator { gamma, h, z0, freqs, biased };
    gen.validate()?;
    Ok(gen)
}

/// Designer filter `(Gᵢ, Lᵢ)` for one disturbance channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    g: Matrix,
    l: Vector,
}

impl FilterPair {
    pub fn new(g: Matrix, l: Vector) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 || l.len() != g.nrows() {
            return Err(dim_err("filter pair", "square G with matching L", format!("G {:?}, L {}", g.shape(), l.len())));
        }
        let spec = eigenvalues(&g)?;
        if spec.max_real() >= -EIG_TOL {
            return Err(Error::NotHurwitz { what: "filter G", max_re: spec.max_real() });
        }
        let lm = Matrix::from_column_slice(l.len(), 1, l.as_slice());
        if !is_controllable(&g, &lm, RANK_TOL) {
            return Err(Error::Uncontrollable { what: "G, L" });
        }
        Ok(FilterPair { g, l })
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }
    pub fn l(&self) -> &Vector {
        &self.l
    }
    pub fn order(&self) -> usize {
        self.g.nrows()
    }
}

/// Stacked filter bank together with the disturbance-observer gain `Q_Σ`.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pairs: Vec<FilterPair>,
    g_sigma: Matrix,
    l_sigma: Matrix,
    l0: Vec<Matrix>,
    q_sigma: Matrix,
    offsets: Vec<usize>,
    // cached products for the observer right-hand side
    gq_minus_qa: Matrix,
    qb: Matrix,
}

impl FilterBank {
    pub fn pairs(&self) -> &[FilterPair] {
        &self.pairs
    }
    pub fn g_sigma(&self) -> &Matrix {
        &self.g_sigma
    }
    pub fn l_sigma(&self) -> &Matrix {
        &self.l_sigma
    }
    pub fn l0(&self) -> &[Matrix] {
        &self.l0
    }
    pub fn q_sigma(&self) -> &Matrix {
        &self.q_sigma
    }
    /// `Qᵢ`, the rows of `Q_Σ` belonging to channel `i`.
    pub fn q_block(&self, i: usize) -> Matrix {
        self.q_sigma.rows(self.offsets[i], self.pairs[i].order()).into_owned()
    }
    pub fn q(&self) -> usize {
        self.g_sigma.nrows()
    }
    pub fn orders(&self) -> Vec<usize> {
        self.pairs.iter().map(FilterPair::order).collect()
    }
    /// Start row of each channel block.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
    pub(crate) fn gq_minus_qa(&self) -> &Matrix {
        &self.gq_minus_qa
    }
    pub(crate) fn qb(&self) -> &Matrix {
        &self.qb
    }
}

pub fn build_filter_bank(pairs: Vec<FilterPair>, plant: &LtiPlant) -> Result<FilterBank> {
    let n_dist = plant.n_dist();
    if pairs.len() != n_dist {
        return Err(dim_err("filter bank: one pair per disturbance channel", n_dist, pairs.len()));
    }
    if rank(plant.e(), RANK_TOL) != n_dist {
        return Err(Error::Structure(
            "E must have full column rank to build the disturbance observer; factor it with split_e first".into(),
        ));
    }
    let g_sigma = block_diag(&pairs.iter().map(|p| p.g.clone()).collect::<Vec<_>>());
    let l0 = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| dobs::build_l0(i, &p.l, n_dist))
        .collect::<Result<Vec<_>>>()?;
    let q = g_sigma.nrows();
    let mut l_sigma = Matrix::zeros(q, n_dist);
    let mut q_sigma = Matrix::zeros(q, plant.n());
    let mut offsets = Vec::with_capacity(pairs.len());
    let mut row = 0;
    for (p, l0i) in pairs.iter().zip(&l0) {
        offsets.push(row);
        l_sigma.view_mut((row, 0), l0i.shape()).copy_from(l0i);
        let qi = dobs::solve_q(plant.e(), l0i)?;
        q_sigma.view_mut((row, 0), qi.shape()).copy_from(&qi);
        row += p.order();
    }
    let resid = (&q_sigma * plant.e() - &l_sigma).amax();
    if resid > 1e-10 {
        return Err(Error::Structure(format!("Q_Σ·E deviates from L_Σ by {resid:.3e}")));
    }
    let gq_minus_qa = &g_sigma * &q_sigma - &q_sigma * plant.a();
    let qb = &q_sigma * plant.b();
    Ok(FilterBank { pairs, g_sigma, l_sigma, l0, q_sigma, offsets, gq_minus_qa, qb })
}

/// `numerics::is_hurwitz` specialised to the stacked filter matrix.
pub fn bank_is_hurwitz(bank: &FilterBank) -> Result<bool> {
    numerics::is_hurwitz(bank.g_sigma(), EIG_TOL)
}
