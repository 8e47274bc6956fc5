//! Time-dependent Hermitian Hamiltonians with first and second time derivatives.
//!
//! Units: hbar = 1, time in seconds, energies in rad/s.

mod profile;
mod tabulated;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use profile::Profile;
pub use tabulated::{CubicSpline, Tabulated};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_deviation, CMat, I};

/// Relative tolerance on `||H - H^dagger||`.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// `H(t) = (omega0/2) [[cos theta, sin theta e^{-i phi}], [sin theta e^{i phi}, -cos theta]]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams {
    pub omega0: Profile,
    pub theta: Profile,
    pub phi: Profile,
}

/// Two-level model with constant `omega0`, `theta` and a uniformly rotating azimuth `phi = omega t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchwingerParams {
    pub omega0: f64,
    pub theta: f64,
    pub omega: f64,
}

/// Real cycling model `H = (1/2) [[delta, Omega], [Omega, -delta]]` with `delta = alpha cos(varpi t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclingLzParams {
    pub alpha: f64,
    pub varpi: f64,
    /// coupling `Omega`
    pub coupling: f64,
}

/// `H(t) = H_in (1 - t/T) + H_fin t/T` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatingParams {
    pub initial: CMat,
    pub last: CMat,
    pub total_time: f64,
}

/// One `f(t) * M` contribution of a [`Family::Terms`] model.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub profile: Profile,
    pub matrix: CMat,
}

/// Parametrised Hamiltonian families.
#[derive(Debug, Clone)]
pub enum Family {
    TwoLevel(TwoLevelParams),
    Schwinger(SchwingerParams),
    CyclingLz(CyclingLzParams),
    Interpolating(InterpolatingParams),
    /// `H(t) = sum_k f_k(t) M_k`
    Terms(Vec<Term>),
    Tabulated(Arc<Tabulated>),
    /// `H_eps(t) = H(eps t)`
    Rescaled { inner: Box<Family>, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    /// fourth-order central differences with the given step (seconds)
    FiniteDifference { step: f64 },
}

/// Angles `(omega0, theta, phi)` of a two-level Hamiltonian with their first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelJet {
    pub omega0: [f64; 3],
    pub theta: [f64; 3],
    pub phi: [f64; 3],
}

/// Families that can be written in the spin form `(omega0/2) n(theta, phi) . sigma`.
pub trait TwoLevelForm {
    fn jet(&self, t: f64) -> TwoLevelJet;
}

impl TwoLevelForm for TwoLevelParams {
    fn jet(&self, t: f64) -> TwoLevelJet {
        TwoLevelJet { omega0: self.omega0.jet(t), theta: self.theta.jet(t), phi: self.phi.jet(t) }
    }
}

impl TwoLevelForm for SchwingerParams {
    fn jet(&self, t: f64) -> TwoLevelJet {
        TwoLevelJet { omega0: [self.omega0, 0.0, 0.0], theta: [self.theta, 0.0, 0.0], phi: [self.omega * t, self.omega, 0.0] }
    }
}

impl TwoLevelForm for CyclingLzParams {
    fn jet(&self, t: f64) -> TwoLevelJet {
        let [d, d1, d2] = self.detuning(t);
        let o = self.coupling;
        let r2 = d * d + o * o;
        let r = r2.sqrt();
        let r1 = d * d1 / r;
        let r_2 = (d1 * d1 + d * d2) / r - (d * d1).powi(2) / (r2 * r);
        let th = o.atan2(d);
        let th1 = -o * d1 / r2;
        let th2 = -o * d2 / r2 + 2.0 * o * d1 * d * d1 / (r2 * r2);
        TwoLevelJet { omega0: [r, r1, r_2], theta: [th, th1, th2], phi: [0.0, 0.0, 0.0] }
    }
}

impl SchwingerParams {
    pub fn to_two_level(&self) -> TwoLevelParams {
        TwoLevelParams {
            omega0: Profile::constant(self.omega0),
            theta: Profile::constant(self.theta),
            phi: Profile::linear(0.0, self.omega),
        }
    }

    /// Detuning `delta' = omega0 - omega cos(theta)` of the adiabatic frame.
    pub fn frame_detuning(&self) -> f64 {
        self.omega0 - self.omega * self.theta.cos()
    }

    /// Coupling magnitude `|Omega'| = |omega sin(theta)|` of the adiabatic frame.
    pub fn frame_coupling(&self) -> f64 {
        (self.omega * self.theta.sin()).abs()
    }

    /// Generalised Rabi frequency `sqrt(|Omega'|^2 + delta'^2)`.
    pub fn rabi_frequency(&self) -> f64 {
        self.frame_coupling().hypot(self.frame_detuning())
    }
}

impl CyclingLzParams {
    /// `(delta, delta', delta'')`
    pub fn detuning(&self, t: f64) -> [f64; 3] {
        let arg = self.varpi * t;
        [self.alpha * arg.cos(), -self.alpha * self.varpi * arg.sin(), -self.alpha * self.varpi * self.varpi * arg.cos()]
    }

    /// Duration of a single passage `T_1 = pi / varpi`.
    pub fn half_period(&self) -> f64 {
        std::f64::consts::PI / self.varpi
    }

    /// `Omega << alpha`
    pub fn weak_coupling(&self) -> bool {
        self.coupling < 0.5 * self.alpha
    }

    /// `alpha >> varpi`
    pub fn large_amplitude(&self) -> bool {
        self.alpha > 5.0 * self.varpi
    }
}

fn two_level_matrix(jet: &TwoLevelJet, order: u8) -> CMat {
    let [f, f1, f2] = jet.omega0;
    let [g, g1, g2] = jet.theta;
    let [p, p1, p2] = jet.phi;
    let (sg, cg) = g.sin_cos();
    let (a, u) = match order {
        0 => (f * cg, f * sg),
        1 => (f1 * cg - f * g1 * sg, f1 * sg + f * g1 * cg),
        _ => (
            f2 * cg - 2.0 * f1 * g1 * sg - f * g2 * sg - f * g1 * g1 * cg,
            f2 * sg + 2.0 * f1 * g1 * cg + f * g2 * cg - f * g1 * g1 * sg,
        ),
    };
    let rot = C64::from_polar(1.0, -p);
    // b = u e^{-i phi} and its derivatives
    let b = match order {
        0 => c(u) * rot,
        1 => {
            let u0 = f * sg;
            (c(u) - I * p1 * u0) * rot
        }
        _ => {
            let u0 = f * sg;
            let u1 = f1 * sg + f * g1 * cg;
            (c(u) - I * 2.0 * p1 * u1 - I * p2 * u0 - c(p1 * p1 * u0)) * rot
        }
    };
    CMat::from_row_slice(2, 2, &[c(0.5 * a), 0.5 * b, 0.5 * b.conj(), c(-0.5 * a)])
}

impl Family {
    pub fn dimension(&self) -> usize {
        match self {
            Family::TwoLevel(_) | Family::Schwinger(_) | Family::CyclingLz(_) => 2,
            Family::Interpolating(p) => p.initial.nrows(),
            Family::Terms(terms) => terms.first().map_or(0, |t| t.matrix.nrows()),
            Family::Tabulated(t) => t.dimension(),
            Family::Rescaled { inner, .. } => inner.dimension(),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Family::Interpolating(p) => (0.0, p.total_time),
            Family::Tabulated(t) => t.domain(),
            Family::Rescaled { inner, epsilon } => {
                let (a, b) = inner.domain();
                (a / epsilon, b / epsilon)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::TwoLevel(_) => "two_level",
            Family::Schwinger(_) => "schwinger",
            Family::CyclingLz(_) => "cycling_lz",
            Family::Interpolating(_) => "interpolating",
            Family::Terms(_) => "terms",
            Family::Tabulated(_) => "tabulated",
            Family::Rescaled { .. } => "rescaled",
        }
    }

    /// `d^order H / dt^order` from the closed form of the family.
    fn analytic(&self, t: f64, order: u8) -> CMat {
        match self {
            Family::TwoLevel(p) => two_level_matrix(&p.jet(t), order),
            Family::Schwinger(p) => two_level_matrix(&p.jet(t), order),
            Family::CyclingLz(p) => {
                let d = p.detuning(t)[order as usize];
                let o = if order == 0 { p.coupling } else { 0.0 };
                CMat::from_row_slice(2, 2, &[c(0.5 * d), c(0.5 * o), c(0.5 * o), c(-0.5 * d)])
            }
            Family::Interpolating(p) => {
                let s = t / p.total_time;
                match order {
                    0 => &p.initial * c(1.0 - s) + &p.last * c(s),
                    1 => (&p.last - &p.initial) * c(1.0 / p.total_time),
                    _ => CMat::zeros(p.initial.nrows(), p.initial.ncols()),
                }
            }
            Family::Terms(terms) => {
                let n = self.dimension();
                terms.iter().fold(CMat::zeros(n, n), |acc, term| acc + &term.matrix * c(term.profile.derivative(t, order)))
            }
            Family::Tabulated(tab) => tab.eval(t, order),
            Family::Rescaled { inner, epsilon } => inner.analytic(epsilon * t, order) * c(epsilon.powi(order as i32)),
        }
    }

    /// Spin-form angles when the family is a two-level model given in that form.
    pub fn two_level_jet(&self, t: f64) -> Option<TwoLevelJet> {
        match self {
            Family::TwoLevel(p) => Some(p.jet(t)),
            Family::Schwinger(p) => Some(p.jet(t)),
            Family::CyclingLz(p) => Some(p.jet(t)),
            _ => None,
        }
    }
}

/// A time-dependent Hermitian Hamiltonian together with its derivative policy.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    family: Family,
    derivative_mode: DerivativeMode,
}

impl HamiltonianModel {
    pub fn new(family: Family) -> Result<Self> {
        let model = HamiltonianModel { family, derivative_mode: DerivativeMode::Analytic };
        model.validate()?;
        Ok(model)
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.family.dimension();
        if n < 2 {
            return Err(Error::Config(format!("model dimension must be at least 2, got {n}")));
        }
        match &self.family {
            Family::CyclingLz(p) if !(p.alpha > 0.0 && p.varpi > 0.0 && p.coupling > 0.0) => {
                Err(Error::Config("cycling model needs alpha, varpi, Omega > 0".into()))
            }
            Family::Interpolating(p) => {
                if !(p.total_time > 0.0) {
                    return Err(Error::Config("interpolating model needs T > 0".into()));
                }
                if p.initial.shape() != p.last.shape() || p.initial.nrows() != p.initial.ncols() {
                    return Err(Error::Config("interpolating endpoints must be square and of equal size".into()));
                }
                check_hermitian(&p.initial, 0.0)?;
                check_hermitian(&p.last, p.total_time)
            }
            Family::Terms(terms) => {
                for term in terms {
                    if term.matrix.shape() != (n, n) {
                        return Err(Error::Config("all term matrices must share one square shape".into()));
                    }
                    check_hermitian(&term.matrix, f64::NAN)?;
                }
                Ok(())
            }
            Family::Rescaled { epsilon, .. } if !(*epsilon > 0.0) => Err(Error::Config("rescaling needs epsilon > 0".into())),
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.family.dimension()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.family.domain()
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivative_mode
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let (start, end) = self.domain();
        let slack = 1e-12 * (end - start).abs().min(1.0).max(f64::EPSILON);
        if t < start - slack || t > end + slack || t.is_nan() {
            return Err(Error::Domain { t, start, end });
        }
        Ok(())
    }

    fn clamp(&self, t: f64) -> f64 {
        let (start, end) = self.domain();
        t.clamp(start, end)
    }

    /// `H(t)`
    pub fn eval(&self, t: f64) -> Result<CMat> {
        self.check_domain(t)?;
        let h = self.family.analytic(self.clamp(t), 0);
        check_hermitian(&h, t)?;
        Ok(h)
    }

    /// `dH/dt` (`order = 1`) or `d^2H/dt^2` (`order = 2`).
    pub fn eval_derivative(&self, t: f64, order: u8) -> Result<CMat> {
        assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
        self.check_domain(t)?;
        match self.derivative_mode {
            DerivativeMode::Analytic => Ok(self.family.analytic(self.clamp(t), order)),
            DerivativeMode::FiniteDifference { step } => {
                let h = step;
                let (start, end) = self.domain();
                if t - 2.0 * h < start || t + 2.0 * h > end {
                    return Err(Error::Domain { t, start: start + 2.0 * h, end: end - 2.0 * h });
                }
                let f = |s: f64| self.family.analytic(s, 0);
                let (m2, m1, p1, p2) = (f(t - 2.0 * h), f(t - h), f(t + h), f(t + 2.0 * h));
                Ok(if order == 1 {
                    (m2 - m1 * c(8.0) + p1 * c(8.0) - p2) * c(1.0 / (12.0 * h))
                } else {
                    (-m2 + m1 * c(16.0) - f(t) * c(30.0) + p1 * c(16.0) - p2) * c(1.0 / (12.0 * h * h))
                })
            }
        }
    }

    /// `H(eps t)` on the stretched domain.
    pub fn rescaled(&self, epsilon: f64) -> Result<HamiltonianModel> {
        if !(epsilon > 0.0) {
            return Err(Error::Config("rescaling needs epsilon > 0".into()));
        }
        if epsilon == 1.0 {
            return Ok(self.clone());
        }
        let mode = match self.derivative_mode {
            DerivativeMode::FiniteDifference { step } => DerivativeMode::FiniteDifference { step: step / epsilon },
            m => m,
        };
        Ok(HamiltonianModel {
            family: Family::Rescaled { inner: Box::new(self.family.clone()), epsilon },
            derivative_mode: mode,
        })
    }
}

fn check_hermitian(h: &CMat, t: f64) -> Result<()> {
    let tolerance = HERMITICITY_TOL * h.norm().max(f64::MIN_POSITIVE);
    let deviation = hermiticity_deviation(h);
    if deviation > tolerance {
        return Err(Error::Hermiticity { t, deviation, tolerance });
    }
    Ok(())
}

/// Default finite-difference step for a time window of the given length.
pub fn default_fd_step(window: f64) -> f64 {
    1e-5 * window
}

/// Random Hermitian matrix with entries of order `scale`.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMat {
    let mut m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m = (&m + m.adjoint()) * c(0.5 * scale);
    for i in 0..n {
        m[(i, i)].im = 0.0;
    }
    m
}

/// A smooth, well-gapped random `n`-level model:
/// `H(t) = D + A_0 + sin(nu_1 t + phi_1) A_1 + cos(nu_2 t) A_2 + (t / 10)^2 A_3`
/// with `D = diag(0, spacing, 2 spacing, ...)` and small random Hermitian `A_k`.
pub fn random_smooth_model(n: usize, seed: u64) -> Result<HamiltonianModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 3.0;
    let diag = CMat::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| c(spacing * i as f64)));
    let nu1 = rng.gen_range(0.3..1.2);
    let phi1 = rng.gen_range(0.0..std::f64::consts::TAU);
    let nu2 = rng.gen_range(0.2..0.8);
    let terms = vec![
        Term { profile: Profile::constant(1.0), matrix: diag + random_hermitian(&mut rng, n, 0.3) },
        Term {
            profile: Profile::Cosine { offset: 0.0, amplitude: 1.0, frequency: nu1, phase: phi1 - std::f64::consts::FRAC_PI_2 },
            matrix: random_hermitian(&mut rng, n, 0.4),
        },
        Term {
            profile: Profile::Cosine { offset: 0.0, amplitude: 1.0, frequency: nu2, phase: 0.0 },
            matrix: random_hermitian(&mut rng, n, 0.4),
        },
        Term { profile: Profile::Polynomial { coefficients: vec![0.0, 0.0, 0.01] }, matrix: random_hermitian(&mut rng, n, 0.3) },
    ];
    HamiltonianModel::new(Family::Terms(terms))
}
