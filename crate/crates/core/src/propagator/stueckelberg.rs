//! Multi-passage Landau-Zener on the cycling model and the Stueckelberg prediction.

use serde::Serialize;

use super::{evolve_unitary, StepControl};
use crate::error::{Error, Result};
use crate::hamiltonian::{CyclingLzParams, Family, HamiltonianModel};
use crate::linalg::{eigh, CVec};
use crate::quadrature::TimeGrid;

/// `p_1 = exp(-(pi/2) Omega^2 / (alpha varpi))` and the phase `Theta` entering `p_M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StueckelbergPrediction {
    pub p1: f64,
    pub theta: f64,
}

impl StueckelbergPrediction {
    /// Landau-Zener `p_1` with the estimate `Theta = alpha / varpi`.
    pub fn landau_zener(p: &CyclingLzParams) -> Self {
        Self::with_theta(p, p.alpha / p.varpi)
    }

    pub fn with_theta(p: &CyclingLzParams, theta: f64) -> Self {
        let p1 = (-0.5 * std::f64::consts::PI * p.coupling * p.coupling / (p.alpha * p.varpi)).exp();
        StueckelbergPrediction { p1, theta }
    }

    pub fn p_m(&self, m: usize) -> f64 {
        multipassage_probability(self.p1, self.theta, m)
    }
}

/// `p_1 sin^2(M Theta) / cos^2(Theta)`, continued to `M^2 p_1` at `cos(Theta) = 0`.
pub fn multipassage_probability(p1: f64, theta: f64, m: usize) -> f64 {
    let m = m as f64;
    let co = theta.cos();
    if co.abs() < 1e-8 {
        return p1 * m * m;
    }
    p1 * (m * theta).sin().powi(2) / (co * co)
}

/// `Theta` in `[0, pi/2]` from `p_2 = 4 p_1 sin^2(Theta)`. The formula is even in `Theta`
/// and symmetric under `Theta -> pi - Theta`, so this fixes every `p_M`.
pub fn calibrate_theta(p1: f64, p2: f64) -> f64 {
    (p2 / (4.0 * p1)).clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LzMultipassage {
    pub passages: usize,
    pub prediction: StueckelbergPrediction,
    /// `p_M` from the prediction
    pub predicted: f64,
    /// `1 - |<n(M T_1)|Psi(M T_1)>|^2` from exact propagation
    pub measured: f64,
    /// `Omega << alpha`
    pub weak_coupling: bool,
    /// `alpha >> varpi`
    pub large_amplitude: bool,
}

/// Measured non-adiabatic probability after each passage count in `passages`, starting in
/// the lower adiabatic level at `t = 0`. One propagation serves the whole list.
pub fn transition_probabilities(p: &CyclingLzParams, passages: &[usize], control: StepControl) -> Result<Vec<f64>> {
    let Some(&most) = passages.iter().max() else {
        return Ok(Vec::new());
    };
    if most == 0 {
        return Err(Error::Config("passage count must be at least 1".into()));
    }
    let model = HamiltonianModel::new(Family::CyclingLz(*p))?;
    let per = 4;
    let grid = TimeGrid::new(0.0, most as f64 * p.half_period(), per * most + 1)?;
    let path = evolve_unitary(&model, &grid, control)?;
    let lower = |t: f64| -> Result<CVec> {
        let (_, vectors) = eigh(&model.eval(t)?);
        Ok(vectors.column(0).into_owned())
    };
    let start = lower(0.0)?;
    passages
        .iter()
        .map(|&m| {
            let k = per * m;
            let end = lower(grid.time(k))?;
            let f = (end.adjoint() * &path.unitaries[k] * &start)[(0, 0)].norm();
            Ok((1.0 - f * f).max(0.0))
        })
        .collect()
}

/// `M` (even) passages over `[0, M T_1]`. `theta` overrides the estimate `alpha / varpi`.
pub fn lz_multipassage(p: &CyclingLzParams, m: usize, theta: Option<f64>, control: StepControl) -> Result<LzMultipassage> {
    if m == 0 || m % 2 == 1 {
        return Err(Error::Config(format!("multi-passage needs an even number of passages, got {m}")));
    }
    let prediction = match theta {
        Some(th) => StueckelbergPrediction::with_theta(p, th),
        None => StueckelbergPrediction::landau_zener(p),
    };
    let measured = transition_probabilities(p, &[m], control)?[0];
    Ok(LzMultipassage {
        passages: m,
        prediction,
        predicted: prediction.p_m(m),
        measured,
        weak_coupling: p.weak_coupling(),
        large_amplitude: p.large_amplitude(),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
