//! Exact time evolution `i dU/dt = H(t) U` and the closed-form oracles it is checked against.
//!
//! The integrator is the fourth-order commutator-free scheme with two exponentials per step
//! (Gauss-Legendre nodes), so every accepted step is unitary to rounding. Steps are adapted by
//! step doubling and always land on the grid samples.

mod oracles;
mod stueckelberg;

pub use oracles::{schwinger_analytic, schwinger_lab_unitary};
pub use stueckelberg::{
    calibrate_theta, fit_exponent, lz_multipassage, multipassage_probability, transition_probabilities, LzMultipassage,
    StueckelbergPrediction,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bounds::NPrimeSeries;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::linalg::{expm_hermitian, unitarity_defect, CMat, CVec};
use crate::quadrature::{cumulative, TimeGrid};
use crate::spectral::{EigenCurve, GaugeChoice};

pub const UNITARITY_TOL: f64 = 1e-10;
pub const FIDELITY_TOL: f64 = 1e-9;
/// relative to the propagated interval
pub const MIN_STEP_FRACTION: f64 = 1e-12;
/// absolute floor under the local error test
const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;
const SLIVER_FRACTION: f64 = 0.01;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const A1: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const A2: f64 = (3.0 + 2.0 * SQRT3) / 12.0;
const C1: f64 = 0.5 - SQRT3 / 6.0;
const C2: f64 = 0.5 + SQRT3 / 6.0;

/// Adaptive step control. `tolerance` bounds the local error per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub tolerance: f64,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { tolerance: 1e-10, initial_step: None, max_step: None }
    }
}

impl StepControl {
    pub fn with_tolerance(tolerance: f64) -> Self {
        StepControl { tolerance, ..Default::default() }
    }
}

/// `U(t_k, t_0)` at every grid sample.
#[derive(Debug, Clone)]
pub struct UnitaryPath {
    pub grid: TimeGrid,
    pub unitaries: Vec<CMat>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_unitarity_defect: f64,
}

fn cf4_step(model: &HamiltonianModel, t: f64, h: f64) -> Result<CMat> {
    let h1 = model.eval(t + C1 * h)?;
    let h2 = model.eval(t + C2 * h)?;
    let first = &h1 * C64::new(A2, 0.0) + &h2 * C64::new(A1, 0.0);
    let second = h1 * C64::new(A1, 0.0) + h2 * C64::new(A2, 0.0);
    Ok(expm_hermitian(&second, h) * expm_hermitian(&first, h))
}

fn max_entry(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Integrates the propagator over `grid`, starting from the identity at `grid.start`.
pub fn evolve_unitary(model: &HamiltonianModel, grid: &TimeGrid, control: StepControl) -> Result<UnitaryPath> {
    if !(control.tolerance > 0.0) {
        return Err(Error::Config(format!("step tolerance must be positive, got {}", control.tolerance)));
    }
    let dim = model.dimension();
    let span = grid.end - grid.start;
    let min_step = MIN_STEP_FRACTION * span;
    let max_step = control.max_step.unwrap_or(span).min(span);
    let mut h = match control.initial_step {
        Some(h) => h,
        None => {
            let scale = crate::linalg::spectral_norm(&model.eval(grid.start)?).max(1e-300);
            (0.1 / scale).min(grid.step())
        }
    }
    .min(max_step);

    let snap = 64.0 * f64::EPSILON * grid.end.abs().max(span);
    let mut u = CMat::identity(dim, dim);
    let mut unitaries = Vec::with_capacity(grid.samples);
    unitaries.push(u.clone());
    let (mut accepted, mut rejected) = (0, 0);
    for k in 0..grid.samples - 1 {
        let mut t = grid.time(k);
        let target = grid.time(k + 1);
        while t < target {
            let remaining = target - t;
            // never leave a sliver before the sample: stretch by up to 1% instead
            let truncated = h >= remaining - snap.max(SLIVER_FRACTION * h);
            let mut step = if truncated { remaining } else { h };
            let mut retried = false;
            loop {
                if step < min_step {
                    return Err(Error::StepUnderflow { t, step, min_step });
                }
                let coarse = cf4_step(model, t, step)?;
                let fine = cf4_step(model, t + 0.5 * step, 0.5 * step)? * cf4_step(model, t, 0.5 * step)?;
                // fourth order: the coarse error is ~16x the fine one
                let err = max_entry(&(coarse - &fine)) / 15.0;
                // entries of a unitary are O(1), so their difference carries ~eps of roundoff
                let allowed = control.tolerance * step + ROUNDOFF_FLOOR;
                let factor = if err > 0.0 { (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 2.0) } else { 2.0 };
                if err <= allowed {
                    u = fine * u;
                    accepted += 1;
                    t = if step >= remaining { target } else { t + step };
                    // a step cut short by the grid says nothing about a longer one
                    if !truncated || retried || factor < 1.0 {
                        h = (step * factor).min(max_step);
                    }
                    break;
                }
                rejected += 1;
                retried = true;
                step *= factor.min(0.9);
            }
        }
        unitaries.push(u.clone());
    }
    let max_unitarity_defect = unitaries.iter().map(unitarity_defect).fold(0.0, f64::max);
    Ok(UnitaryPath { grid: *grid, unitaries, accepted_steps: accepted, rejected_steps: rejected, max_unitarity_defect })
}

/// Exact evolution of `|Psi(0)> = |n(0)>` compared against the gauge-fixed eigencurve.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub tracked: usize,
    pub gauge: GaugeChoice,
    pub unitaries: Vec<CMat>,
    pub states: Vec<CVec>,
    /// `|<n(t)|Psi(t)>|`
    pub fidelity: Vec<f64>,
    /// `|| Psi - e^{-i int E'_n} |n> ||`, present when `E'_n` was supplied
    pub phase_mismatch: Option<Vec<f64>>,
    /// same with the dynamical-plus-geometric phase `int (E_n - i<n|dn/dt>)` in place of `int E'_n`
    pub usual_phase_mismatch: Vec<f64>,
    /// `|| |Psi><Psi| - |n><n| ||` (spectral norm)
    pub projector_distance: Vec<f64>,
    pub max_unitarity_defect: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Propagates over the curve's grid. `nprime` must come from a frame built on `curve`
/// with tracked level `n`, so that `E'_n` refers to the same gauge.
pub fn propagate(
    model: &HamiltonianModel,
    curve: &EigenCurve,
    n: usize,
    nprime: Option<&NPrimeSeries>,
    control: StepControl,
) -> Result<EvolutionResult> {
    if n >= curve.dimension() {
        return Err(Error::Config(format!("tracked level {n} out of range for dimension {}", curve.dimension())));
    }
    if let Some(np) = nprime {
        if np.energies.len() != curve.len() {
            return Err(Error::Config("E'_n series does not match the eigencurve grid".into()));
        }
    }
    let path = evolve_unitary(model, curve.grid(), control)?;
    let psi0 = curve.vector(0, n);
    let len = curve.len();
    let h = curve.grid().step();

    // int H'_nn = int (E_n + theta_n' + a_n), the phase of the plain adiabatic approximation
    let hnn: Vec<f64> = (0..len)
        .map(|k| curve.energy(k, n) + curve.phase_rate(k, n) + curve.reference_coupling(k, n, n).im)
        .collect();
    let usual_phase = cumulative(&hnn, h);

    let states: Vec<CVec> = path.unitaries.iter().map(|u| u * &psi0).collect();
    let mut fidelity = Vec::with_capacity(len);
    let mut projector_distance = Vec::with_capacity(len);
    let mut usual = Vec::with_capacity(len);
    let mut mismatch = nprime.map(|_| Vec::with_capacity(len));
    for (k, psi) in states.iter().enumerate() {
        let v = curve.vector(k, n);
        let overlap = (v.adjoint() * psi)[(0, 0)].norm();
        fidelity.push(overlap);
        projector_distance.push((1.0 - overlap * overlap).max(0.0).sqrt());
        usual.push((psi - &v * C64::from_polar(1.0, -usual_phase[k])).norm());
        if let (Some(out), Some(np)) = (mismatch.as_mut(), nprime) {
            out.push((psi - &v * C64::from_polar(1.0, -np.phase_integral[k])).norm());
        }
    }
    Ok(EvolutionResult {
        times: curve.times(),
        tracked: n,
        gauge: curve.gauge(),
        unitaries: path.unitaries,
        states,
        fidelity,
        phase_mismatch: mismatch,
        usual_phase_mismatch: usual,
        projector_distance,
        max_unitarity_defect: path.max_unitarity_defect,
        accepted_steps: path.accepted_steps,
        rejected_steps: path.rejected_steps,
    })
}

/// `H_eps(t) = H(eps t)` on the stretched domain `[0, T / eps]`.
pub fn rescaled_evolution(model: &HamiltonianModel, epsilon: f64) -> Result<HamiltonianModel> {
    model.rescaled(epsilon)
}

impl EvolutionResult {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelity.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Non-adiabatic probability `1 - fidelity^2` at the last sample.
    pub fn final_transition_probability(&self) -> f64 {
        let f = self.fidelity.last().copied().unwrap_or(1.0);
        1.0 - f * f
    }

    /// Columns `t, fidelity, phase_mismatch, projector_distance, usual_phase_mismatch`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "fidelity", "phase_mismatch", "projector_distance", "usual_phase_mismatch"])?;
        for k in 0..self.times.len() {
            let pm = self.phase_mismatch.as_ref().map(|p| crate::fmt17(p[k])).unwrap_or_default();
            w.write_record([
                crate::fmt17(self.times[k]),
                crate::fmt17(self.fidelity[k]),
                pm,
                crate::fmt17(self.projector_distance[k]),
                crate::fmt17(self.usual_phase_mismatch[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{key_bound_series, n_prime_series, NPrimePolicy};
    use crate::frame::build_frame;
    use crate::hamiltonian::{random_smooth_model, Family, Profile, SchwingerParams, Term};
    use crate::linalg::c;
    use crate::spectral::eigencurves;

    fn schwinger(omega: f64) -> (SchwingerParams, HamiltonianModel) {
        let p = SchwingerParams { omega0: 10.0, theta: 0.01, omega };
        (p, HamiltonianModel::new(Family::Schwinger(p)).unwrap())
    }

    #[test]
    fn constant_hamiltonian_is_stationary() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0), C64::new(0.3, -0.2), C64::new(0.3, 0.2), c(-0.5)]);
        let model = HamiltonianModel::new(Family::Terms(vec![Term { profile: Profile::constant(1.0), matrix: h }])).unwrap();
        let grid = TimeGrid::new(0.0, 5.0, 51).unwrap();
        let curve = eigencurves(&model, &grid, GaugeChoice::ParallelTransport).unwrap();
        let frame = build_frame(&curve, 1).unwrap();
        let np = n_prime_series(&frame, NPrimePolicy::Strict).unwrap();
        let r = propagate(&model, &curve, 1, Some(&np), StepControl::default()).unwrap();
        for k in 0..r.times.len() {
            assert!((r.fidelity[k] - 1.0).abs() < 1e-12);
            assert!(r.phase_mismatch.as_ref().unwrap()[k] < 1e-10);
        }
    }

    #[test]
    fn cf4_is_fourth_order() {
        let (_, model) = schwinger(3.0);
        let exact = schwinger_lab_unitary(&SchwingerParams { omega0: 10.0, theta: 0.01, omega: 3.0 }, 1.0);
        let err = |steps: usize| {
            let h = 1.0 / steps as f64;
            let u = (0..steps).fold(CMat::identity(2, 2), |u, j| cf4_step(&model, j as f64 * h, h).unwrap() * u);
            max_entry(&(u - &exact))
        };
        let slope = (err(40) / err(80)).log2();
        assert!((slope - 4.0).abs() < 0.3, "order {slope}");
    }

    #[test]
    fn adiabatic_schwinger_matches_lab_oracle() {
        let (p, model) = schwinger(1.0);
        let period = 2.0 * std::f64::consts::TAU / p.rabi_frequency();
        let grid = TimeGrid::new(0.0, period, 201).unwrap();
        let path = evolve_unitary(&model, &grid, StepControl::with_tolerance(1e-11)).unwrap();
        assert!(path.max_unitarity_defect < UNITARITY_TOL);
        for (k, u) in path.unitaries.iter().enumerate() {
            let exact = schwinger_lab_unitary(&p, grid.time(k));
            assert!(max_entry(&(u - exact)) < 1e-9, "k={k}");
        }
    }

    #[test]
    fn fidelity_is_gauge_independent_and_bounded_below() {
        let (p, model) = schwinger(1.0);
        let grid = TimeGrid::new(0.0, 2.0 * std::f64::consts::TAU / p.rabi_frequency(), 301).unwrap();
        let mut runs = Vec::new();
        for gauge in [GaugeChoice::ParallelTransport, GaugeChoice::BerryDynamical, GaugeChoice::PancharatnamAligned { level: 1 }] {
            let curve = eigencurves(&model, &grid, gauge).unwrap();
            runs.push(propagate(&model, &curve, 1, None, StepControl::default()).unwrap());
        }
        let floor = 1.0 - (p.frame_coupling() / p.rabi_frequency()).powi(2);
        for k in 0..grid.samples {
            assert!((runs[0].fidelity[k] - runs[1].fidelity[k]).abs() < FIDELITY_TOL);
            assert!((runs[0].fidelity[k] - runs[2].fidelity[k]).abs() < FIDELITY_TOL);
            assert!(runs[0].fidelity[k] >= floor - FIDELITY_TOL);
            assert!(runs[0].fidelity[k] <= 1.0 + FIDELITY_TOL);
            // frame oracle, magnitude of the tracked diagonal entry
            let u = schwinger_analytic(&p, 1, grid.time(k));
            assert!((u[(0, 0)].norm() - runs[0].fidelity[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_mismatch_stays_under_key_bound() {
        let model = random_smooth_model(3, 5).unwrap();
        let grid = TimeGrid::new(0.0, 4.0, 801).unwrap();
        let curve = eigencurves(&model, &grid, GaugeChoice::ParallelTransport).unwrap();
        let frame = build_frame(&curve, 0).unwrap();
        let np = n_prime_series(&frame, NPrimePolicy::DenseFallback).unwrap();
        let bound = key_bound_series(&frame, &np);
        let r = propagate(&model, &curve, 0, Some(&np), StepControl::default()).unwrap();
        let pm = r.phase_mismatch.as_ref().unwrap();
        for k in 0..grid.samples {
            assert!(pm[k] <= bound[k] + 1e-6, "k={k} {} {}", pm[k], bound[k]);
            assert!(2.0 * (1.0 - r.fidelity[k]) <= pm[k] * pm[k] + 1e-6);
        }
    }

    #[test]
    fn halving_the_tolerance_barely_moves_the_state() {
        let model = random_smooth_model(4, 11).unwrap();
        let grid = TimeGrid::new(0.0, 3.0, 31).unwrap();
        let tol = 1e-9;
        let a = evolve_unitary(&model, &grid, StepControl::with_tolerance(tol)).unwrap();
        let b = evolve_unitary(&model, &grid, StepControl::with_tolerance(0.5 * tol)).unwrap();
        let mut e0 = CVec::zeros(4);
        e0[0] = c(1.0);
        let (pa, pb) = (a.unitaries.last().unwrap() * &e0, b.unitaries.last().unwrap() * &e0);
        let overlap = (pa.adjoint() * pb)[(0, 0)].norm();
        assert!(1.0 - overlap < 10.0 * tol);
    }

    #[test]
    fn step_underflow_is_reported() {
        let stiff = HamiltonianModel::new(Family::Schwinger(SchwingerParams { omega0: 1e15, theta: 0.3, omega: 1.0 })).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 5).unwrap();
        assert!(matches!(evolve_unitary(&stiff, &grid, StepControl::default()), Err(Error::StepUnderflow { .. })));
    }

    #[test]
    fn tolerance_below_roundoff_still_completes() {
        // the error test bottoms out at roundoff instead of shrinking the step forever
        let (_, model) = schwinger(1.0);
        let grid = TimeGrid::new(0.0, 0.05, 5).unwrap();
        let path = evolve_unitary(&model, &grid, StepControl { tolerance: 1e-300, ..Default::default() }).unwrap();
        assert!(path.max_unitarity_defect < 1e-12);
    }

    #[test]
    fn rescaling_slows_the_drive() {
        let (_, model) = schwinger(2.0);
        let slow = rescaled_evolution(&model, 0.5).unwrap();
        match slow.family() {
            Family::Rescaled { epsilon, .. } => assert_eq!(*epsilon, 0.5),
            _ => panic!("expected a rescaled family"),
        }
        let direct = HamiltonianModel::new(Family::Schwinger(SchwingerParams { omega0: 10.0, theta: 0.01, omega: 1.0 })).unwrap();
        for t in [0.0, 0.7, 3.1] {
            assert!((slow.eval(t).unwrap() - direct.eval(t).unwrap()).norm() < 1e-14);
        }
        let same = rescaled_evolution(&model, 1.0).unwrap();
        assert_eq!(same.eval(1.3).unwrap(), model.eval(1.3).unwrap());
    }
}
