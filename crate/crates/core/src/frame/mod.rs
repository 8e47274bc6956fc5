//! The adiabatic-frame Hamiltonian `H'` and its split around one tracked level.
//!
//! With the basis `P = [e^{i theta_m} |m>]`, the coefficients of `Psi = P c` obey
//! `i dc/dt = H' c` with `H'_{mk} = (E_m + theta_m') delta_{mk} - i <m|dk/dt> e^{i(theta_k - theta_m)}`.
//! After moving the tracked level `n` to the front, `H' = [[H'_nn, Omega'^dagger/2], [Omega'/2, H'_nn - delta']]`.

mod criteria;
mod two_level;

pub use criteria::{
    condition13, condition14, condition14_series, count_monotonicity_changes, criteria_series, generalized_criterion,
    standard_criterion, CriteriaSeries, NormKind, FD_ROUNDING, MONO_NOISE_FLOOR,
};
pub use two_level::{two_level_conditions, two_level_series, TwoLevelSeries};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_deviation, spectral_norm, CMat, CVec, I};
use crate::quadrature::TimeGrid;
use crate::spectral::{EigenCurve, GaugeChoice};

pub const FRAME_TOL: f64 = 1e-6;
pub const CRITERIA_TOL: f64 = 1e-8;
/// relative to `||H'||`
pub const INVERSION_FLOOR: f64 = 1e-12;

/// `H'` on a grid together with its `(delta', Omega')` block split.
#[derive(Debug, Clone)]
pub struct AdiabaticFrame {
    grid: TimeGrid,
    tracked: usize,
    gauge: GaugeChoice,
    hprime: Vec<CMat>,
    /// `order[0] = n`, then the other levels in ascending index
    order: Vec<usize>,
    delta: Vec<CMat>,
    omega: Vec<CVec>,
    /// per sample and renumbered off-level: the aligned-gauge argument was undefined
    arg_missing: Vec<Vec<bool>>,
}

/// Builds `H'` from the eigencurve and splits it around level `n`.
pub fn build_frame(curve: &EigenCurve, n: usize) -> Result<AdiabaticFrame> {
    let dim = curve.dimension();
    if n >= dim {
        return Err(Error::Config(format!("tracked level {n} out of range for dimension {dim}")));
    }
    let order: Vec<usize> = std::iter::once(n).chain((0..dim).filter(|&m| m != n)).collect();
    let samples: Vec<(CMat, CMat, CVec)> = (0..curve.len())
        .into_par_iter()
        .map(|k| {
            let hp = frame_hamiltonian(curve, k);
            let (delta, omega) = split(&hp, &order);
            (hp, delta, omega)
        })
        .collect();
    let arg_missing = (0..curve.len()).map(|k| order[1..].iter().map(|&m| curve.arg_missing(k, m)).collect()).collect();
    let mut hprime = Vec::with_capacity(samples.len());
    let mut delta = Vec::with_capacity(samples.len());
    let mut omega = Vec::with_capacity(samples.len());
    for (h, d, o) in samples {
        hprime.push(h);
        delta.push(d);
        omega.push(o);
    }
    Ok(AdiabaticFrame { grid: *curve.grid(), tracked: n, gauge: curve.gauge(), hprime, order, delta, omega, arg_missing })
}

fn frame_hamiltonian(curve: &EigenCurve, k: usize) -> CMat {
    let dim = curve.dimension();
    CMat::from_fn(dim, dim, |m, j| {
        let coupling = -I * curve.reference_coupling(k, m, j) * C64::from_polar(1.0, curve.phase(k, j) - curve.phase(k, m));
        if m == j {
            coupling + curve.energy(k, m) + curve.phase_rate(k, m)
        } else {
            coupling
        }
    })
}

fn split(hp: &CMat, order: &[usize]) -> (CMat, CVec) {
    let n = order[0];
    let rest = &order[1..];
    let k = rest.len();
    let delta = CMat::from_fn(k, k, |a, b| {
        let diag = if a == b { hp[(n, n)] } else { C64::new(0.0, 0.0) };
        diag - hp[(rest[a], rest[b])]
    });
    let omega = CVec::from_fn(k, |a, _| hp[(rest[a], n)] * 2.0);
    (delta, omega)
}

impl AdiabaticFrame {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.hprime.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hprime.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.order.len()
    }

    pub fn tracked_level(&self) -> usize {
        self.tracked
    }

    pub fn gauge(&self) -> GaugeChoice {
        self.gauge
    }

    /// `H'` in the original level order.
    pub fn hprime(&self, k: usize) -> &CMat {
        &self.hprime[k]
    }

    /// `H'` with the tracked level moved to index 0.
    pub fn renumbered(&self, k: usize) -> CMat {
        let d = self.dimension();
        CMat::from_fn(d, d, |a, b| self.hprime[k][(self.order[a], self.order[b])])
    }

    /// Original level index of renumbered index `a`.
    pub fn level_of(&self, a: usize) -> usize {
        self.order[a]
    }

    pub fn delta_prime(&self, k: usize) -> &CMat {
        &self.delta[k]
    }

    pub fn omega_prime(&self, k: usize) -> &CVec {
        &self.omega[k]
    }

    pub fn h_nn(&self, k: usize) -> f64 {
        self.hprime[k][(self.tracked, self.tracked)].re
    }

    pub fn arg_missing(&self, k: usize) -> bool {
        self.arg_missing[k].iter().any(|&b| b)
    }

    pub fn norm(&self, k: usize) -> f64 {
        spectral_norm(&self.hprime[k])
    }

    pub fn max_hermiticity_deviation(&self) -> f64 {
        self.hprime.iter().map(hermiticity_deviation).fold(0.0, f64::max)
    }

    /// Reassembles `H_0 + V` from the block split (renumbered order).
    pub fn reconstruct(&self, k: usize) -> CMat {
        let d = self.dimension();
        let hnn = self.hprime[k][(self.tracked, self.tracked)];
        let delta = &self.delta[k];
        let omega = &self.omega[k];
        CMat::from_fn(d, d, |a, b| match (a, b) {
            (0, 0) => hnn,
            (0, b) => omega[b - 1].conj() * 0.5,
            (a, 0) => omega[a - 1] * 0.5,
            (a, b) => {
                let diag = if a == b { hnn } else { C64::new(0.0, 0.0) };
                diag - delta[(a - 1, b - 1)]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{random_smooth_model, CyclingLzParams, Family, HamiltonianModel, SchwingerParams};
    use crate::linalg::c;
    use crate::quadrature::derivative_stencil;
    use crate::spectral::eigencurves;

    fn schwinger(omega: f64) -> (SchwingerParams, HamiltonianModel) {
        let p = SchwingerParams { omega0: 10.0, theta: 0.01, omega };
        (p, HamiltonianModel::new(Family::Schwinger(p)).unwrap())
    }

    fn check_frame_identity(model: &HamiltonianModel, grid: &TimeGrid, gauge: GaugeChoice) {
        let curve = eigencurves(model, grid, gauge).unwrap();
        let frame = build_frame(&curve, 0).unwrap();
        let h = grid.step();
        for k in (2..curve.len() - 2).step_by(13) {
            let p = curve.basis(k);
            let pdot = derivative_stencil(k, curve.len())
                .iter()
                .fold(CMat::zeros(p.nrows(), p.ncols()), |acc, &(j, w)| acc + curve.basis(j) * c(w / h));
            let expected = p.adjoint() * curve.hamiltonian(k) * &p - p.adjoint() * pdot * I;
            let err = (&expected - frame.hprime(k)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            assert!(err < FRAME_TOL, "{gauge} k={k} err={err:e}");
            assert!((frame.reconstruct(k) - frame.renumbered(k)).norm() < 1e-14);
        }
        assert!(frame.max_hermiticity_deviation() < FRAME_TOL);
    }

    #[test]
    fn frame_identity_on_two_level_and_random_models() {
        let gauges = [GaugeChoice::ParallelTransport, GaugeChoice::BerryDynamical, GaugeChoice::PancharatnamAligned { level: 0 }];
        let (_, s) = schwinger(1.0);
        let cyc = HamiltonianModel::new(Family::CyclingLz(CyclingLzParams { alpha: 4.0, varpi: 1.0, coupling: 1.0 })).unwrap();
        let rnd = random_smooth_model(4, 1).unwrap();
        for gauge in gauges {
            check_frame_identity(&s, &TimeGrid::new(0.0, 3.0, 601).unwrap(), gauge);
            check_frame_identity(&cyc, &TimeGrid::new(0.1, 3.0, 1201).unwrap(), gauge);
            check_frame_identity(&rnd, &TimeGrid::new(0.0, 2.0, 801).unwrap(), gauge);
        }
    }

    #[test]
    fn schwinger_frame_blocks() {
        let (p, model) = schwinger(1.0);
        let grid = TimeGrid::new(0.0, 4.0, 201).unwrap();
        let curve = eigencurves(&model, &grid, GaugeChoice::PancharatnamAligned { level: 1 }).unwrap();
        let frame = build_frame(&curve, 1).unwrap();
        for k in 0..frame.len() {
            assert!((frame.delta_prime(k)[(0, 0)].norm() - p.frame_detuning().abs()).abs() < 1e-10);
            let o = frame.omega_prime(k)[0];
            assert!((o.norm() - p.frame_coupling()).abs() < 1e-12);
            assert!(o.im.abs() < 1e-12, "aligned gauge makes Omega' real");
        }
    }

    #[test]
    fn berry_dynamical_empties_the_diagonal() {
        let model = random_smooth_model(3, 2).unwrap();
        let curve = eigencurves(&model, &TimeGrid::new(0.0, 2.0, 101).unwrap(), GaugeChoice::BerryDynamical).unwrap();
        let frame = build_frame(&curve, 1).unwrap();
        for k in 0..frame.len() {
            for m in 0..3 {
                assert!(frame.hprime(k)[(m, m)].norm() < 1e-13);
            }
        }
    }

    #[test]
    fn constant_hamiltonian_frame_is_diagonal() {
        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(-1.0)]));
        let model = HamiltonianModel::new(Family::Terms(vec![crate::hamiltonian::Term {
            profile: crate::hamiltonian::Profile::constant(1.0),
            matrix: h,
        }]))
        .unwrap();
        let curve = eigencurves(&model, &TimeGrid::new(0.0, 1.0, 11).unwrap(), GaugeChoice::ParallelTransport).unwrap();
        let frame = build_frame(&curve, 0).unwrap();
        for k in 0..frame.len() {
            assert_eq!(frame.hprime(k)[(0, 0)].re, -1.0);
            assert_eq!(frame.hprime(k)[(1, 1)].re, 1.0);
            assert_eq!(frame.omega_prime(k)[0].norm(), 0.0);
        }
    }

    #[test]
    fn off_diagonal_magnitudes_are_gauge_invariant() {
        let model = random_smooth_model(3, 4).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 101).unwrap();
        let a = build_frame(&eigencurves(&model, &grid, GaugeChoice::ParallelTransport).unwrap(), 0).unwrap();
        let b = build_frame(&eigencurves(&model, &grid, GaugeChoice::BerryDynamical).unwrap(), 0).unwrap();
        for k in 0..a.len() {
            for i in 0..3 {
                for j in (0..3).filter(|&j| j != i) {
                    assert!((a.hprime(k)[(i, j)].norm() - b.hprime(k)[(i, j)].norm()).abs() < 1e-14);
                }
            }
        }
    }
}
