//! Adiabaticity criteria evaluated on an eigencurve and its adiabatic frame.
//!
//! Convention: `Omega'` is the full Rabi coupling (`H'_{mn} = Omega'_m / 2`), so the
//! two-level Schwinger model gives `|Omega'| = |omega sin theta|`. The standard criterion
//! is normalised the same way, `2 |<m|dH/dt|n>| / (E_n - E_m)^2`, so that both criteria
//! reduce to `|Omega'| / |delta'|`-type ratios with a common scale.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{AdiabaticFrame, INVERSION_FLOOR};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::linalg::{one_norm, smallest_singular_value, spectral_norm, vec_one_norm, CMat, CVec};
use crate::quadrature::{cumulative, derivative_stencil, simpson};
use crate::spectral::{EigenCurve, GaugeChoice};

pub const MONO_NOISE_FLOOR: f64 = 1e-9;
/// rounding allowance, in units of `eps`, for finite differences of frame quantities
pub const FD_ROUNDING: f64 = 64.0;

/// Operator norm used in conditions (13) and (14).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Spectral,
    One,
}

impl NormKind {
    fn matrix(self, m: &CMat) -> f64 {
        match self {
            NormKind::Spectral => spectral_norm(m),
            NormKind::One => one_norm(m),
        }
    }

    fn vector(self, v: &CVec) -> f64 {
        match self {
            NormKind::Spectral => v.norm(),
            NormKind::One => vec_one_norm(v),
        }
    }
}

/// Per-sample criteria. `None` marks a sample where the quantity is undefined
/// (arg of a vanishing coupling, singular detuning block).
#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaSeries {
    pub times: Vec<f64>,
    pub standard: Vec<f64>,
    pub generalized: Vec<Option<f64>>,
    pub cond13: Vec<Option<f64>>,
    pub cond14_integrand: Vec<Option<f64>>,
    pub cond14_integral: Vec<Option<f64>>,
    /// `|Omega'| / |delta'|` from the frame, two-level models only
    pub two_level_ratio: Option<Vec<Option<f64>>>,
    /// Eq. (15) from the spin-form angles, two-level families only
    pub ratio15: Option<Vec<Option<f64>>>,
    /// per off-level `m` (renumbered order): monotonicity changes of `Re(H'_mn) / delta'_mm`
    pub monotonicity_changes: Vec<usize>,
    pub gauge: GaugeChoice,
    pub norm: NormKind,
}

/// Eq. (1): `sum_{m != n} 2 |<m|dH/dt|n>| / (E_n - E_m)^2` at sample `k`.
pub fn standard_criterion(curve: &EigenCurve, n: usize, k: usize) -> Result<f64> {
    let mut acc = 0.0;
    for m in (0..curve.dimension()).filter(|&m| m != n) {
        let cme = curve.coupling_matrix_element(k, m, n)?;
        acc += 2.0 * cme.norm() / (curve.energy(k, n) - curve.energy(k, m)).abs();
    }
    Ok(acc)
}

fn require_aligned(frame: &AdiabaticFrame) -> Result<()> {
    match frame.gauge() {
        GaugeChoice::PancharatnamAligned { level } if level == frame.tracked_level() => Ok(()),
        other => Err(Error::Gauge { expected: "pancharatnam_aligned at the tracked level", found: other.to_string() }),
    }
}

/// Eq. (12) at sample `k`. In the aligned gauge its denominators are the diagonal of `delta'`.
pub fn generalized_criterion(frame: &AdiabaticFrame, k: usize) -> Result<f64> {
    require_aligned(frame)?;
    let t = frame.grid().time(k);
    let delta = frame.delta_prime(k);
    let omega = frame.omega_prime(k);
    let floor = INVERSION_FLOOR * frame.norm(k);
    let mut acc = 0.0;
    for a in 0..omega.len() {
        if frame.arg_missing[k][a] {
            return Err(Error::UndefinedArg { t, m: frame.level_of(a + 1), n: frame.tracked_level(), modulus: 0.5 * omega[a].norm() });
        }
        let d = delta[(a, a)].norm();
        if d <= floor {
            return Err(Error::SingularBlock { t, sigma_min: d });
        }
        acc += omega[a].norm() / d;
    }
    Ok(acc)
}

fn checked_inverse(frame: &AdiabaticFrame, k: usize) -> Result<CMat> {
    let delta = frame.delta_prime(k);
    let sigma_min = smallest_singular_value(delta);
    if sigma_min <= INVERSION_FLOOR * frame.norm(k) {
        return Err(Error::SingularBlock { t: frame.grid().time(k), sigma_min });
    }
    delta.clone().try_inverse().ok_or(Error::SingularBlock { t: frame.grid().time(k), sigma_min })
}

/// Eq. (13): `||delta'^{-1}|| ||Omega'||` at sample `k`.
pub fn condition13(frame: &AdiabaticFrame, k: usize, norm: NormKind) -> Result<f64> {
    let inv = checked_inverse(frame, k)?;
    let inv_norm = match norm {
        NormKind::Spectral => 1.0 / smallest_singular_value(frame.delta_prime(k)),
        NormKind::One => one_norm(&inv),
    };
    Ok(inv_norm * norm.vector(frame.omega_prime(k)))
}

/// Size of a difference quotient that rounding errors of relative size `eps` in series
/// values of magnitude `scale` can produce on their own.
pub(crate) fn rounding_floor(scale: f64, stencil: &[(usize, f64)], h: f64) -> f64 {
    let weight: f64 = stencil.iter().map(|&(_, w)| w.abs()).sum();
    FD_ROUNDING * f64::EPSILON * scale * weight / h
}

/// Integrand of Eq. (14) per sample and its running integral.
pub fn condition14_series(frame: &AdiabaticFrame, norm: NormKind) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = frame.len();
    let h = frame.grid().step();
    let inverses: Vec<CMat> = (0..len).map(|k| checked_inverse(frame, k)).collect::<Result<_>>()?;
    let norms: Vec<f64> = (0..len).map(|k| frame.norm(k)).collect();
    let mut integrand = Vec::with_capacity(len);
    for k in 0..len {
        let stencil = derivative_stencil(k, len);
        let d = frame.delta_prime(k).nrows();
        let mut ddelta = stencil.iter().fold(CMat::zeros(d, d), |acc, &(j, w)| acc + frame.delta_prime(j) * C64::new(w / h, 0.0));
        let mut domega = stencil.iter().fold(CVec::zeros(d), |acc, &(j, w)| acc + frame.omega_prime(j) * C64::new(w / h, 0.0));
        // difference quotients at the rounding level of H' carry no information; left in,
        // |noise| / h integrates to O(samples * eps * ||H'|| / |delta'|^2) when delta' is small
        let scale = stencil.iter().map(|&(j, _)| norms[j]).fold(0.0, f64::max);
        let floor = rounding_floor(scale, &stencil, h);
        if ddelta.norm() <= floor {
            ddelta.fill(C64::new(0.0, 0.0));
        }
        if domega.norm() <= floor {
            domega.fill(C64::new(0.0, 0.0));
        }
        let dinv: DMatrix<C64> = -(&inverses[k] * ddelta * &inverses[k]);
        integrand.push(norm.vector(frame.omega_prime(k)) * norm.matrix(&dinv) + norm.matrix(&inverses[k]) * norm.vector(&domega));
    }
    let integral = cumulative(&integrand, h);
    Ok((integrand, integral))
}

/// Eq. (14) integrated with Simpson's rule from the grid start to the sample nearest `t_end`.
pub fn condition14(frame: &AdiabaticFrame, t_end: f64, norm: NormKind) -> Result<f64> {
    let (integrand, _) = condition14_series(frame, norm)?;
    let k = frame.grid().nearest(t_end);
    Ok(simpson(&integrand[..=k], frame.grid().step()))
}

/// Number of direction changes of a sampled series, ignoring wiggles below
/// `MONO_NOISE_FLOOR` times the series range.
pub fn count_monotonicity_changes(series: &[f64]) -> usize {
    let (lo, hi) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let floor = MONO_NOISE_FLOOR * (hi - lo);
    if series.len() < 3 || !(hi - lo > 0.0) {
        return 0;
    }
    let mut changes = 0;
    let mut direction = 0i8;
    let mut extreme = series[0];
    for &x in &series[1..] {
        match direction {
            0 => {
                if (x - extreme).abs() > floor {
                    direction = if x > extreme { 1 } else { -1 };
                    extreme = x;
                }
            }
            1 => {
                if x > extreme {
                    extreme = x;
                } else if extreme - x > floor {
                    changes += 1;
                    direction = -1;
                    extreme = x;
                }
            }
            _ => {
                if x < extreme {
                    extreme = x;
                } else if x - extreme > floor {
                    changes += 1;
                    direction = 1;
                    extreme = x;
                }
            }
        }
    }
    changes
}

/// All criteria on the grid. `curve` and `frame` must use the aligned gauge at the
/// tracked level; `model` supplies the spin-form angles of two-level families.
pub fn criteria_series(curve: &EigenCurve, frame: &AdiabaticFrame, model: &HamiltonianModel, norm: NormKind) -> Result<CriteriaSeries> {
    require_aligned(frame)?;
    let n = frame.tracked_level();
    let len = frame.len();
    let times = frame.grid().times();
    let standard = (0..len).map(|k| standard_criterion(curve, n, k)).collect::<Result<Vec<_>>>()?;
    let generalized = (0..len).map(|k| lenient(generalized_criterion(frame, k))).collect::<Result<Vec<_>>>()?;
    let cond13 = (0..len).map(|k| lenient(condition13(frame, k, norm))).collect::<Result<Vec<_>>>()?;
    let (cond14_integrand, cond14_integral) = match condition14_series(frame, norm) {
        Ok((a, b)) => (a.into_iter().map(Some).collect(), b.into_iter().map(Some).collect()),
        Err(Error::SingularBlock { .. }) => (vec![None; len], vec![None; len]),
        Err(e) => return Err(e),
    };
    let two_level_ratio = (frame.dimension() == 2).then(|| {
        (0..len)
            .map(|k| {
                let d = frame.delta_prime(k)[(0, 0)].norm();
                (d > INVERSION_FLOOR * frame.norm(k)).then(|| frame.omega_prime(k)[0].norm() / d)
            })
            .collect()
    });
    let ratio15 = super::two_level_series(model, frame.grid()).map(|s| s.ratio15);
    let monotonicity_changes = (0..frame.dimension() - 1)
        .map(|a| {
            let series: Vec<f64> = (0..len)
                .map(|k| {
                    let d = frame.delta_prime(k)[(a, a)];
                    (0.5 * frame.omega_prime(k)[a] / d).re
                })
                .collect();
            count_monotonicity_changes(&series)
        })
        .collect();
    Ok(CriteriaSeries {
        times,
        standard,
        generalized,
        cond13,
        cond14_integrand,
        cond14_integral,
        two_level_ratio,
        ratio15,
        monotonicity_changes,
        gauge: frame.gauge(),
        norm,
    })
}

fn lenient(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedArg { .. } | Error::SingularBlock { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(crate::fmt17).unwrap_or_default()
}

impl CriteriaSeries {
    pub fn max_standard(&self) -> f64 {
        self.standard.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_generalized(&self) -> Option<f64> {
        max_defined(&self.generalized)
    }

    pub fn max_cond13(&self) -> Option<f64> {
        max_defined(&self.cond13)
    }

    pub fn final_cond14(&self) -> Option<f64> {
        self.cond14_integral.last().copied().flatten()
    }

    /// Writes `t, standard, generalized, cond13, cond14_integral, ratio15`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "standard", "generalized", "cond13", "cond14_integral", "ratio15"])?;
        for k in 0..self.times.len() {
            let r15 = self.ratio15.as_ref().and_then(|r| r[k]);
            w.write_record([
                crate::fmt17(self.times[k]),
                crate::fmt17(self.standard[k]),
                cell(self.generalized[k]),
                cell(self.cond13[k]),
                cell(self.cond14_integral[k]),
                cell(r15),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn max_defined(v: &[Option<f64>]) -> Option<f64> {
    v.iter().flatten().copied().reduce(f64::max)
}
