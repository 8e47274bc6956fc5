//! Two-level reductions of the criteria, Eqs. (15) and (16), written directly in the
//! spin-form angles `H = (omega0/2) n(theta, phi) . sigma`.
//!
//! With `z = phi' sin(theta) - i theta'` the frame coupling is `|Omega'| = |z|` and the
//! frame detuning is `delta' = omega0 - phi' cos(theta) - d/dt arg z`, the diagonal of
//! `H'` once `theta_2 = -theta_1 = arg(z) / 2`. Note the relative sign of the arg term:
//! written as `phi' cos(theta) - omega0 - d/dt arg z` it would disagree with Eq. (12)
//! whenever both `theta'` and `phi'` are nonzero.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianModel, TwoLevelForm, TwoLevelJet};
use crate::quadrature::{cumulative, derivative, derivative_stencil, TimeGrid};
use super::criteria::rounding_floor;
use crate::spectral::{fill_gaps, unwrap_mod_pi};

const ARG_FLOOR: f64 = 1e-12;

/// Eq. (15) ratio and Eq. (16) integrand of a two-level family on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelSeries {
    /// `|Omega'| / |delta'|`; `None` where `arg z` is undefined
    pub ratio15: Vec<Option<f64>>,
    /// `Omega' / delta'` with `Omega'` carried through zeros with a sign (arg unwrapped mod pi)
    pub signed_ratio: Vec<f64>,
    /// `|d/dt (Omega' / delta')|`
    pub integrand16: Vec<f64>,
    pub integral16: Vec<f64>,
}

struct Angles {
    z: C64,
    /// `d/dt arg z`, `None` below the floor
    arg_rate: Option<f64>,
    detuning_bare: f64,
    /// magnitude of the terms entering `z` and the detuning
    scale: f64,
}

fn angles(jet: &TwoLevelJet) -> Angles {
    let [f, _, _] = jet.omega0;
    let [g, g1, g2] = jet.theta;
    let [_, p1, p2] = jet.phi;
    let (s, c) = g.sin_cos();
    let z = C64::new(p1 * s, -g1);
    let zdot = C64::new(p2 * s + p1 * g1 * c, -g2);
    let modulus = z.norm();
    let arg_rate = (modulus > ARG_FLOOR * f.abs().max(f64::MIN_POSITIVE)).then(|| (zdot * z.conj()).im / (modulus * modulus));
    let scale = f.abs().max((p1 * c).abs()).max(modulus);
    Angles { z, arg_rate, detuning_bare: f - p1 * c, scale }
}

fn ratio_at(form: &impl TwoLevelForm, t: f64) -> Result<f64> {
    let a = angles(&form.jet(t));
    let rate = a.arg_rate.ok_or(Error::UndefinedArg { t, m: 1, n: 0, modulus: a.z.norm() })?;
    Ok(a.z.norm() / (a.detuning_bare - rate).abs())
}

/// `(ratio15, integrand16)` at time `t`. The integrand differentiates the ratio with a
/// five-point stencil scaled to the local level splitting.
pub fn two_level_conditions(form: &impl TwoLevelForm, t: f64) -> Result<(f64, f64)> {
    let ratio = ratio_at(form, t)?;
    let omega0 = form.jet(t).omega0[0].abs().max(f64::MIN_POSITIVE);
    let h = 1e-4 / omega0;
    let f = |s: f64| ratio_at(form, s);
    let d = (f(t - 2.0 * h)? - 8.0 * f(t - h)? + 8.0 * f(t + h)? - f(t + 2.0 * h)?) / (12.0 * h);
    Ok((ratio, d.abs()))
}

/// Series over `grid`; `None` when the model is not a spin-form two-level family.
pub fn two_level_series(model: &HamiltonianModel, grid: &TimeGrid) -> Option<TwoLevelSeries> {
    let times = grid.times();
    let all: Vec<Angles> = times.iter().map(|&t| model.family().two_level_jet(t).map(|j| angles(&j))).collect::<Option<_>>()?;
    let ratio15 = all.iter().map(|a| a.arg_rate.map(|r| a.z.norm() / (a.detuning_bare - r).abs())).collect();
    let unwrapped = unwrap_mod_pi(&all.iter().map(|a| a.arg_rate.map(|_| a.z.arg())).collect::<Vec<_>>());
    let signed: Vec<f64> = all.iter().zip(&unwrapped).map(|(a, &u)| (a.z * C64::from_polar(1.0, -u)).re).collect();
    // undefined arg rates only occur where z vanishes, so the detuning there is filled in
    // from its neighbours through the same mod-pi bookkeeping
    let rates: Vec<Option<f64>> = all.iter().map(|a| a.arg_rate).collect();
    let filled = fill_gaps(&rates);
    let detuning: Vec<f64> = all.iter().zip(&filled).map(|(a, r)| a.detuning_bare - r).collect();
    let h = grid.step();
    let mut dsigned = derivative(&signed, h);
    let mut ddetuning = derivative(&detuning, h);
    // same rounding floor as the frame-side Eq. (14)
    for k in 0..times.len() {
        let stencil = derivative_stencil(k, times.len());
        let scale = stencil.iter().map(|&(j, _)| all[j].scale).fold(0.0, f64::max);
        let floor = rounding_floor(scale, &stencil, h);
        for d in [&mut dsigned[k], &mut ddetuning[k]] {
            if d.abs() <= floor {
                *d = 0.0;
            }
        }
    }
    let signed_ratio: Vec<f64> = signed.iter().zip(&detuning).map(|(s, d)| s / d).collect();
    let integrand16: Vec<f64> = (0..times.len())
        .map(|k| (dsigned[k] / detuning[k] - signed[k] * ddetuning[k] / (detuning[k] * detuning[k])).abs())
        .collect();
    let integral16 = cumulative(&integrand16, h);
    Some(TwoLevelSeries { ratio15, signed_ratio, integrand16, integral16 })
}
