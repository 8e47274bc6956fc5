//! Rigorous bounds on the departure from adiabatic following.
//!
//! * Eq. (3): the gap-based bound on `1 - |<Psi|n>|`, evaluated from the model.
//! * Eq. (7): the bound on `|| Psi - e^{-i int E'_n} |n> ||` built from the eigenvector
//!   `|n'>` of `H'` continued from the tracked level.
//! * Eq. (20): the short-time bound `1 - cos(int ||Omega'|| / 2)` on `1 - |U_nn|`.
//! * Eq. (19): Bauer-Fike localisation of the eigenvalues of `H'`.

mod bw;

pub use bw::{bauer_fike, brillouin_wigner, dense_eigenpair, perturbative_second_order, BWResult, BW_RESIDUAL_TOL, MAX_BW_ITERS};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::AdiabaticFrame;
use crate::hamiltonian::HamiltonianModel;
use crate::linalg::{eigh, spectral_norm, CVec};
use crate::quadrature::{cumulative, derivative_stencil, simpson_refined};
use crate::spectral::EigenCurve;

pub const QUAD_TOL: f64 = 1e-8;
pub const BOUND_SLACK: f64 = 1e-6;

/// Eq. (3) right-hand side split into its boundary and integral parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JrsBound {
    pub boundary: f64,
    pub integral: f64,
    pub total: f64,
    /// samples used by the refined quadrature
    pub samples: usize,
}

fn sorted_gap(model: &HamiltonianModel, t: f64, n: usize) -> Result<f64> {
    let (e, _) = eigh(&model.eval(t)?);
    let gap = e.iter().enumerate().filter(|&(m, _)| m != n).map(|(_, x)| (x - e[n]).abs()).fold(f64::INFINITY, f64::min);
    if !(gap > 0.0) {
        return Err(Error::Degeneracy { t, m: n, n, gap });
    }
    Ok(gap)
}

fn jrs_integrand(model: &HamiltonianModel, t: f64, n: usize) -> Result<f64> {
    let gap = sorted_gap(model, t, n)?;
    let d1 = spectral_norm(&model.eval_derivative(t, 1)?);
    let d2 = spectral_norm(&model.eval_derivative(t, 2)?);
    Ok(7.0 * d1 * d1 / gap.powi(3) + d2 / (gap * gap))
}

fn jrs_boundary(model: &HamiltonianModel, t: f64, n: usize) -> Result<f64> {
    let gap = sorted_gap(model, t, n)?;
    Ok(spectral_norm(&model.eval_derivative(t, 1)?) / (gap * gap))
}

/// Eq. (3) on `[curve start, t_end]`, the integral refined until successive Simpson
/// estimates agree to `QUAD_TOL`. The level index is the ascending-energy position, which
/// continuity tracking preserves as long as the spectrum stays gapped.
pub fn jrs_bound(model: &HamiltonianModel, curve: &EigenCurve, n: usize, t_end: f64) -> Result<JrsBound> {
    let t0 = curve.grid().start;
    let boundary = jrs_boundary(model, t0, n)? + jrs_boundary(model, t_end, n)?;
    let mut failure = None;
    let refined = simpson_refined(
        |t| match jrs_integrand(model, t, n) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        t0,
        t_end,
        curve.len(),
        QUAD_TOL,
        8,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(JrsBound { boundary, integral: refined.value, total: boundary + refined.value, samples: refined.samples })
}

/// Eq. (3) at every grid sample; the integral is a running grid quadrature.
pub fn jrs_series(model: &HamiltonianModel, curve: &EigenCurve, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let times = curve.times();
    let parts: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| Ok((jrs_integrand(model, t, n)?, jrs_boundary(model, t, n)?)))
        .collect::<Result<_>>()?;
    let integrand: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let integral = cumulative(&integrand, curve.grid().step());
    let total = (0..times.len()).map(|k| parts[0].1 + parts[k].1 + integral[k]).collect();
    Ok((total, integral))
}

/// How `key_bound` obtains `|n'>` when the Brillouin-Wigner iteration does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NPrimePolicy {
    /// any failed sample makes the bound unavailable
    Strict,
    /// fall back to the dense eigenvector continued by overlap
    #[default]
    DenseFallback,
}

/// `|n'>` and `E'_n` along the grid, in renumbered order.
#[derive(Debug, Clone, PartialEq)]
pub struct NPrimeSeries {
    pub vectors: Vec<CVec>,
    pub energies: Vec<f64>,
    pub bw_converged: Vec<bool>,
    pub bw_iterations: Vec<usize>,
    /// running `int_0^t E'_n`
    pub phase_integral: Vec<f64>,
}

pub fn n_prime_series(frame: &AdiabaticFrame, policy: NPrimePolicy) -> Result<NPrimeSeries> {
    let len = frame.len();
    let bws: Vec<Result<BWResult>> =
        (0..len).into_par_iter().map(|k| brillouin_wigner(&frame.renumbered(k), frame.grid().time(k))).collect();
    let mut vectors: Vec<CVec> = Vec::with_capacity(len);
    let mut energies = Vec::with_capacity(len);
    let mut bw_converged = Vec::with_capacity(len);
    let mut bw_iterations = Vec::with_capacity(len);
    for (k, bw) in bws.into_iter().enumerate() {
        match bw {
            Ok(r) if r.converged => {
                vectors.push(r.n_prime);
                energies.push(r.e_prime);
                bw_converged.push(true);
                bw_iterations.push(r.iterations);
            }
            other => {
                if policy == NPrimePolicy::Strict {
                    return Err(match other {
                        Err(e) => e,
                        Ok(r) => Error::Convergence { t: frame.grid().time(k), reason: format!("eigen-residual {:.3e}", r.residual) },
                    });
                }
                let (e, v) = dense_eigenpair(&frame.renumbered(k), vectors.last());
                vectors.push(v);
                energies.push(e);
                bw_converged.push(false);
                bw_iterations.push(other.map(|r| r.iterations).unwrap_or(0));
            }
        }
    }
    let phase_integral = cumulative(&energies, frame.grid().step());
    Ok(NPrimeSeries { vectors, energies, bw_converged, bw_iterations, phase_integral })
}

/// Eq. (7) at every sample: `||n'(0) - n_st|| + ||n'(t) - n_st|| + int_0^t ||dn'/dt||`.
pub fn key_bound_series(frame: &AdiabaticFrame, nprime: &NPrimeSeries) -> Vec<f64> {
    let len = frame.len();
    let h = frame.grid().step();
    let dim = frame.dimension();
    let mut n_st = CVec::zeros(dim);
    n_st[0] = C64::new(1.0, 0.0);
    let speed: Vec<f64> = (0..len)
        .map(|k| {
            derivative_stencil(k, len)
                .iter()
                .fold(CVec::zeros(dim), |acc, &(j, w)| acc + &nprime.vectors[j] * C64::new(w / h, 0.0))
                .norm()
        })
        .collect();
    let integral = cumulative(&speed, h);
    let start = (&nprime.vectors[0] - &n_st).norm();
    (0..len).map(|k| start + (&nprime.vectors[k] - &n_st).norm() + integral[k]).collect()
}

/// Eq. (7) at `t_end` (nearest grid sample), requiring converged Brillouin-Wigner samples.
pub fn key_bound(frame: &AdiabaticFrame, t_end: f64) -> Result<f64> {
    let series = n_prime_series(frame, NPrimePolicy::Strict)?;
    Ok(key_bound_series(frame, &series)[frame.grid().nearest(t_end)])
}

/// Eq. (20) at every sample, with `x(t) = int_0^t ||Omega'|| / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZenoSeries {
    /// `1 - cos(min(x, pi))`
    pub bound: Vec<f64>,
    /// `x^2 / 2`
    pub quadratic: Vec<f64>,
    pub angle: Vec<f64>,
}

pub fn zeno_series(frame: &AdiabaticFrame) -> ZenoSeries {
    let rate: Vec<f64> = (0..frame.len()).map(|k| 0.5 * frame.omega_prime(k).norm()).collect();
    let angle = cumulative(&rate, frame.grid().step());
    ZenoSeries {
        bound: angle.iter().map(|&x| 1.0 - x.min(std::f64::consts::PI).cos()).collect(),
        quadratic: angle.iter().map(|&x| 0.5 * x * x).collect(),
        angle,
    }
}

/// Eq. (20) at the sample nearest `t`.
pub fn zeno_bound(frame: &AdiabaticFrame, t: f64) -> f64 {
    zeno_series(frame).bound[frame.grid().nearest(t)]
}

/// Time for the Zeno bound to reach `target` at a constant coupling `||Omega'||`.
pub fn zeno_time(omega_norm: f64, target: f64) -> f64 {
    2.0 * (1.0 - target.clamp(0.0, 2.0)).acos() / omega_norm
}

/// Per-sample bound table (one row per grid sample).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub times: Vec<f64>,
    pub jrs_bound: Vec<f64>,
    pub jrs_integral: Vec<f64>,
    pub key_bound: Vec<f64>,
    pub zeno_bound: Vec<f64>,
    pub zeno_quadratic: Vec<f64>,
    pub bauer_fike_lhs: Vec<f64>,
    pub bauer_fike_rhs: Vec<f64>,
    pub bw_converged: Vec<bool>,
}

/// Evaluates every bound on the frame's grid.
pub fn bound_report(model: &HamiltonianModel, curve: &EigenCurve, frame: &AdiabaticFrame, nprime: &NPrimeSeries) -> Result<BoundReport> {
    let n = frame.tracked_level();
    let (jrs_bound, jrs_integral) = jrs_series(model, curve, n)?;
    let zeno = zeno_series(frame);
    let (bauer_fike_lhs, bauer_fike_rhs) = (0..frame.len()).map(|k| bauer_fike(frame.hprime(k), nprime.energies[k])).unzip();
    Ok(BoundReport {
        times: frame.grid().times(),
        jrs_bound,
        jrs_integral,
        key_bound: key_bound_series(frame, nprime),
        zeno_bound: zeno.bound,
        zeno_quadratic: zeno.quadratic,
        bauer_fike_lhs,
        bauer_fike_rhs,
        bw_converged: nprime.bw_converged.clone(),
    })
}

impl BoundReport {
    /// Writes `t, jrs_bound, key_bound, zeno_bound, bauer_fike_lhs, bauer_fike_rhs, bw_converged`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "jrs_bound", "key_bound", "zeno_bound", "bauer_fike_lhs", "bauer_fike_rhs", "bw_converged"])?;
        for k in 0..self.times.len() {
            w.write_record([
                crate::fmt17(self.times[k]),
                crate::fmt17(self.jrs_bound[k]),
                crate::fmt17(self.key_bound[k]),
                crate::fmt17(self.zeno_bound[k]),
                crate::fmt17(self.bauer_fike_lhs[k]),
                crate::fmt17(self.bauer_fike_rhs[k]),
                self.bw_converged[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
