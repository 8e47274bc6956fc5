//! Eigenpair of `H'` near the tracked level: Brillouin-Wigner fixed point, second-order
//! perturbation theory and the Bauer-Fike localisation.
//!
//! All matrices here are in renumbered order (tracked level at index 0).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{eigh, off_diagonal, smallest_singular_value, spectral_norm, CMat, CVec};

pub const MAX_BW_ITERS: usize = 200;
/// relative to `||H'||`
pub const BW_RESIDUAL_TOL: f64 = 1e-11;

/// Eigenpair of `H'` continued from the tracked level.
#[derive(Debug, Clone, PartialEq)]
pub struct BWResult {
    /// `(1, x)` with `x = (delta' + Delta')^{-1} Omega' / 2`
    pub n_bold: CVec,
    /// `n_bold / |n_bold|`, so `<n_st|n'> > 0`
    pub n_prime: CVec,
    pub e_prime: f64,
    /// `E'_n - H'_nn`
    pub delta_prime: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `||H' n' - E' n'||`
    pub residual: f64,
}

fn blocks(hp: &CMat) -> (f64, CMat, CVec) {
    let d = hp.nrows() - 1;
    let hnn = hp[(0, 0)].re;
    let delta = CMat::from_fn(d, d, |a, b| {
        let diag = if a == b { C64::new(hnn, 0.0) } else { C64::new(0.0, 0.0) };
        diag - hp[(a + 1, b + 1)]
    });
    let omega = CVec::from_fn(d, |a, _| hp[(a + 1, 0)] * 2.0);
    (hnn, delta, omega)
}

/// Solves Eq. (18), `Delta' = Omega'^dagger (delta' + Delta')^{-1} Omega' / 4`, by fixed-point
/// iteration from `Delta' = 0`, then builds the eigenvector from Eq. (17).
pub fn brillouin_wigner(hp: &CMat, t: f64) -> Result<BWResult> {
    let dim = hp.nrows();
    let norm = spectral_norm(hp).max(f64::MIN_POSITIVE);
    let (hnn, delta, omega) = blocks(hp);
    let sigma_min = smallest_singular_value(&delta);
    if !(sigma_min > 0.0) {
        return Err(Error::SingularBlock { t, sigma_min });
    }
    let inv_norm = 1.0 / sigma_min;
    if inv_norm * omega.norm() >= 1.0 {
        return Err(Error::Convergence { t, reason: format!("outside the contraction region, ||delta'^-1|| ||Omega'|| = {:.3e}", inv_norm * omega.norm()) });
    }
    let half = &omega * C64::new(0.5, 0.0);
    let solve = |shift: f64| -> Result<CVec> {
        let shifted = &delta + CMat::identity(dim - 1, dim - 1) * C64::new(shift, 0.0);
        shifted.lu().solve(&half).ok_or(Error::Convergence { t, reason: "shifted detuning block is singular".into() })
    };
    let map = |shift: f64| -> Result<(f64, CVec)> {
        let x = solve(shift)?;
        Ok(((half.adjoint() * &x)[(0, 0)].re, x))
    };

    let mut shift = 0.0;
    let mut iterations = 0;
    let mut step_tol = 1e-15 * norm;
    let (mut next, x) = map(shift)?;
    let mut residual = (next - shift).abs();
    if omega.norm() > 0.0 {
        loop {
            if residual <= step_tol {
                break;
            }
            if iterations >= MAX_BW_ITERS {
                return Err(Error::Convergence { t, reason: format!("no convergence after {MAX_BW_ITERS} iterations") });
            }
            let mut candidate = next;
            let (mut cand_next, _) = map(candidate)?;
            if (cand_next - candidate).abs() > residual {
                candidate = shift + 0.5 * (next - shift);
                cand_next = map(candidate)?.0;
            }
            iterations += 1;
            shift = candidate;
            next = cand_next;
            residual = (next - shift).abs();
            if shift.abs() * inv_norm >= 1.0 {
                return Err(Error::Convergence { t, reason: format!("||delta'^-1 Delta'|| reached {:.3e}", shift.abs() * inv_norm) });
            }
            // stagnation at rounding level
            if iterations > 50 {
                step_tol = 1e-13 * norm;
            }
        }
        shift = next;
    }
    let x = if shift == 0.0 { x } else { solve(shift)? };

    let mut n_bold = CVec::zeros(dim);
    n_bold[0] = C64::new(1.0, 0.0);
    n_bold.rows_mut(1, dim - 1).copy_from(&x);
    let n_prime = &n_bold / C64::new(n_bold.norm(), 0.0);
    let e_prime = hnn + shift;
    let eig_residual = (hp * &n_prime - &n_prime * C64::new(e_prime, 0.0)).norm();
    Ok(BWResult {
        n_bold,
        n_prime,
        e_prime,
        delta_prime: shift,
        iterations,
        converged: eig_residual <= BW_RESIDUAL_TOL * norm,
        residual: eig_residual,
    })
}

/// Eigenvector of `H'` with the largest weight on the tracked level (or, given `previous`,
/// the largest overlap with it), phased so that `<n_st|n'> >= 0`.
pub fn dense_eigenpair(hp: &CMat, previous: Option<&CVec>) -> (f64, CVec) {
    let (values, vectors) = eigh(hp);
    let score = |j: usize| match previous {
        Some(p) => (p.adjoint() * vectors.column(j))[(0, 0)].norm(),
        None => vectors[(0, j)].norm(),
    };
    let best = (0..values.len()).fold(0, |b, j| if score(j) > score(b) { j } else { b });
    let mut v: CVec = vectors.column(best).into_owned();
    let lead = v[0];
    let phase = if lead.norm() > 0.0 {
        lead.conj() / lead.norm()
    } else if let Some(p) = previous {
        let o = (p.adjoint() * &v)[(0, 0)];
        if o.norm() > 0.0 { o.conj() / o.norm() } else { C64::new(1.0, 0.0) }
    } else {
        C64::new(1.0, 0.0)
    };
    v *= phase;
    (values[best], v)
}

/// Eqs. (10)-(11): second-order energy and first-order vector.
pub fn perturbative_second_order(hp: &CMat, t: f64) -> Result<(f64, CVec)> {
    let dim = hp.nrows();
    let norm = spectral_norm(hp).max(f64::MIN_POSITIVE);
    let hnn = hp[(0, 0)].re;
    let mut energy = hnn;
    let mut vector = CVec::zeros(dim);
    vector[0] = C64::new(1.0, 0.0);
    for m in 1..dim {
        let gap = hnn - hp[(m, m)].re;
        if gap.abs() < 1e-10 * norm {
            return Err(Error::Degeneracy { t, m, n: 0, gap: gap.abs() });
        }
        energy += hp[(m, 0)].norm_sqr() / gap;
        vector[m] = hp[(m, 0)] / gap;
    }
    Ok((energy, vector))
}

/// Eq. (19) for one eigenvalue `e`: `(min_m |e - H'_mm|, ||H' - diag H'||)`.
pub fn bauer_fike(hp: &CMat, e: f64) -> (f64, f64) {
    let lhs = (0..hp.nrows()).map(|m| (e - hp[(m, m)].re).abs()).fold(f64::INFINITY, f64::min);
    (lhs, spectral_norm(&off_diagonal(hp)))
}
