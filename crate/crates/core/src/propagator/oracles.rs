//! Closed-form Schwinger propagators.

use num_complex::Complex64 as C64;

use crate::hamiltonian::SchwingerParams;
use crate::linalg::{c, expm_hermitian, CMat, I};

/// Frame propagator `exp(-i H' t)` for tracked level `n` (0 = lower, 1 = upper), in the
/// aligned gauge where `H' = (1/2) [[delta', Omega'], [Omega', -delta']]` is constant
/// (tracked level first). Entry `(0, 0)` is `U_nn`.
pub fn schwinger_analytic(p: &SchwingerParams, n: usize, t: f64) -> CMat {
    let sign = if n == 0 { -1.0 } else { 1.0 };
    let delta = sign * p.frame_detuning();
    let omega = p.frame_coupling();
    let rabi = p.rabi_frequency();
    if rabi == 0.0 {
        return CMat::identity(2, 2);
    }
    let (s, co) = (0.5 * rabi * t).sin_cos();
    let diag = |sgn: f64| C64::new(co, -sgn * delta / rabi * s);
    let off = -I * (omega / rabi * s);
    CMat::from_row_slice(2, 2, &[diag(1.0), off, off, diag(-1.0)])
}

/// Lab-frame propagator `R(t) exp(-i (H(0) - omega sigma_z / 2) t)` with
/// `R(t) = diag(e^{-i omega t / 2}, e^{i omega t / 2})`.
pub fn schwinger_lab_unitary(p: &SchwingerParams, t: f64) -> CMat {
    let (s, co) = p.theta.sin_cos();
    let half = 0.5 * p.omega0;
    let rotating = CMat::from_row_slice(
        2,
        2,
        &[c(half * co - 0.5 * p.omega), c(half * s), c(half * s), c(-half * co + 0.5 * p.omega)],
    );
    let r = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::from_polar(1.0, -0.5 * p.omega * t),
        C64::from_polar(1.0, 0.5 * p.omega * t),
    ]));
    r * expm_hermitian(&rotating, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_defect;
    use std::f64::consts::PI;

    #[test]
    fn identity_at_zero() {
        let p = SchwingerParams { omega0: 10.0, theta: 0.01, omega: 1.0 };
        assert_eq!(schwinger_analytic(&p, 1, 0.0), CMat::identity(2, 2));
        assert!((schwinger_lab_unitary(&p, 0.0) - CMat::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn resonant_half_period_transfers_everything() {
        let theta: f64 = 0.01;
        let p = SchwingerParams { omega0: 10.0, theta, omega: 10.0 / theta.cos() };
        assert!(p.frame_detuning().abs() < 1e-14);
        let u = schwinger_analytic(&p, 0, PI / p.frame_coupling());
        assert!(u[(0, 0)].norm() < 1e-12);
        assert!(unitarity_defect(&u) < 1e-14);
    }

    #[test]
    fn frame_oracle_solves_the_frame_equation() {
        let p = SchwingerParams { omega0: 10.0, theta: 0.3, omega: 2.0 };
        for n in [0, 1] {
            let sign = if n == 0 { -1.0 } else { 1.0 };
            let hp = CMat::from_row_slice(
                2,
                2,
                &[
                    c(0.5 * sign * p.frame_detuning()),
                    c(0.5 * p.frame_coupling()),
                    c(0.5 * p.frame_coupling()),
                    c(-0.5 * sign * p.frame_detuning()),
                ],
            );
            for t in [0.3, 1.7] {
                assert!((schwinger_analytic(&p, n, t) - expm_hermitian(&hp, t)).norm() < 1e-13);
            }
        }
    }
}
