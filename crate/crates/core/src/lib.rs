//! Adiabaticity criteria, exact bounds and unitary propagation for time-dependent
//! N-level Hamiltonians.
//!
//! Units throughout: hbar = 1, times in seconds, energies and frequencies in rad/s.

pub mod bounds;
pub mod error;
pub mod frame;
pub mod hamiltonian;
pub mod linalg;
pub mod propagator;
pub mod quadrature;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};

/// Shortest round-trip representation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
