//! Small dense complex linear algebra helpers built on `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest absolute entry of `H - H^dagger`.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Real symmetric input goes through the real solver so the eigenvectors come out real.
pub fn eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    let (values, vectors) = if is_real(h) {
        let re = h.map(|z| z.re);
        let e = re.symmetric_eigen();
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors.map(c))
    } else {
        let e = h.clone().symmetric_eigen();
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = CMat::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    (sorted_values, sorted_vectors)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0f64, |a, &s| a.max(s))
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return f64::INFINITY;
    }
    m.clone().singular_values().iter().fold(f64::INFINITY, |a, &s| a.min(s))
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_one_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// `exp(-i h dt)` for Hermitian `h`, unitary to rounding.
pub fn expm_hermitian(h: &CMat, dt: f64) -> CMat {
    let (values, vectors) = eigh(h);
    let phases = CVec::from_iterator(values.len(), values.iter().map(|&e| C64::from_polar(1.0, -e * dt)));
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * vectors.adjoint()
}

/// `||U^dagger U - 1||` in the max-entry sense.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { c(1.0) } else { c(0.0) };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

/// The off-diagonal part of a square matrix.
pub fn off_diagonal(m: &CMat) -> CMat {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        out[(i, i)] = c(0.0);
    }
    out
}

/// Inner product `<a|b>`.
pub fn braket(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}
