//! Hamiltonians sampled on a time grid and interpolated with natural cubic splines.
//!
//! File layout: one header line `t, re(H[0][0]), im(H[0][0]), ...` followed by one
//! comma-separated row per time sample, matrix entries in row-major order.

use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_deviation, CMat};

/// Natural cubic spline through `(x_k, y_k)` with strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let lower = x[i] - x[i - 1];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
                m[i] = (rhs[i] - upper[i] * next) / diag[i];
            }
        }
        CubicSpline { x, y, m }
    }

    fn interval(&self, t: f64) -> usize {
        match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            p if p >= self.x.len() => self.x.len() - 2,
            p => p - 1,
        }
    }

    /// Value or derivative (order 1 or 2) at `t`.
    pub fn eval(&self, t: f64, order: u8) -> f64 {
        let i = self.interval(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - t) / h, (t - x0) / h);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        match order {
            0 => a * y0 + b * y1 + ((a.powi(3) - a) * m0 + (b.powi(3) - b) * m1) * h * h / 6.0,
            1 => (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0,
            _ => a * m0 + b * m1,
        }
    }
}

/// A Hermitian matrix function given by samples.
#[derive(Debug, Clone)]
pub struct Tabulated {
    dimension: usize,
    times: Vec<f64>,
    /// one spline per (entry, re/im)
    splines: Vec<(CubicSpline, CubicSpline)>,
}

impl Tabulated {
    pub fn from_samples(times: Vec<f64>, matrices: Vec<CMat>, hermiticity_tol: f64) -> Result<Self> {
        if times.len() < 2 || times.len() != matrices.len() {
            return Err(Error::Config("tabulated model needs at least two samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tabulated times must be strictly increasing".into()));
        }
        let dimension = matrices[0].nrows();
        if dimension < 2 {
            return Err(Error::Config("tabulated model needs dimension >= 2".into()));
        }
        for (t, m) in times.iter().zip(&matrices) {
            if m.nrows() != dimension || m.ncols() != dimension {
                return Err(Error::Config(format!("inconsistent matrix shape at t = {t}")));
            }
            let tolerance = hermiticity_tol * m.norm().max(f64::MIN_POSITIVE);
            let deviation = hermiticity_deviation(m);
            if deviation > tolerance {
                return Err(Error::Hermiticity { t: *t, deviation, tolerance });
            }
        }
        let mut splines = Vec::with_capacity(dimension * dimension);
        for i in 0..dimension {
            for j in 0..dimension {
                let re = matrices.iter().map(|m| m[(i, j)].re).collect();
                let im = matrices.iter().map(|m| m[(i, j)].im).collect();
                splines.push((CubicSpline::natural(times.clone(), re), CubicSpline::natural(times.clone(), im)));
            }
        }
        Ok(Tabulated { dimension, times, splines })
    }

    pub fn read_csv(path: &Path, hermiticity_tol: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
        let mut times = Vec::new();
        let mut matrices = Vec::new();
        for record in reader.records() {
            let record = record?;
            let values: Vec<f64> = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{}: bad number `{s}`: {e}", path.display()))))
                .collect::<Result<_>>()?;
            let entries = (values.len() - 1) / 2;
            let dimension = (entries as f64).sqrt().round() as usize;
            if values.len() != 1 + 2 * dimension * dimension {
                return Err(Error::Config(format!("{}: row has {} columns, not 1 + 2N^2", path.display(), values.len())));
            }
            times.push(values[0]);
            matrices.push(CMat::from_fn(dimension, dimension, |i, j| {
                let k = 1 + 2 * (i * dimension + j);
                C64::new(values[k], values[k + 1])
            }));
        }
        Self::from_samples(times, matrices, hermiticity_tol)
    }

    pub fn write_csv(path: &Path, times: &[f64], matrices: &[CMat]) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let n = matrices.first().map_or(0, |m| m.nrows());
        let mut header = vec!["t".to_string()];
        for i in 0..n {
            for j in 0..n {
                header.push(format!("re(H[{i}][{j}])"));
                header.push(format!("im(H[{i}][{j}])"));
            }
        }
        writer.write_record(&header)?;
        for (t, m) in times.iter().zip(matrices) {
            let mut row = vec![format!("{t:.17e}")];
            for i in 0..n {
                for j in 0..n {
                    row.push(format!("{:.17e}", m[(i, j)].re));
                    row.push(format!("{:.17e}", m[(i, j)].im));
                }
            }
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn eval(&self, t: f64, order: u8) -> CMat {
        let n = self.dimension;
        CMat::from_fn(n, n, |i, j| {
            let (re, im) = &self.splines[i * n + j];
            C64::new(re.eval(t, order), im.eval(t, order))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_knots_and_is_natural() {
        let x: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::natural(x.clone(), y.clone());
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi, 0) - yi).abs() < 1e-14);
        }
        assert!(s.eval(0.0, 2).abs() < 1e-14);
        assert!(s.eval(3.5, 2).abs() < 1e-14);
    }

    #[test]
    fn spline_is_exact_on_lines() {
        let x = vec![0.0, 0.3, 1.0, 1.7, 2.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 - 3.0 * t).collect();
        let s = CubicSpline::natural(x, y);
        assert!((s.eval(1.234, 0) - (2.0 - 3.0 * 1.234)).abs() < 1e-13);
        assert!((s.eval(0.8, 1) + 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_hermitian_samples() {
        let good = CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0)]);
        let mut bad = good.clone();
        bad[(0, 1)] = C64::new(0.5, 1.0);
        let err = Tabulated::from_samples(vec![0.0, 1.0], vec![good, bad], 1e-12).unwrap_err();
        assert!(matches!(err, Error::Hermiticity { .. }));
    }
}
