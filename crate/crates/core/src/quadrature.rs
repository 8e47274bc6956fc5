//! Uniform time grids, finite differences and quadrature on sampled series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced samples `start, ..., end` (both included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub samples: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, samples: usize) -> Result<Self> {
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::Config(format!("grid needs end > start, got [{start}, {end}]")));
        }
        if samples < 5 {
            return Err(Error::Config(format!("grid needs at least 5 samples, got {samples}")));
        }
        Ok(TimeGrid { start, end, samples })
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.samples - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.samples {
            self.end
        } else {
            self.start + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|k| self.time(k)).collect()
    }

    /// Index of the sample closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let k = ((t - self.start) / self.step()).round();
        k.clamp(0.0, (self.samples - 1) as f64) as usize
    }

    /// Grid with twice the resolution over the same interval.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid { samples: 2 * self.samples - 1, ..*self }
    }
}

/// Finite-difference weights for the first derivative at sample `k` of a series of
/// length `len` with unit spacing: fourth order everywhere (one-sided near the ends).
pub fn derivative_stencil(k: usize, len: usize) -> Vec<(usize, f64)> {
    assert!(len >= 5, "derivative stencil needs at least 5 samples");
    let w = |offsets: [f64; 5], base: usize| -> Vec<(usize, f64)> {
        offsets.iter().enumerate().map(|(j, &c)| (base + j, c / 12.0)).collect()
    };
    if k >= 2 && k + 2 < len {
        w([1.0, -8.0, 0.0, 8.0, -1.0], k - 2)
    } else if k == 0 {
        w([-25.0, 48.0, -36.0, 16.0, -3.0], 0)
    } else if k == 1 {
        w([-3.0, -10.0, 18.0, -6.0, 1.0], 0)
    } else if k + 1 == len {
        w([3.0, -16.0, 36.0, -48.0, 25.0], len - 5)
    } else {
        w([-1.0, 6.0, -18.0, 10.0, 3.0], len - 5)
    }
}

/// Derivative of a uniformly sampled real series.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    (0..values.len())
        .map(|k| derivative_stencil(k, values.len()).iter().map(|&(j, c)| c * values[j]).sum::<f64>() / h)
        .collect()
}

/// Running integral `I_k = int_{t_0}^{t_k} f`, exact for cubics away from the ends.
pub fn cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for k in 0..n - 1 {
        let piece = if n < 4 {
            0.5 * h * (values[k] + values[k + 1])
        } else if k == 0 {
            h / 24.0 * (9.0 * values[0] + 19.0 * values[1] - 5.0 * values[2] + values[3])
        } else if k + 2 == n {
            h / 24.0 * (9.0 * values[k + 1] + 19.0 * values[k] - 5.0 * values[k - 1] + values[k - 2])
        } else {
            h / 24.0 * (-values[k - 1] + 13.0 * values[k] + 13.0 * values[k + 1] - values[k + 2])
        };
        out[k + 1] = out[k] + piece;
    }
    out
}

/// Composite Simpson rule over a uniformly sampled series; an even number of
/// samples closes with Simpson's 3/8 rule on the last three intervals.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ if n % 2 == 1 => {
            let mut acc = values[0] + values[n - 1];
            for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
                acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            acc * h / 3.0
        }
        _ => {
            let head = simpson(&values[..n - 3], h);
            let t = &values[n - 4..];
            head + 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3])
        }
    }
}

/// Result of a refined Simpson quadrature.
#[derive(Debug, Clone, Copy)]
pub struct RefinedIntegral {
    pub value: f64,
    pub samples: usize,
    pub relative_change: f64,
}

/// Composite Simpson on `[a, b]`, doubling the sample count until two successive
/// estimates agree to `rel_tol` (or `max_doublings` is exhausted).
pub fn simpson_refined<F>(mut f: F, a: f64, b: f64, initial: usize, rel_tol: f64, max_doublings: usize) -> RefinedIntegral
where
    F: FnMut(f64) -> f64,
{
    if b <= a {
        return RefinedIntegral { value: 0.0, samples: 0, relative_change: 0.0 };
    }
    let mut samples = initial.max(3) | 1;
    let mut h = (b - a) / (samples - 1) as f64;
    let mut values: Vec<f64> = (0..samples).map(|k| f(a + k as f64 * h)).collect();
    let mut previous = simpson(&values, h);
    let mut change = f64::INFINITY;
    for _ in 0..max_doublings {
        let mut next = Vec::with_capacity(2 * samples - 1);
        for k in 0..samples - 1 {
            next.push(values[k]);
            next.push(f(a + (k as f64 + 0.5) * h));
        }
        next.push(values[samples - 1]);
        values = next;
        samples = values.len();
        h *= 0.5;
        let current = simpson(&values, h);
        change = (current - previous).abs() / current.abs().max(f64::MIN_POSITIVE);
        previous = current;
        if change < rel_tol {
            break;
        }
    }
    RefinedIntegral { value: previous, samples, relative_change: change }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_refinement() {
        let g = TimeGrid::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(10), 1.0);
        assert!((g.step() - 0.1).abs() < 1e-15);
        assert_eq!(g.refined().samples, 21);
        assert_eq!(g.nearest(0.52), 5);
        assert!(TimeGrid::new(1.0, 1.0, 11).is_err());
    }

    #[test]
    fn derivative_is_exact_for_quartics() {
        let h = 0.1;
        let f = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) - 0.25 * t.powi(4);
        let df = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t - t.powi(3);
        let vals: Vec<f64> = (0..12).map(|k| f(k as f64 * h)).collect();
        let d = derivative(&vals, h);
        for (k, v) in d.iter().enumerate() {
            assert!((v - df(k as f64 * h)).abs() < 1e-11, "k={k} {v}");
        }
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let h = 0.01;
        let vals: Vec<f64> = (0..301).map(|k| (k as f64 * h).cos()).collect();
        let c = cumulative(&vals, h);
        for (k, v) in c.iter().enumerate() {
            assert!((v - (k as f64 * h).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn simpson_odd_and_even_counts() {
        for n in [9usize, 10, 101, 100] {
            let h = std::f64::consts::PI / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|k| (k as f64 * h).sin()).collect();
            assert!((simpson(&vals, h) - 2.0).abs() < 1e-3, "n={n}");
        }
    }

    #[test]
    fn refined_simpson_converges() {
        let r = simpson_refined(|t| (-t).exp(), 0.0, 3.0, 9, 1e-12, 20);
        assert!((r.value - (1.0 - (-3.0f64).exp())).abs() < 1e-11);
        assert!(r.relative_change < 1e-12);
    }
}
