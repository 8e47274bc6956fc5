use serde::{Deserialize, Serialize};

/// A smooth scalar function of time with analytic first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    /// `sum_k c_k t^k`
    Polynomial { coefficients: Vec<f64> },
    /// `offset + amplitude * cos(frequency * t + phase)`
    Cosine { offset: f64, amplitude: f64, frequency: f64, phase: f64 },
    /// `offset + amplitude * exp(rate * t)`
    Exponential { offset: f64, amplitude: f64, rate: f64 },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn linear(offset: f64, slope: f64) -> Self {
        Profile::Polynomial { coefficients: vec![offset, slope] }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    /// Value (`order = 0`) or derivative of order 1 or 2.
    pub fn derivative(&self, t: f64, order: u8) -> f64 {
        match self {
            Profile::Constant { value } => {
                if order == 0 {
                    *value
                } else {
                    0.0
                }
            }
            Profile::Polynomial { coefficients } => {
                let order = order as usize;
                coefficients
                    .iter()
                    .enumerate()
                    .skip(order)
                    .map(|(k, &c)| {
                        let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
                        c * falling * t.powi((k - order) as i32)
                    })
                    .sum()
            }
            Profile::Cosine { offset, amplitude, frequency, phase } => {
                let arg = frequency * t + phase;
                match order {
                    0 => offset + amplitude * arg.cos(),
                    1 => -amplitude * frequency * arg.sin(),
                    _ => -amplitude * frequency * frequency * arg.cos(),
                }
            }
            Profile::Exponential { offset, amplitude, rate } => {
                let e = amplitude * (rate * t).exp();
                match order {
                    0 => offset + e,
                    1 => rate * e,
                    _ => rate * rate * e,
                }
            }
        }
    }

    /// The three-vector `(f, f', f'')` at `t`.
    pub fn jet(&self, t: f64) -> [f64; 3] {
        [self.derivative(t, 0), self.derivative(t, 1), self.derivative(t, 2)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let p = Profile::Polynomial { coefficients: vec![1.0, -2.0, 3.0, 0.5] };
        let t = 0.7;
        assert!((p.value(t) - (1.0 - 2.0 * t + 3.0 * t * t + 0.5 * t.powi(3))).abs() < 1e-14);
        assert!((p.derivative(t, 1) - (-2.0 + 6.0 * t + 1.5 * t * t)).abs() < 1e-14);
        assert!((p.derivative(t, 2) - (6.0 + 3.0 * t)).abs() < 1e-14);
    }

    #[test]
    fn cosine_and_exponential_match_finite_differences() {
        let profiles = [
            Profile::Cosine { offset: 0.2, amplitude: 1.5, frequency: 2.0, phase: 0.3 },
            Profile::Exponential { offset: -1.0, amplitude: 0.5, rate: -0.8 },
        ];
        let h = 1e-4;
        for p in &profiles {
            for &t in &[0.0, 0.4, 1.3] {
                let fd1 = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
                let fd2 = (p.value(t + h) - 2.0 * p.value(t) + p.value(t - h)) / (h * h);
                assert!((fd1 - p.derivative(t, 1)).abs() < 1e-7);
                assert!((fd2 - p.derivative(t, 2)).abs() < 1e-5);
            }
        }
    }
}
