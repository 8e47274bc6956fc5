use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside model domain [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },

    #[error("matrix at t = {t} is not Hermitian (deviation {deviation:.3e}, tolerance {tolerance:.3e})")]
    Hermiticity { t: f64, deviation: f64, tolerance: f64 },

    #[error("levels {m} and {n} are degenerate at t = {t} (gap {gap:.3e})")]
    Degeneracy { t: f64, m: usize, n: usize, gap: f64 },

    #[error("level matching lost continuity between t = {t0} and t = {t1} (overlap {overlap:.3})")]
    Continuity { t0: f64, t1: f64, overlap: f64 },

    #[error("argument of <{m}|d{n}/dt> undefined at t = {t} (modulus {modulus:.3e})")]
    UndefinedArg { t: f64, m: usize, n: usize, modulus: f64 },

    #[error("detuning block is numerically singular at t = {t} (smallest singular value {sigma_min:.3e})")]
    SingularBlock { t: f64, sigma_min: f64 },

    #[error("Brillouin-Wigner iteration failed at t = {t}: {reason}")]
    Convergence { t: f64, reason: String },

    #[error("step size underflow at t = {t} (step {step:.3e} below {min_step:.3e})")]
    StepUnderflow { t: f64, step: f64, min_step: f64 },

    #[error("gauge {found} cannot be used here, {expected} required")]
    Gauge { expected: &'static str, found: String },

    #[error("invalid scenario: {0}")]
    Config(String),

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_scenario(self, scenario: &str) -> Error {
        Error::Scenario { scenario: scenario.to_string(), source: Box::new(self) }
    }
}
