//! Declarative scenario files (TOML, `schema_version = 1`).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bounds::NPrimePolicy;
use crate::error::{Error, Result};
use crate::frame::NormKind;
use crate::hamiltonian::{
    random_smooth_model, CyclingLzParams, Family, HamiltonianModel, InterpolatingParams, Profile, SchwingerParams, Tabulated,
    Term, TwoLevelParams, HERMITICITY_TOL,
};
use crate::linalg::CMat;
use crate::propagator::StepControl;
use crate::quadrature::TimeGrid;
use crate::spectral::GaugeChoice;

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub tracked_level: usize,
    #[serde(default = "default_gauge")]
    pub gauge: GaugeChoice,
    pub grid: GridSpec,
    #[serde(default = "Analysis::all")]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub propagation: StepControl,
    #[serde(default)]
    pub n_prime: NPrimePolicy,
    #[serde(default)]
    pub norm: NormKind,
    /// runs `H(epsilon t)`; the grid is given in unscaled time and stretched by `1 / epsilon`
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stueckelberg: Option<StueckelbergSpec>,
    /// output subdirectory name, defaults to `name`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// directory relative paths in the file are resolved against
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_gauge() -> GaugeChoice {
    GaugeChoice::ParallelTransport
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Criteria,
    Bounds,
    Propagate,
    Bw,
    Oracles,
    Stueckelberg,
}

impl Analysis {
    pub fn all() -> Vec<Analysis> {
        vec![Analysis::Criteria, Analysis::Bounds, Analysis::Propagate, Analysis::Bw, Analysis::Oracles]
    }
}

/// Verdict thresholds: criteria must stay below `criteria`, `1 - min fidelity` below `infidelity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub criteria: f64,
    pub infidelity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { criteria: 0.1, infidelity: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StueckelbergSpec {
    pub passages: Vec<usize>,
    /// Stueckelberg phase for the prediction, `alpha / varpi` when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Real part plus optional imaginary part, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.re.len();
        let square = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if n == 0 || !square(&self.re) || !self.im.as_ref().is_none_or(square) {
            return Err(Error::Config("matrix must be square with matching real and imaginary parts".into()));
        }
        Ok(CMat::from_fn(n, n, |i, j| C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |m| m[i][j]))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub profile: Profile,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Schwinger(SchwingerParams),
    CyclingLz(CyclingLzParams),
    TwoLevel(TwoLevelParams),
    Interpolating { initial: MatrixSpec, last: MatrixSpec, total_time: f64 },
    Terms { terms: Vec<TermSpec> },
    /// smooth random model; the CLI `--seed` overrides `seed`
    Random { dimension: usize, seed: Option<u64> },
    /// CSV rows `t, Re H_00, Im H_00, Re H_01, ...`
    Tabulated { path: PathBuf },
}

/// Families accepted in `model.family`, with their parameters.
pub const FAMILIES: &[(&str, &str)] = &[
    ("schwinger", "omega0, theta, omega"),
    ("cycling_lz", "alpha, varpi, coupling"),
    ("two_level", "omega0, theta, phi (profiles)"),
    ("interpolating", "initial, last (matrices), total_time"),
    ("terms", "terms = [{ profile, matrix }]"),
    ("random", "dimension, seed"),
    ("tabulated", "path (CSV: t, Re H_00, Im H_00, Re H_01, ...)"),
];

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut scenario = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        scenario.base_dir = path.parent().map(Path::to_path_buf);
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that does not need the model itself.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version)));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        let g = &self.grid;
        if !(g.t_start.is_finite() && g.t_end.is_finite() && g.t_end > g.t_start) {
            return Err(Error::Config(format!("grid needs t_end > t_start, got [{}, {}]", g.t_start, g.t_end)));
        }
        if g.samples < MIN_SAMPLES {
            return Err(Error::Config(format!("grid needs at least {MIN_SAMPLES} samples, got {}", g.samples)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        for (name, v) in [("criteria", self.thresholds.criteria), ("infidelity", self.thresholds.infidelity)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("threshold `{name}` must be positive, got {v}")));
            }
        }
        if !(self.propagation.tolerance > 0.0) {
            return Err(Error::Config("propagation tolerance must be positive".into()));
        }
        if let Some(s) = &self.stueckelberg {
            if !matches!(self.model, ModelSpec::CyclingLz(_)) {
                return Err(Error::Config("stueckelberg analysis needs the cycling_lz family".into()));
            }
            if s.passages.is_empty() || s.passages.iter().any(|&m| m == 0 || m % 2 == 1) {
                return Err(Error::Config("stueckelberg passages must be a non-empty list of even counts".into()));
            }
        }
        if self.analyses.contains(&Analysis::Stueckelberg) && self.stueckelberg.is_none() {
            return Err(Error::Config("analysis `stueckelberg` needs a [stueckelberg] table".into()));
        }
        if let ModelSpec::Random { dimension, .. } = self.model {
            if !(2..=16).contains(&dimension) {
                return Err(Error::Config(format!("random model dimension must be in 2..=16, got {dimension}")));
            }
        }
        Ok(())
    }

    pub fn has(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// The unscaled model; `seed` overrides the random family's seed.
    pub fn base_model(&self, seed: Option<u64>) -> Result<HamiltonianModel> {
        let family = match &self.model {
            ModelSpec::Schwinger(p) => Family::Schwinger(*p),
            ModelSpec::CyclingLz(p) => Family::CyclingLz(*p),
            ModelSpec::TwoLevel(p) => Family::TwoLevel(p.clone()),
            ModelSpec::Interpolating { initial, last, total_time } => Family::Interpolating(InterpolatingParams {
                initial: initial.to_matrix()?,
                last: last.to_matrix()?,
                total_time: *total_time,
            }),
            ModelSpec::Terms { terms } => Family::Terms(
                terms
                    .iter()
                    .map(|t| Ok(Term { profile: t.profile.clone(), matrix: t.matrix.to_matrix()? }))
                    .collect::<Result<_>>()?,
            ),
            ModelSpec::Random { dimension, seed: own } => {
                return random_smooth_model(*dimension, seed.or(*own).unwrap_or(0));
            }
            ModelSpec::Tabulated { path } => {
                let path = self.resolve(path);
                if !path.exists() {
                    return Err(Error::Config(format!("tabulated file {} does not exist", path.display())));
                }
                Family::Tabulated(Arc::new(Tabulated::read_csv(&path, HERMITICITY_TOL)?))
            }
        };
        HamiltonianModel::new(family)
    }

    /// The model actually evolved, `H(epsilon t)`.
    pub fn model(&self, seed: Option<u64>) -> Result<HamiltonianModel> {
        let model = self.base_model(seed)?;
        if self.tracked_level >= model.dimension() {
            return Err(Error::Config(format!(
                "tracked_level {} out of range for a {}-level model",
                self.tracked_level,
                model.dimension()
            )));
        }
        model.rescaled(self.epsilon)
    }

    /// Grid in the time of the rescaled model.
    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.t_start / self.epsilon, self.grid.t_end / self.epsilon, self.grid.samples)
    }

    /// Copy with one parameter replaced, for sweeps. Besides the numeric fields of the model,
    /// accepts `M` (passage count, also stretching a cycling grid to `M T_1`), `epsilon`,
    /// `samples`, `t_start`, `t_end`, `tracked_level` and `tolerance`.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("parameter `{name}` needs a non-negative integer, got {v}")))
            }
        };
        match name {
            "M" | "passages" => {
                let m = as_count(value)?;
                let ModelSpec::CyclingLz(p) = &s.model else {
                    return Err(Error::Config("parameter `M` needs the cycling_lz family".into()));
                };
                s.grid.t_end = s.grid.t_start + m as f64 * p.half_period();
                let theta = s.stueckelberg.as_ref().and_then(|x| x.theta);
                s.stueckelberg = Some(StueckelbergSpec { passages: vec![m], theta });
                if !s.has(Analysis::Stueckelberg) {
                    s.analyses.push(Analysis::Stueckelberg);
                }
            }
            "epsilon" => s.epsilon = value,
            "samples" => s.grid.samples = as_count(value)?,
            "t_start" => s.grid.t_start = value,
            "t_end" => s.grid.t_end = value,
            "tracked_level" => s.tracked_level = as_count(value)?,
            "tolerance" => s.propagation.tolerance = value,
            _ => {
                let mut json = serde_json::to_value(&s.model)?;
                let family = json["family"].as_str().unwrap_or_default().to_string();
                let slot = json
                    .as_object_mut()
                    .and_then(|o| o.get_mut(name))
                    .filter(|v| v.is_number() || v.is_null())
                    .ok_or_else(|| Error::Config(format!("parameter `{name}` does not exist in family `{family}`")))?;
                *slot = if name == "seed" || name == "dimension" {
                    serde_json::Value::from(as_count(value)? as u64)
                } else {
                    serde_json::Value::from(value)
                };
                s.model = serde_json::from_value(json).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn output_name(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(&self.name))
    }
}
