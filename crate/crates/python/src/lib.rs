//! Python bindings. Reports cross the boundary as the same JSON the CLI writes, decoded
//! into plain dicts.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use adiabat::hamiltonian::{CyclingLzParams, SchwingerParams};
use adiabat::propagator::{schwinger_lab_unitary, transition_probabilities, StepControl};
use adiabat::scenario::{self, RunOptions, Scenario, FAMILIES};
use adiabat::Error;

fn py_err(e: Error) -> PyErr {
    let inner = match &e {
        Error::Scenario { source, .. } => source.as_ref(),
        other => other,
    };
    match inner {
        Error::Config(_) | Error::Domain { .. } | Error::Hermiticity { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyDict>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import_bound("json")?.call_method1("loads", (text,))?.downcast_into::<PyDict>().map_err(Into::into)
}

fn options(output_dir: PathBuf, seed: Option<u64>) -> RunOptions {
    RunOptions { output_dir, seed }
}

/// Family names and their parameters.
#[pyfunction]
fn list_families() -> Vec<(&'static str, &'static str)> {
    FAMILIES.to_vec()
}

/// Runs a scenario file and returns its summary report.
#[pyfunction]
#[pyo3(signature = (config, output_dir = PathBuf::from("out"), seed = None))]
fn run<'py>(py: Python<'py>, config: PathBuf, output_dir: PathBuf, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let s = Scenario::from_path(&config).map_err(py_err)?;
    let report = py.allow_threads(|| scenario::run(&s, &options(output_dir, seed))).map_err(py_err)?;
    to_dict(py, &report)
}

/// Like `run`, but from TOML text.
#[pyfunction]
#[pyo3(signature = (text, output_dir = PathBuf::from("out"), seed = None))]
fn run_toml<'py>(py: Python<'py>, text: &str, output_dir: PathBuf, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let s = Scenario::from_toml_str(text).map_err(py_err)?;
    let report = py.allow_threads(|| scenario::run(&s, &options(output_dir, seed))).map_err(py_err)?;
    to_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (config, param, values, output_dir = PathBuf::from("out"), seed = None))]
fn sweep<'py>(
    py: Python<'py>,
    config: PathBuf,
    param: &str,
    values: Vec<f64>,
    output_dir: PathBuf,
    seed: Option<u64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let s = Scenario::from_path(&config).map_err(py_err)?;
    let reports = py.allow_threads(|| scenario::sweep(&s, param, &values, &options(output_dir, seed))).map_err(py_err)?;
    reports.iter().map(|r| to_dict(py, r)).collect()
}

/// Closed-form lab-frame propagator of the rotating-field model, as nested rows.
#[pyfunction]
fn schwinger_unitary(omega0: f64, theta: f64, omega: f64, t: f64) -> Vec<Vec<Complex64>> {
    let u = schwinger_lab_unitary(&SchwingerParams { omega0, theta, omega }, t);
    (0..2).map(|i| (0..2).map(|j| u[(i, j)]).collect()).collect()
}

/// Non-adiabatic probability after each passage count on the cycling model.
#[pyfunction]
#[pyo3(signature = (alpha, varpi, coupling, passages, tolerance = 1e-10))]
fn multipassage(py: Python<'_>, alpha: f64, varpi: f64, coupling: f64, passages: Vec<usize>, tolerance: f64) -> PyResult<Vec<f64>> {
    let p = CyclingLzParams { alpha, varpi, coupling };
    py.allow_threads(|| transition_probabilities(&p, &passages, StepControl::with_tolerance(tolerance))).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "adiabat")]
pub fn adiabat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(list_families, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_toml, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(schwinger_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(multipassage, m)?)?;
    m.add("SCHEMA_VERSION", scenario::SCHEMA_VERSION)?;
    Ok(())
}
