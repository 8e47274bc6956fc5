//! Scenario runner: model, eigencurves, frame, criteria, bounds and propagation in one pass,
//! with CSV series and a `summary.json` per scenario.

mod config;

pub use config::{
    Analysis, GridSpec, MatrixSpec, ModelSpec, Scenario, StueckelbergSpec, TermSpec, Thresholds, FAMILIES, MIN_SAMPLES,
    SCHEMA_VERSION,
};

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bound_report, jrs_bound, n_prime_series, BoundReport, NPrimeSeries, BOUND_SLACK};
use crate::error::{Error, Result};
use crate::frame::{build_frame, criteria_series, CriteriaSeries};
use crate::hamiltonian::{Family, HamiltonianModel, SchwingerParams};
use crate::propagator::{
    calibrate_theta, propagate, schwinger_analytic, schwinger_lab_unitary, transition_probabilities, EvolutionResult,
    StueckelbergPrediction, UNITARITY_TOL,
};
use crate::spectral::{eigencurves, EigenCurve, GaugeChoice};

/// Agreement required between the propagator and the Schwinger closed form.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    /// overrides the seed of random-model scenarios
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    /// the check passes when `value <= threshold`
    pub threshold: f64,
    pub pass: bool,
    /// series file the value is taken from
    pub source: String,
}

impl Verdict {
    fn new(name: &str, value: f64, threshold: f64, source: &str) -> Verdict {
        Verdict { name: name.into(), value, threshold, pass: value <= threshold, source: source.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StueckelbergRow {
    pub passages: usize,
    pub measured: f64,
    /// `p_1 sin^2(M Theta) / cos^2 Theta` with the Landau-Zener `p_1` and the configured `Theta`
    pub predicted: f64,
    /// same with the measured `p_1` and `Theta` calibrated from the measured `p_2`
    pub calibrated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StueckelbergSummary {
    pub p1_landau_zener: f64,
    pub p1_measured: f64,
    pub theta: f64,
    pub theta_calibrated: f64,
    pub weak_coupling: bool,
    pub large_amplitude: bool,
    pub rows: Vec<StueckelbergRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub max_standard: Option<f64>,
    pub max_generalized: Option<f64>,
    pub max_cond13: Option<f64>,
    pub final_cond14: Option<f64>,
    /// monotonicity changes of `Omega'_m / delta'_mm` per off-level
    pub monotonicity_changes: Option<Vec<usize>>,
    pub min_fidelity: Option<f64>,
    pub final_infidelity: Option<f64>,
    pub max_projector_distance: Option<f64>,
    pub max_phase_mismatch: Option<f64>,
    pub max_usual_phase_mismatch: Option<f64>,
    /// `min_t (key_bound - phase_mismatch)`
    pub key_bound_margin: Option<f64>,
    /// `min_t (phase_mismatch^2 - 2 (1 - fidelity))`, never negative in exact arithmetic
    pub phase_fidelity_margin: Option<f64>,
    /// `min_t (zeno_bound - (1 - fidelity))`
    pub zeno_margin: Option<f64>,
    /// `min_t (jrs_bound - (1 - fidelity))`
    pub jrs_margin: Option<f64>,
    pub final_key_bound: Option<f64>,
    /// Eq. (3) at the end of the grid with a refined quadrature
    pub jrs_total: Option<f64>,
    pub jrs_integral: Option<f64>,
    pub bw_converged_fraction: Option<f64>,
    pub max_bw_iterations: Option<usize>,
    pub max_unitarity_defect: Option<f64>,
    pub propagation_steps: Option<usize>,
    /// max entry of `U_numeric - U_closed_form` (Schwinger only)
    pub oracle_deviation: Option<f64>,
    /// max `| |U'_nn| - fidelity |` against the frame closed form (Schwinger only)
    pub oracle_fidelity_deviation: Option<f64>,
    pub stueckelberg: Option<StueckelbergSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub scenario: String,
    pub schema_version: u32,
    pub family: String,
    pub dimension: usize,
    pub tracked_level: usize,
    pub gauge: String,
    pub criteria_gauge: Option<String>,
    pub epsilon: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub seed: Option<u64>,
    /// measured: `1 - min fidelity` within the infidelity threshold
    pub adiabatic: Option<bool>,
    pub verdicts: Vec<Verdict>,
    /// set when the standard criterion and the measured evolution disagree
    pub discrepancy: Option<String>,
    pub series_paths: Vec<String>,
    pub summary: Summary,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

fn create(dir: &Path, name: &str, paths: &mut Vec<String>) -> Result<BufWriter<File>> {
    paths.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn max_of<'a>(it: impl IntoIterator<Item = &'a f64>) -> Option<f64> {
    it.into_iter().copied().reduce(f64::max)
}

fn min_of(it: impl IntoIterator<Item = f64>) -> Option<f64> {
    it.into_iter().reduce(f64::min)
}

fn effective_schwinger(model: &HamiltonianModel) -> Option<SchwingerParams> {
    match model.family() {
        Family::Schwinger(p) => Some(*p),
        Family::Rescaled { inner, epsilon } => match inner.as_ref() {
            Family::Schwinger(p) => Some(SchwingerParams { omega: p.omega * epsilon, ..*p }),
            _ => None,
        },
        _ => None,
    }
}

struct Pipeline {
    curve: EigenCurve,
    nprime: Option<NPrimeSeries>,
    criteria: Option<CriteriaSeries>,
    bounds: Option<BoundReport>,
    evolution: Option<EvolutionResult>,
}

fn compute(scenario: &Scenario, model: &HamiltonianModel) -> Result<Pipeline> {
    let grid = scenario.time_grid()?;
    let n = scenario.tracked_level;
    let curve = eigencurves(model, &grid, scenario.gauge)?;

    let criteria = if scenario.has(Analysis::Criteria) {
        let aligned = GaugeChoice::PancharatnamAligned { level: n };
        let own;
        let pcurve = if scenario.gauge == aligned {
            &curve
        } else {
            own = eigencurves(model, &grid, aligned)?;
            &own
        };
        let pframe = build_frame(pcurve, n)?;
        Some(criteria_series(pcurve, &pframe, model, scenario.norm)?)
    } else {
        None
    };

    let wants_frame = scenario.has(Analysis::Bounds) || scenario.has(Analysis::Bw) || scenario.has(Analysis::Propagate);
    let frame = if wants_frame { Some(build_frame(&curve, n)?) } else { None };
    let nprime = frame.as_ref().map(|f| n_prime_series(f, scenario.n_prime)).transpose()?;
    let bounds = match (&frame, &nprime) {
        (Some(f), Some(np)) if scenario.has(Analysis::Bounds) => Some(bound_report(model, &curve, f, np)?),
        _ => None,
    };
    let evolution = if scenario.has(Analysis::Propagate) {
        Some(propagate(model, &curve, n, nprime.as_ref(), scenario.propagation)?)
    } else {
        None
    };
    Ok(Pipeline { curve, nprime, criteria, bounds, evolution })
}

fn stueckelberg_summary(scenario: &Scenario) -> Result<Option<StueckelbergSummary>> {
    let (Some(spec), ModelSpec::CyclingLz(p)) = (&scenario.stueckelberg, &scenario.model) else {
        return Ok(None);
    };
    if !scenario.has(Analysis::Stueckelberg) {
        return Ok(None);
    }
    let mut counts = vec![1, 2];
    counts.extend(spec.passages.iter().copied());
    let measured = transition_probabilities(p, &counts, scenario.propagation)?;
    let prediction = match spec.theta {
        Some(th) => StueckelbergPrediction::with_theta(p, th),
        None => StueckelbergPrediction::landau_zener(p),
    };
    let theta_calibrated = calibrate_theta(measured[0], measured[1]);
    let calibrated = StueckelbergPrediction { p1: measured[0], theta: theta_calibrated };
    let rows = spec
        .passages
        .iter()
        .zip(&measured[2..])
        .map(|(&m, &pm)| StueckelbergRow { passages: m, measured: pm, predicted: prediction.p_m(m), calibrated: calibrated.p_m(m) })
        .collect();
    Ok(Some(StueckelbergSummary {
        p1_landau_zener: prediction.p1,
        p1_measured: measured[0],
        theta: prediction.theta,
        theta_calibrated,
        weak_coupling: p.weak_coupling(),
        large_amplitude: p.large_amplitude(),
        rows,
    }))
}

/// Runs one scenario and writes its series under `options.output_dir / <output name>`.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<DiagnosticReport> {
    run_in(scenario, &options.output_dir.join(scenario.output_name()), options.seed).map_err(|e| e.in_scenario(&scenario.name))
}

fn run_in(scenario: &Scenario, dir: &Path, seed: Option<u64>) -> Result<DiagnosticReport> {
    scenario.validate()?;
    let model = scenario.model(seed)?;
    let n = scenario.tracked_level;
    let p = compute(scenario, &model)?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let mut summary = Summary::default();
    let mut verdicts = Vec::new();
    let thr = scenario.thresholds;

    p.curve.write_csv(create(dir, "spectral.csv", &mut paths)?, n)?;

    if let Some(c) = &p.criteria {
        c.write_csv(create(dir, "criteria.csv", &mut paths)?)?;
        summary.max_standard = max_of(&c.standard);
        summary.max_generalized = max_of(c.generalized.iter().flatten());
        summary.max_cond13 = max_of(c.cond13.iter().flatten());
        summary.final_cond14 = c.cond14_integral.last().copied().flatten();
        summary.monotonicity_changes = Some(c.monotonicity_changes.clone());
        let items = [
            ("standard_criterion", summary.max_standard),
            ("generalized_criterion", summary.max_generalized),
            ("condition13", summary.max_cond13),
            ("condition14", summary.final_cond14),
        ];
        for (name, v) in items {
            if let Some(v) = v {
                verdicts.push(Verdict::new(name, v, thr.criteria, "criteria.csv"));
            }
        }
    }

    if let (Some(np), true) = (&p.nprime, scenario.has(Analysis::Bw)) {
        let mut w = csv::Writer::from_writer(create(dir, "bw.csv", &mut paths)?);
        w.write_record(["t", "e_prime", "bw_converged", "bw_iterations"])?;
        for k in 0..np.energies.len() {
            w.write_record([
                crate::fmt17(p.curve.grid().time(k)),
                crate::fmt17(np.energies[k]),
                np.bw_converged[k].to_string(),
                np.bw_iterations[k].to_string(),
            ])?;
        }
        w.flush()?;
        let converged = np.bw_converged.iter().filter(|&&b| b).count();
        summary.bw_converged_fraction = Some(converged as f64 / np.bw_converged.len() as f64);
        summary.max_bw_iterations = np.bw_iterations.iter().copied().max();
    }

    if let Some(b) = &p.bounds {
        b.write_csv(create(dir, "bounds.csv", &mut paths)?)?;
        summary.final_key_bound = b.key_bound.last().copied();
        let t_end = p.curve.grid().end;
        let jrs = jrs_bound(&model, &p.curve, n, t_end)?;
        summary.jrs_total = Some(jrs.total);
        summary.jrs_integral = Some(jrs.integral);
    }

    if let Some(e) = &p.evolution {
        e.write_csv(create(dir, "evolution.csv", &mut paths)?)?;
        let infidelity: Vec<f64> = e.fidelity.iter().map(|f| 1.0 - f).collect();
        summary.min_fidelity = Some(e.min_fidelity());
        summary.final_infidelity = infidelity.last().copied();
        summary.max_projector_distance = max_of(&e.projector_distance);
        summary.max_phase_mismatch = e.phase_mismatch.as_ref().and_then(|v| max_of(v));
        summary.phase_fidelity_margin =
            e.phase_mismatch.as_ref().and_then(|pm| min_of(pm.iter().zip(&infidelity).map(|(m, i)| m * m - 2.0 * i)));
        summary.max_usual_phase_mismatch = max_of(&e.usual_phase_mismatch);
        summary.max_unitarity_defect = Some(e.max_unitarity_defect);
        summary.propagation_steps = Some(e.accepted_steps);
        verdicts.push(Verdict::new("infidelity", 1.0 - e.min_fidelity(), thr.infidelity, "evolution.csv"));
        verdicts.push(Verdict::new("unitarity", e.max_unitarity_defect, UNITARITY_TOL, "evolution.csv"));
        if let Some(b) = &p.bounds {
            if let Some(pm) = &e.phase_mismatch {
                summary.key_bound_margin = min_of(b.key_bound.iter().zip(pm).map(|(kb, m)| kb - m));
            }
            summary.zeno_margin = min_of(b.zeno_bound.iter().zip(&infidelity).map(|(z, i)| z - i));
            summary.jrs_margin = min_of(b.jrs_bound.iter().zip(&infidelity).map(|(j, i)| j - i));
            for (name, margin, source) in [
                ("key_bound_dominates", summary.key_bound_margin, "bounds.csv"),
                ("zeno_bound_dominates", summary.zeno_margin, "bounds.csv"),
                ("jrs_bound_dominates", summary.jrs_margin, "bounds.csv"),
            ] {
                if let Some(m) = margin {
                    verdicts.push(Verdict::new(name, -m, BOUND_SLACK, source));
                }
            }
        }
        if scenario.has(Analysis::Oracles) {
            if let Some(sp) = effective_schwinger(&model) {
                let times = p.curve.times();
                let dev = times
                    .iter()
                    .zip(&e.unitaries)
                    .map(|(&t, u)| (u - schwinger_lab_unitary(&sp, t)).iter().fold(0.0f64, |a, z| a.max(z.norm())))
                    .fold(0.0, f64::max);
                let fdev = times
                    .iter()
                    .zip(&e.fidelity)
                    .map(|(&t, f)| (schwinger_analytic(&sp, n, t)[(0, 0)].norm() - f).abs())
                    .fold(0.0, f64::max);
                summary.oracle_deviation = Some(dev);
                summary.oracle_fidelity_deviation = Some(fdev);
                verdicts.push(Verdict::new("schwinger_oracle", dev, ORACLE_TOL, "evolution.csv"));
            }
        }
    }

    if let Some(st) = stueckelberg_summary(scenario)? {
        let mut w = csv::Writer::from_writer(create(dir, "stueckelberg.csv", &mut paths)?);
        w.write_record(["passages", "measured", "predicted", "calibrated"])?;
        for r in &st.rows {
            w.write_record([r.passages.to_string(), crate::fmt17(r.measured), crate::fmt17(r.predicted), crate::fmt17(r.calibrated)])?;
        }
        w.flush()?;
        summary.stueckelberg = Some(st);
    }

    let adiabatic = p.evolution.as_ref().map(|e| 1.0 - e.min_fidelity() <= thr.infidelity);
    let discrepancy = match (summary.max_standard, adiabatic) {
        (Some(s), Some(false)) if s <= thr.criteria => Some(format!(
            "standard criterion {s:.3e} is below {} but the evolution is not adiabatic (min fidelity {:.6})",
            thr.criteria,
            summary.min_fidelity.unwrap_or(f64::NAN)
        )),
        (Some(s), Some(true)) if s > thr.criteria => {
            Some(format!("standard criterion {s:.3e} exceeds {} although the evolution is adiabatic", thr.criteria))
        }
        _ => None,
    };
    let grid = p.curve.grid();
    let seed = match scenario.model {
        ModelSpec::Random { seed: own, .. } => Some(seed.or(own).unwrap_or(0)),
        _ => None,
    };
    let report = DiagnosticReport {
        scenario: scenario.name.clone(),
        schema_version: scenario.schema_version,
        family: model_family_name(&scenario.model).into(),
        dimension: model.dimension(),
        tracked_level: n,
        gauge: scenario.gauge.to_string(),
        criteria_gauge: p.criteria.as_ref().map(|c| c.gauge.to_string()),
        epsilon: scenario.epsilon,
        t_start: grid.start,
        t_end: grid.end,
        samples: grid.samples,
        seed,
        adiabatic,
        verdicts,
        discrepancy,
        series_paths: paths,
        summary,
        output_dir: dir.to_path_buf(),
    };
    let mut out = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut out, &report)?;
    std::io::Write::write_all(&mut out, b"\n")?;
    Ok(report)
}

fn model_family_name(spec: &ModelSpec) -> &'static str {
    match spec {
        ModelSpec::Schwinger(_) => "schwinger",
        ModelSpec::CyclingLz(_) => "cycling_lz",
        ModelSpec::TwoLevel(_) => "two_level",
        ModelSpec::Interpolating { .. } => "interpolating",
        ModelSpec::Terms { .. } => "terms",
        ModelSpec::Random { .. } => "random",
        ModelSpec::Tabulated { .. } => "tabulated",
    }
}

/// Independent runs over `values` of `parameter`, in parallel, each in its own
/// `<output>/<parameter>=<value>` directory, plus a combined `sweep.csv`.
pub fn sweep(scenario: &Scenario, parameter: &str, values: &[f64], options: &RunOptions) -> Result<Vec<DiagnosticReport>> {
    let wrap = |e: Error| e.in_scenario(&scenario.name);
    if values.is_empty() {
        return Err(wrap(Error::Config(format!("sweep over `{parameter}` has no values"))));
    }
    let points = values.iter().map(|&v| scenario.with_parameter(parameter, v)).collect::<Result<Vec<_>>>().map_err(wrap)?;
    let root = options.output_dir.join(scenario.output_name());
    let reports = points
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, v)| run_in(s, &root.join(format!("{parameter}={v}")), options.seed))
        .collect::<Result<Vec<_>>>()
        .map_err(wrap)?;
    write_sweep_table(&root.join("sweep.csv"), parameter, values, &reports).map_err(wrap)?;
    Ok(reports)
}

fn write_sweep_table(path: &Path, parameter: &str, values: &[f64], reports: &[DiagnosticReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        parameter,
        "max_standard",
        "max_generalized",
        "min_fidelity",
        "final_infidelity",
        "jrs_total",
        "jrs_integral",
        "final_key_bound",
        "passages",
        "p_measured",
        "p_predicted",
    ])?;
    let cell = |v: Option<f64>| v.map(crate::fmt17).unwrap_or_default();
    for (v, r) in values.iter().zip(reports) {
        let s = &r.summary;
        let st = s.stueckelberg.as_ref().and_then(|x| x.rows.first());
        w.write_record([
            crate::fmt17(*v),
            cell(s.max_standard),
            cell(s.max_generalized),
            cell(s.min_fidelity),
            cell(s.final_infidelity),
            cell(s.jrs_total),
            cell(s.jrs_integral),
            cell(s.final_key_bound),
            st.map(|x| x.passages.to_string()).unwrap_or_default(),
            cell(st.map(|x| x.measured)),
            cell(st.map(|x| x.predicted)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl DiagnosticReport {
    /// `key: value` lines for the terminal.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k:<24} {v}\n"));
        line("scenario", self.scenario.clone());
        line("family", format!("{} (N = {}, tracked level {})", self.family, self.dimension, self.tracked_level));
        line("gauge", self.gauge.clone());
        line("grid", format!("[{}, {}] x {}", self.t_start, self.t_end, self.samples));
        if let Some(a) = self.adiabatic {
            line("adiabatic", a.to_string());
        }
        for v in &self.verdicts {
            let mark = if v.pass { "pass" } else { "FAIL" };
            line(&v.name, format!("{mark}  {:.6e} <= {:.3e}", v.value, v.threshold));
        }
        if let Some(st) = &self.summary.stueckelberg {
            for r in &st.rows {
                line(&format!("p_{}", r.passages), format!("measured {:.6e}  predicted {:.6e}  calibrated {:.6e}", r.measured, r.predicted, r.calibrated));
            }
        }
        if let Some(d) = &self.discrepancy {
            line("discrepancy", d.clone());
        }
        line("output", self.output_dir.display().to_string());
        out
    }
}
