//! Instantaneous eigendecompositions along a time grid.
//!
//! Levels are matched across samples by maximal overlap. Eigenvectors are stored in a
//! smooth reference gauge (dominant component real and positive) whose connection
//! `<m|dm/dt>` is known in closed form from `dH/dt`; the physical gauge requested by the
//! caller is then a set of phases `theta_m(t)` on top of it.

use std::fmt;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::linalg::{eigh, spectral_norm, CMat, CVec, I};
use crate::quadrature::{cumulative, TimeGrid};

/// Phase convention of the adiabatic basis `e^{i theta_m} |m>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeChoice {
    /// `<m|dm/dt> = 0`
    ParallelTransport,
    /// `theta_m = int i<m|dm/dt> - int E_m`, which empties the diagonal of `H'`.
    BerryDynamical,
    /// `theta_m = theta_n + arg(-i <m|dn/dt>)` for `m != n`: real couplings to level `n`.
    PancharatnamAligned { level: usize },
}

impl fmt::Display for GaugeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeChoice::ParallelTransport => write!(f, "parallel_transport"),
            GaugeChoice::BerryDynamical => write!(f, "berry_dynamical"),
            GaugeChoice::PancharatnamAligned { level } => write!(f, "pancharatnam_aligned({level})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralTolerances {
    /// relative to `||H||`
    pub degeneracy: f64,
    pub continuity_floor: f64,
    pub max_refinements: u32,
    /// relative to `||dH/dt|| / gap`
    pub arg_floor: f64,
}

impl Default for SpectralTolerances {
    fn default() -> Self {
        SpectralTolerances { degeneracy: 1e-10, continuity_floor: 0.9, max_refinements: 12, arg_floor: 1e-12 }
    }
}

pub const EIG_RESIDUAL_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const GAUGE_TOL: f64 = 1e-8;
pub const CROSS_CHECK_TOL: f64 = 1e-6;

/// Continuity-tracked, gauge-fixed eigenvalues and eigenvectors on a time grid.
#[derive(Debug, Clone)]
pub struct EigenCurve {
    grid: TimeGrid,
    gauge: GaugeChoice,
    real: bool,
    energies: Vec<Vec<f64>>,
    /// reference-gauge eigenvectors as columns
    vectors: Vec<CMat>,
    hamiltonians: Vec<CMat>,
    hdots: Vec<CMat>,
    /// `<m|dj/dt>` in the reference gauge, entry `(m, j)`
    couplings: Vec<CMat>,
    phases: Vec<Vec<f64>>,
    phase_rates: Vec<Vec<f64>>,
    /// `arg_missing[k][m]`: Pancharatnam argument undefined at sample k
    arg_missing: Vec<Vec<bool>>,
}

/// Local and global spectral gaps of one level along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSeries {
    pub local_gap: Vec<f64>,
    pub global_gap: Vec<f64>,
}

struct Sample {
    energies: Vec<f64>,
    vectors: CMat,
}

fn decompose(model: &HamiltonianModel, t: f64) -> Result<Sample> {
    let h = model.eval(t)?;
    let (energies, vectors) = eigh(&h);
    Ok(Sample { energies, vectors })
}

/// Greedy maximal-overlap assignment; `perm[m]` is the column of `next` continuing level `m`.
fn match_levels(prev: &CMat, next: &CMat) -> (Vec<usize>, f64) {
    let n = prev.ncols();
    let overlaps = prev.adjoint() * next;
    let mut pairs: Vec<(usize, usize, f64)> =
        (0..n).flat_map(|m| (0..n).map(move |j| (m, j))).map(|(m, j)| (m, j, overlaps[(m, j)].norm())).collect();
    pairs.sort_by(|a, b| {
        b.2.total_cmp(&a.2).then_with(|| a.0.abs_diff(a.1).cmp(&b.0.abs_diff(b.1))).then_with(|| a.0.cmp(&b.0))
    });
    let mut perm = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut worst = f64::INFINITY;
    for (m, j, o) in pairs {
        if perm[m] == usize::MAX && !taken[j] {
            perm[m] = j;
            taken[j] = true;
            worst = worst.min(o);
        }
    }
    (perm, worst)
}

fn permute(sample: &Sample, perm: &[usize]) -> Sample {
    let n = perm.len();
    Sample {
        energies: perm.iter().map(|&j| sample.energies[j]).collect(),
        vectors: CMat::from_fn(n, n, |i, m| sample.vectors[(i, perm[m])]),
    }
}

/// Matches `target` to the already ordered `prev`, bisecting `[t0, t1]` when the overlap
/// drops below the continuity floor.
fn track(
    model: &HamiltonianModel,
    prev: &CMat,
    t0: f64,
    t1: f64,
    target: &Sample,
    depth: u32,
    tol: &SpectralTolerances,
) -> Result<Vec<usize>> {
    let (perm, worst) = match_levels(prev, &target.vectors);
    if worst >= tol.continuity_floor {
        return Ok(perm);
    }
    if depth >= tol.max_refinements {
        return Err(Error::Continuity { t0, t1, overlap: worst });
    }
    let mid = 0.5 * (t0 + t1);
    let mid_sample = decompose(model, mid)?;
    let perm_mid = track(model, prev, t0, mid, &mid_sample, depth + 1, tol)?;
    let ordered_mid = permute(&mid_sample, &perm_mid);
    track(model, &ordered_mid.vectors, mid, t1, target, depth + 1, tol)
}

fn dominant_component(v: &[C64]) -> usize {
    v.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).map(|(i, _)| i).unwrap_or(0)
}

/// Builds the eigencurve of `model` on `grid` in the requested gauge.
pub fn eigencurves(model: &HamiltonianModel, grid: &TimeGrid, gauge: GaugeChoice) -> Result<EigenCurve> {
    eigencurves_with(model, grid, gauge, &SpectralTolerances::default())
}

pub fn eigencurves_with(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    gauge: GaugeChoice,
    tol: &SpectralTolerances,
) -> Result<EigenCurve> {
    let n = model.dimension();
    if let GaugeChoice::PancharatnamAligned { level } = gauge {
        if level >= n {
            return Err(Error::Config(format!("gauge level {level} out of range for dimension {n}")));
        }
    }
    let times = grid.times();

    let raw: Vec<(CMat, CMat, Sample)> = times
        .par_iter()
        .map(|&t| -> Result<_> {
            let h = model.eval(t)?;
            let hdot = model.eval_derivative(t, 1)?;
            let (energies, vectors) = eigh(&h);
            let scale = spectral_norm(&h).max(f64::MIN_POSITIVE);
            for m in 0..n - 1 {
                let gap = energies[m + 1] - energies[m];
                if gap < tol.degeneracy * scale {
                    return Err(Error::Degeneracy { t, m, n: m + 1, gap });
                }
            }
            Ok((h, hdot, Sample { energies, vectors }))
        })
        .collect::<Result<_>>()?;

    let real = raw.iter().all(|(h, hdot, _)| h.iter().chain(hdot.iter()).all(|z| z.im == 0.0));

    // continuity matching and reference-gauge phase fixing (sequential)
    let mut hamiltonians = Vec::with_capacity(times.len());
    let mut hdots = Vec::with_capacity(times.len());
    let mut energies = Vec::with_capacity(times.len());
    let mut vectors: Vec<CMat> = Vec::with_capacity(times.len());
    // per level: reference component and the phase it is pinned to
    let mut reference: Vec<(usize, f64)> = Vec::with_capacity(n);
    let mut references = Vec::with_capacity(times.len());

    for (k, (h, hdot, sample)) in raw.into_iter().enumerate() {
        let mut ordered = if k == 0 {
            sample
        } else {
            let perm = track(model, &vectors[k - 1], times[k - 1], times[k], &sample, 0, tol)?;
            permute(&sample, &perm)
        };
        for m in 0..n {
            let col: Vec<C64> = ordered.vectors.column(m).iter().copied().collect();
            if k == 0 {
                let j = dominant_component(&col);
                reference.push((j, 0.0));
            } else {
                let (j, _) = reference[m];
                let top = col.iter().fold(0.0f64, |a, z| a.max(z.norm()));
                if col[j].norm() < 0.25 * top {
                    // hand the pin over to the new dominant component, keeping the vector continuous
                    let prev = vectors[k - 1].column(m);
                    let overlap: C64 = prev.iter().zip(&col).map(|(a, b)| a.conj() * b).sum();
                    let align = C64::from_polar(1.0, -overlap.arg());
                    for z in ordered.vectors.column_mut(m).iter_mut() {
                        *z *= align;
                    }
                    let jn = dominant_component(&col);
                    let pinned = ordered.vectors[(jn, m)].arg();
                    reference[m] = (jn, if real { snap_real(pinned) } else { pinned });
                    continue;
                }
            }
            let (j, pinned) = reference[m];
            let rot = C64::from_polar(1.0, pinned - ordered.vectors[(j, m)].arg());
            for z in ordered.vectors.column_mut(m).iter_mut() {
                *z *= rot;
                if real {
                    z.im = 0.0;
                }
            }
        }
        hamiltonians.push(h);
        hdots.push(hdot);
        energies.push(ordered.energies);
        vectors.push(ordered.vectors);
        references.push(reference.clone());
    }

    // <m|dj/dt> in the reference gauge
    let couplings: Vec<CMat> = (0..times.len())
        .map(|k| {
            let v = &vectors[k];
            let e = &energies[k];
            let mut cpl = v.adjoint() * &hdots[k] * v;
            for m in 0..n {
                for j in 0..n {
                    if m != j {
                        cpl[(m, j)] /= e[j] - e[m];
                    }
                }
            }
            for m in 0..n {
                let (jc, pinned) = references[k][m];
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..n {
                    if l != m {
                        acc += v[(jc, l)] * cpl[(l, m)];
                    }
                }
                let a = -(acc * C64::from_polar(1.0, -pinned)).im / v[(jc, m)].norm();
                cpl[(m, m)] = I * a;
            }
            cpl
        })
        .collect();

    let h = grid.step();
    let connection = |m: usize| -> Vec<f64> { couplings.iter().map(|c| -c[(m, m)].im).collect() };
    let mut phase_rates = vec![vec![0.0; n]; times.len()];
    let mut phases = vec![vec![0.0; n]; times.len()];
    let mut arg_missing = vec![vec![false; n]; times.len()];
    let set_level = |m: usize, rate: &[f64], phase: &[f64], phase_rates: &mut Vec<Vec<f64>>, phases: &mut Vec<Vec<f64>>| {
        for k in 0..times.len() {
            phase_rates[k][m] = rate[k];
            phases[k][m] = phase[k];
        }
    };
    match gauge {
        GaugeChoice::ParallelTransport => {
            for m in 0..n {
                let rate = connection(m);
                let phase = cumulative(&rate, h);
                set_level(m, &rate, &phase, &mut phase_rates, &mut phases);
            }
        }
        GaugeChoice::BerryDynamical => {
            for m in 0..n {
                let rate: Vec<f64> = connection(m).iter().zip(&energies).map(|(a, e)| a - e[m]).collect();
                let phase = cumulative(&rate, h);
                set_level(m, &rate, &phase, &mut phase_rates, &mut phases);
            }
        }
        GaugeChoice::PancharatnamAligned { level } => {
            // d/dt arg <m|dn/dt> in closed form, which needs d^2H/dt^2
            let arg_rates: Vec<Vec<f64>> = times
                .par_iter()
                .enumerate()
                .map(|(k, &t)| -> Result<Vec<f64>> {
                    let hddot = model.eval_derivative(t, 2)?;
                    Ok(coupling_arg_rates(&vectors[k], &energies[k], &hdots[k], &hddot, &couplings[k], level))
                })
                .collect::<Result<_>>()?;
            let rate_n = connection(level);
            let phase_n = cumulative(&rate_n, h);
            set_level(level, &rate_n, &phase_n, &mut phase_rates, &mut phases);
            for m in (0..n).filter(|&m| m != level) {
                let mut args: Vec<Option<f64>> = Vec::with_capacity(times.len());
                for k in 0..times.len() {
                    let z = -I * couplings[k][(m, level)];
                    let gap = local_gap(&energies[k], level);
                    let floor = tol.arg_floor * spectral_norm(&hdots[k]) / gap;
                    if z.norm() < floor || z.norm() == 0.0 {
                        arg_missing[k][m] = true;
                        args.push(None);
                    } else {
                        args.push(Some(z.arg()));
                    }
                }
                let unwrapped = unwrap_mod_pi(&args);
                let rate_rel = fill_gaps(&(0..times.len()).map(|k| (!arg_missing[k][m]).then(|| arg_rates[k][m])).collect::<Vec<_>>());
                let rate: Vec<f64> = rate_rel.iter().zip(&rate_n).map(|(r, a)| r + a).collect();
                let phase: Vec<f64> = unwrapped.iter().zip(&phase_n).map(|(u, p)| u + p).collect();
                set_level(m, &rate, &phase, &mut phase_rates, &mut phases);
            }
        }
    }

    Ok(EigenCurve { grid: *grid, gauge, real, energies, vectors, hamiltonians, hdots, couplings, phases, phase_rates, arg_missing })
}

/// `d/dt arg C_{m,level}` for every `m`, from
/// `dC_{mn}/dt = [dG_{mn}/dt (E_n - E_m) - G_{mn} (G_nn - G_mm)] / (E_n - E_m)^2`
/// with `G = V^dagger (dH/dt) V` and `dG/dt = C^dagger G + V^dagger (d^2H/dt^2) V + G C`.
fn coupling_arg_rates(v: &CMat, e: &[f64], hdot: &CMat, hddot: &CMat, cpl: &CMat, level: usize) -> Vec<f64> {
    let g = v.adjoint() * hdot * v;
    let dg = cpl.adjoint() * &g + v.adjoint() * hddot * v + &g * cpl;
    (0..e.len())
        .map(|m| {
            if m == level {
                return 0.0;
            }
            let gap = e[level] - e[m];
            let cmn = cpl[(m, level)];
            let dc = (dg[(m, level)] * gap - g[(m, level)] * (g[(level, level)] - g[(m, m)])) / (gap * gap);
            (dc * cmn.conj()).im / cmn.norm_sqr()
        })
        .collect()
}

/// Linear interpolation across `None` entries; constant extrapolation at the ends.
pub(crate) fn fill_gaps(values: &[Option<f64>]) -> Vec<f64> {
    let known: Vec<usize> = (0..values.len()).filter(|&k| values[k].is_some()).collect();
    if known.is_empty() {
        return vec![0.0; values.len()];
    }
    (0..values.len())
        .map(|k| match values[k] {
            Some(v) => v,
            None => match known.iter().position(|&j| j > k) {
                Some(0) => values[known[0]].unwrap(),
                None => values[*known.last().unwrap()].unwrap(),
                Some(p) => {
                    let (a, b) = (known[p - 1], known[p]);
                    let (va, vb) = (values[a].unwrap(), values[b].unwrap());
                    va + (vb - va) * (k - a) as f64 / (b - a) as f64
                }
            },
        })
        .collect()
}

fn snap_real(phase: f64) -> f64 {
    if phase.abs() < std::f64::consts::FRAC_PI_2 {
        0.0
    } else {
        std::f64::consts::PI
    }
}

/// Continuous (modulo pi) unwrapping of a sampled argument; gaps are filled linearly.
pub(crate) fn unwrap_mod_pi(args: &[Option<f64>]) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut out: Vec<Option<f64>> = vec![None; args.len()];
    let mut last: Option<f64> = None;
    for (k, a) in args.iter().enumerate() {
        if let Some(a) = *a {
            let v = match last {
                None => a,
                Some(prev) => a + PI * ((prev - a) / PI).round(),
            };
            out[k] = Some(v);
            last = Some(v);
        }
    }
    fill_gaps(&out)
}

fn local_gap(energies: &[f64], n: usize) -> f64 {
    energies
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != n)
        .map(|(_, e)| (e - energies[n]).abs())
        .fold(f64::INFINITY, f64::min)
}

fn global_gap(energies: &[f64]) -> f64 {
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

impl EigenCurve {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.nrows())
    }

    pub fn gauge(&self) -> GaugeChoice {
        self.gauge
    }

    /// True when every sampled `H` and `dH/dt` is real.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn energies(&self, k: usize) -> &[f64] {
        &self.energies[k]
    }

    pub fn energy(&self, k: usize, m: usize) -> f64 {
        self.energies[k][m]
    }

    pub fn hamiltonian(&self, k: usize) -> &CMat {
        &self.hamiltonians[k]
    }

    pub fn hdot(&self, k: usize) -> &CMat {
        &self.hdots[k]
    }

    /// Gauge phase `theta_m(t_k)` relative to the reference gauge.
    pub fn phase(&self, k: usize, m: usize) -> f64 {
        self.phases[k][m]
    }

    pub fn phase_rate(&self, k: usize, m: usize) -> f64 {
        self.phase_rates[k][m]
    }

    pub fn arg_missing(&self, k: usize, m: usize) -> bool {
        self.arg_missing[k][m]
    }

    /// Reference-gauge eigenvector `|m(t_k)>`.
    pub fn reference_vector(&self, k: usize, m: usize) -> CVec {
        self.vectors[k].column(m).into_owned()
    }

    /// `<m|dj/dt>` between reference-gauge vectors.
    pub fn reference_coupling(&self, k: usize, m: usize, j: usize) -> C64 {
        self.couplings[k][(m, j)]
    }

    /// Gauge-fixed basis vector `e^{i theta_m} |m(t_k)>`.
    pub fn vector(&self, k: usize, m: usize) -> CVec {
        self.reference_vector(k, m) * C64::from_polar(1.0, self.phases[k][m])
    }

    /// Matrix `P(t_k)` whose columns are the gauge-fixed basis vectors.
    pub fn basis(&self, k: usize) -> CMat {
        let n = self.dimension();
        let mut p = self.vectors[k].clone();
        for m in 0..n {
            let ph = C64::from_polar(1.0, self.phases[k][m]);
            for z in p.column_mut(m).iter_mut() {
                *z *= ph;
            }
        }
        p
    }

    /// Time derivative of the gauge-fixed basis vector `m` at sample `k`.
    pub fn vector_derivative(&self, k: usize, m: usize) -> CVec {
        let n = self.dimension();
        let v = &self.vectors[k];
        let mut d = CVec::zeros(n);
        for j in 0..n {
            d += v.column(j) * self.couplings[k][(j, m)];
        }
        d += v.column(m) * (I * self.phase_rates[k][m]);
        d * C64::from_polar(1.0, self.phases[k][m])
    }

    /// `<m|dH/dt|n> / (E_n - E_m)` between gauge-fixed vectors, i.e. `<m|dn/dt>`.
    pub fn coupling_matrix_element(&self, k: usize, m: usize, n: usize) -> Result<C64> {
        if m == n {
            return Err(Error::Config("coupling_matrix_element needs m != n".into()));
        }
        let e = &self.energies[k];
        let gap = (e[n] - e[m]).abs();
        let scale = spectral_norm(&self.hamiltonians[k]).max(f64::MIN_POSITIVE);
        if gap < SpectralTolerances::default().degeneracy * scale {
            return Err(Error::Degeneracy { t: self.grid.time(k), m, n, gap });
        }
        Ok(self.couplings[k][(m, n)] * C64::from_polar(1.0, self.phases[k][n] - self.phases[k][m]))
    }

    pub fn gaps(&self, n: usize) -> GapSeries {
        GapSeries {
            local_gap: self.energies.iter().map(|e| local_gap(e, n)).collect(),
            global_gap: self.energies.iter().map(|e| global_gap(e)).collect(),
        }
    }

    /// Writes `t, E_0..E_{N-1}, local_gap, global_gap` for level `n`.
    pub fn write_csv<W: std::io::Write>(&self, out: W, n: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.dimension();
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|m| format!("E_{m}")));
        header.push("local_gap".into());
        header.push("global_gap".into());
        w.write_record(&header)?;
        let gaps = self.gaps(n);
        for k in 0..self.len() {
            let mut row = vec![crate::fmt17(self.grid.time(k))];
            row.extend(self.energies[k].iter().map(|&e| crate::fmt17(e)));
            row.push(crate::fmt17(gaps.local_gap[k]));
            row.push(crate::fmt17(gaps.global_gap[k]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
