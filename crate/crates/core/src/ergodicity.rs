//! Time-averaged (Bogoliubov–Krylov) statistics, a dictionary lower bound on
//! the Lipschitz-dual distance between ensemble laws, mixing curves and
//! recurrence hitting times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticRow;
use crate::dynamics::{random_smooth_field, SimConfig, Simulation, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::noise::{NoiseSpec, RngStream};
use crate::spectral::{sobolev_norm, SpectralField};
use crate::stats::{trapezoid_window, wilson_interval};

/// Scalar functionals of the field, each 1-Lipschitz for the `H^1` norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    L2Norm,
    H1Norm,
    ReMode1,
    ImMode1,
    ReMode2,
}

impl Observable {
    pub const ALL: [Observable; 5] =
        [Observable::L2Norm, Observable::H1Norm, Observable::ReMode1, Observable::ImMode1, Observable::ReMode2];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::L2Norm => "norm0",
            Observable::H1Norm => "norm1",
            Observable::ReMode1 => "re_u1",
            Observable::ImMode1 => "im_u1",
            Observable::ReMode2 => "re_u2",
        }
    }

    /// Declared Lipschitz constant with respect to `||.||_1`.
    pub fn lipschitz(&self) -> f64 {
        1.0
    }

    pub fn evaluate(&self, u: &SpectralField) -> f64 {
        match self {
            Observable::L2Norm => sobolev_norm(u, 0.0),
            Observable::H1Norm => sobolev_norm(u, 1.0),
            Observable::ReMode1 => u.mode(1).re,
            Observable::ImMode1 => u.mode(1).im,
            Observable::ReMode2 => u.mode(2).re,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableDictionary {
    entries: Vec<Observable>,
}

impl Default for ObservableDictionary {
    fn default() -> Self {
        Self { entries: Observable::ALL.to_vec() }
    }
}

impl ObservableDictionary {
    pub fn new(entries: Vec<Observable>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("empty observable dictionary".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Observable] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn evaluate(&self, u: &SpectralField) -> Vec<f64> {
        self.entries.iter().map(|o| o.evaluate(u)).collect()
    }

    pub fn lipschitz(&self) -> Vec<f64> {
        self.entries.iter().map(Observable::lipschitz).collect()
    }

    /// Largest observed `|f(u) - f(v)| / ||u - v||_1` per entry over `pairs`
    /// random pairs, half of them close together.
    pub fn observed_lipschitz(&self, n_modes: usize, pairs: usize, rng: &mut RngStream) -> Vec<f64> {
        let mut worst = vec![0.0f64; self.len()];
        for i in 0..pairs {
            let scale = 1.0 + 3.0 * rng.standard_normal().abs();
            let u = &random_smooth_field(n_modes, n_modes, 1.0, rng) * scale;
            let v = if i % 2 == 0 {
                &random_smooth_field(n_modes, n_modes, 1.0, rng) * scale
            } else {
                &u + &(&random_smooth_field(n_modes, n_modes, 0.5, rng) * 1e-3)
            };
            let d = sobolev_norm(&(&u - &v), 1.0);
            if d == 0.0 {
                continue;
            }
            for (w, o) in worst.iter_mut().zip(&self.entries) {
                *w = w.max((o.evaluate(&u) - o.evaluate(&v)).abs() / d);
            }
        }
        worst
    }
}

/// Observable vectors of an ensemble at one time, one row per realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub t: f64,
    samples: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(t: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Sample(format!("an empirical measure needs 2 samples, got {}", samples.len())));
        }
        let dim = samples[0].len();
        if dim == 0 || samples.iter().any(|s| s.len() != dim) {
            return Err(Error::Sample("samples disagree on the observable set".into()));
        }
        Ok(Self { t, samples })
    }

    pub fn from_fields(t: f64, fields: &[SpectralField], dict: &ObservableDictionary) -> Result<Self> {
        Self::new(t, fields.iter().map(|f| dict.evaluate(f)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[i]).collect()
    }
}

/// 1-D Kantorovich distance between equal-size samples: `(1/n) sum |x_(i) - y_(i)|`.
pub fn kantorovich_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Sample(format!("sample sizes {} and {}", x.len(), y.len())));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    Ok(xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).sum::<f64>() / xs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipDualBound {
    pub value: f64,
    pub per_observable: Vec<f64>,
    /// Multipliers `1 / (L + half-range)` applied to each observable.
    pub normalizations: Vec<f64>,
}

/// Evenly spaced subsample of size `n`.
fn subsample(v: &[f64], n: usize) -> Vec<f64> {
    if v.len() == n {
        return v.to_vec();
    }
    (0..n).map(|i| v[i * v.len() / n]).collect()
}

/// Half of the range of the pooled values.
fn half_range<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        0.5 * (hi - lo)
    } else {
        0.0
    }
}

/// Dictionary lower bound with caller-supplied multipliers (one per observable).
pub fn lip_dual_lower_bound_scaled(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    normalizations: &[f64],
) -> Result<LipDualBound> {
    if a.dim() != b.dim() || a.dim() != normalizations.len() {
        return Err(Error::Sample(format!(
            "observable counts differ: {}, {}, {} multipliers",
            a.dim(),
            b.dim(),
            normalizations.len()
        )));
    }
    let n = a.len().min(b.len());
    let per_observable = (0..a.dim())
        .map(|i| {
            let x = subsample(&a.column(i), n);
            let y = subsample(&b.column(i), n);
            kantorovich_1d(&x, &y).map(|w| w * normalizations[i])
        })
        .collect::<Result<Vec<f64>>>()?;
    let value = per_observable.iter().copied().fold(0.0, f64::max);
    Ok(LipDualBound { value, per_observable, normalizations: normalizations.to_vec() })
}

/// `max_f W1(f#a, f#b) / (L_f + half-range_f)` over the dictionary, with ranges
/// taken over the pooled samples of `a` and `b`.
pub fn lip_dual_lower_bound(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    dict: &ObservableDictionary,
) -> Result<LipDualBound> {
    if a.dim() != dict.len() {
        return Err(Error::Sample(format!("{} observables for a dictionary of {}", a.dim(), dict.len())));
    }
    let normalizations: Vec<f64> = dict
        .lipschitz()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let h = half_range(a.samples.iter().chain(&b.samples).map(|s| &s[i]));
            1.0 / (l + h)
        })
        .collect();
    lip_dual_lower_bound_scaled(a, b, &normalizations)
}

fn check_bk_window(t_burn: f64, t_end: f64) -> Result<()> {
    if !(t_burn >= 1.0 && t_end > t_burn) {
        return Err(Error::Domain(format!("time-average window needs t_end > t_burn >= 1, got [{t_burn}, {t_end}]")));
    }
    Ok(())
}

/// `(1 / (t_end - t_burn)) int f(u(s)) ds` over the snapshots of one trajectory.
pub fn bk_average_with<F>(record: &TrajectoryRecord, f: F, t_burn: f64, t_end: f64) -> Result<f64>
where
    F: Fn(&SpectralField) -> f64,
{
    check_bk_window(t_burn, t_end)?;
    let times: Vec<f64> = record.snapshots.iter().map(|s| s.0).collect();
    let values: Vec<f64> = record.snapshots.iter().map(|s| f(&s.1)).collect();
    Ok(trapezoid_window(&times, &values, t_burn, t_end)? / (t_end - t_burn))
}

pub fn bk_average(record: &TrajectoryRecord, observable: Observable, t_burn: f64, t_end: f64) -> Result<f64> {
    bk_average_with(record, |u| observable.evaluate(u), t_burn, t_end)
}

/// Time average of a diagnostic column over `[t_burn, t_end]`.
pub fn bk_average_rows<F>(record: &TrajectoryRecord, f: F, t_burn: f64, t_end: f64) -> Result<f64>
where
    F: Fn(&DiagnosticRow) -> f64,
{
    check_bk_window(t_burn, t_end)?;
    let times = record.times();
    let values: Vec<f64> = record.rows.iter().map(f).collect();
    Ok(trapezoid_window(&times, &values, t_burn, t_end)? / (t_end - t_burn))
}

/// How the two ensembles of a mixing experiment draw their noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamPolicy {
    /// Member `i` of the second ensemble uses stream `R + i`.
    Independent,
    /// Member `i` of both ensembles uses stream `i`.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingCurve {
    pub observables: Vec<Observable>,
    pub streams: StreamPolicy,
    pub members: usize,
    pub t: Vec<f64>,
    pub bound: Vec<f64>,
    pub per_observable: Vec<Vec<f64>>,
    /// One multiplier per observable, shared by every point of the curve.
    pub normalizations: Vec<f64>,
}

impl MixingCurve {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.t.iter().position(|&s| (s - t).abs() < 1e-9).map(|i| self.bound[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,bound");
        for o in &self.observables {
            out.push(',');
            out.push_str(o.name());
        }
        out.push('\n');
        for (i, t) in self.t.iter().enumerate() {
            out.push_str(&format!("{t},{:e}", self.bound[i]));
            for v in &self.per_observable[i] {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn steps_for(cfg: &SimConfig, times: &[f64]) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let s = t / cfg.dt;
            if !(t >= 0.0) || (s - s.round()).abs() > 1e-6 * s.max(1.0) {
                Err(Error::Config(format!("time {t} is not a whole number of steps of {}", cfg.dt)))
            } else {
                Ok(s.round() as usize)
            }
        })
        .collect()
}

/// Observable vectors of one realization at the given (sorted) step indices.
fn sample_path(
    u0: &SpectralField,
    cfg: &SimConfig,
    spec: &NoiseSpec,
    rng: RngStream,
    steps: &[usize],
    dict: &ObservableDictionary,
) -> Result<Vec<Vec<f64>>> {
    let mut sim = Simulation::new(u0.clone(), cfg, spec, rng)?;
    let mut out = Vec::with_capacity(steps.len());
    for &target in steps {
        while sim.step_index() < target {
            sim.advance()?;
        }
        out.push(dict.evaluate(sim.state()));
    }
    Ok(out)
}

/// Evolves `members` realizations from each initial condition and reports the
/// dictionary bound between the two ensemble laws at each time of `t_grid`.
#[allow(clippy::too_many_arguments)]
pub fn mixing_decay(
    u1_0: &SpectralField,
    u2_0: &SpectralField,
    cfg: &SimConfig,
    spec: &NoiseSpec,
    members: usize,
    t_grid: &[f64],
    master_seed: u64,
    streams: StreamPolicy,
    dict: &ObservableDictionary,
) -> Result<MixingCurve> {
    if members < 2 {
        return Err(Error::EnsembleTooSmall { required: 2, got: members });
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("mixing times must increase".into()));
    }
    let steps = steps_for(cfg, t_grid)?;
    let second_offset = match streams {
        StreamPolicy::Independent => members as u64,
        StreamPolicy::Shared => 0,
    };
    let jobs: Vec<(usize, u64)> =
        (0..members).map(|i| (0, i as u64)).chain((0..members).map(|i| (1, second_offset + i as u64))).collect();
    let paths = jobs
        .par_iter()
        .map(|&(which, stream)| {
            let u0 = if which == 0 { u1_0 } else { u2_0 };
            sample_path(u0, cfg, spec, RngStream::new(master_seed, stream), &steps, dict)
        })
        .collect::<Result<Vec<_>>>()?;
    let (first, second) = paths.split_at(members);
    let lipschitz = dict.lipschitz();
    let normalizations: Vec<f64> = (0..dict.len())
        .map(|k| lipschitz[k] + half_range(paths.iter().flat_map(|p| p.iter().map(move |v| &v[k]))))
        .map(|d| 1.0 / d)
        .collect();
    let mut bound = Vec::with_capacity(t_grid.len());
    let mut per_observable = Vec::with_capacity(t_grid.len());
    for (j, &t) in t_grid.iter().enumerate() {
        let a = EmpiricalMeasure::new(t, first.iter().map(|p| p[j].clone()).collect())?;
        let b = EmpiricalMeasure::new(t, second.iter().map(|p| p[j].clone()).collect())?;
        let lb = lip_dual_lower_bound_scaled(&a, &b, &normalizations)?;
        bound.push(lb.value);
        per_observable.push(lb.per_observable);
    }
    Ok(MixingCurve {
        observables: dict.entries().to_vec(),
        streams,
        members,
        t: t_grid.to_vec(),
        bound,
        per_observable,
        normalizations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: f64,
    /// Fraction of members with `||u(s)|| >= eps` for all `s < t`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeReport {
    pub epsilon: f64,
    pub t_max: f64,
    /// First time `||u|| < eps` per member; `None` if censored at `t_max`.
    pub hit_times: Vec<Option<f64>>,
    pub survival: Vec<SurvivalPoint>,
    /// Whether the survival at `t_max` is below the survival at `t = 1`.
    pub decays: bool,
}

impl HittingTimeReport {
    pub fn survival_at(&self, t: f64) -> f64 {
        let n = self.hit_times.len() as f64;
        self.hit_times.iter().filter(|h| h.is_none_or(|s| s >= t)).count() as f64 / n
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.survival.windows(2).all(|w| w[1].value < w[0].value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,survival,lower,upper\n");
        for p in &self.survival {
            out.push_str(&format!("{},{},{},{}\n", p.t, p.value, p.lower, p.upper));
        }
        out
    }
}

const WILSON_Z: f64 = 1.96;

/// First time each realization's energy norm drops below `epsilon`, checked
/// every step up to `t_max`, and the survival curve at `t_eval`.
#[allow(clippy::too_many_arguments)]
pub fn hitting_times(
    u0: &SpectralField,
    cfg: &SimConfig,
    spec: &NoiseSpec,
    epsilon: f64,
    members: usize,
    t_max: f64,
    master_seed: u64,
    t_eval: &[f64],
) -> Result<HittingTimeReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {epsilon}")));
    }
    if members == 0 {
        return Err(Error::EnsembleTooSmall { required: 1, got: 0 });
    }
    if let Some(t) = t_eval.iter().find(|&&t| !(0.0..=t_max + 1e-9).contains(&t)) {
        return Err(Error::Domain(format!("evaluation time {t} outside [0, {t_max}]")));
    }
    let last = steps_for(cfg, &[t_max])?[0];
    let hit_times = (0..members as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let mut sim = Simulation::new(u0.clone(), cfg, spec, RngStream::new(master_seed, i))?;
            loop {
                if sobolev_norm(sim.state(), 0.0) < epsilon {
                    return Ok(Some(sim.time()));
                }
                if sim.step_index() >= last {
                    return Ok(None);
                }
                sim.advance()?;
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = HittingTimeReport { epsilon, t_max, hit_times, survival: Vec::new(), decays: false };
    let n = members;
    report.survival = t_eval
        .iter()
        .map(|&t| {
            let alive = report.hit_times.iter().filter(|h| h.is_none_or(|s| s >= t)).count();
            let (lower, upper) = wilson_interval(alive, n, WILSON_Z);
            SurvivalPoint { t, value: alive as f64 / n as f64, lower, upper }
        })
        .collect();
    report.decays = report.survival_at(t_max) < report.survival_at(1.0_f64.min(t_max));
    Ok(report)
}
