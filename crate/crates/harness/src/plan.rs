//! Experiment plans: TOML ingestion, overrides, defaults and validation.

use std::path::{Path, PathBuf};

use burgulence::dynamics::{InitialCondition, SimConfig, SnapshotSchedule};
use burgulence::ergodicity::StreamPolicy;
use burgulence::noise::{b_sum, NoiseSpec};
use burgulence::turbulence::InertialRange;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Validate,
    Simulate,
    Scaling,
    Spectrum,
    Structure,
    Mixing,
    Recurrence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Validate => "validate",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Structure => "structure",
            ExperimentKind::Mixing => "mixing",
            ExperimentKind::Recurrence => "recurrence",
        }
    }

    fn needs_snapshots(self) -> bool {
        matches!(self, ExperimentKind::Spectrum | ExperimentKind::Structure)
    }
}

/// Forcing amplitudes: explicit `(s, b_s)` pairs, or a power law when `pairs` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisePlan {
    pub exponent: f64,
    pub cutoff: usize,
    pub b0: f64,
    pub pairs: Vec<(i64, f64)>,
}

impl Default for NoisePlan {
    fn default() -> Self {
        Self { exponent: 3.0, cutoff: 16, b0: 1.0, pairs: Vec::new() }
    }
}

impl NoisePlan {
    pub fn build(&self) -> Result<NoiseSpec> {
        let spec = if self.pairs.is_empty() {
            NoiseSpec::power_law(self.exponent, self.cutoff, self.b0)?
        } else {
            NoiseSpec::from_pairs(&self.pairs)?
        };
        Ok(spec)
    }
}

/// Estimator settings; each experiment kind reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisPlan {
    /// Sobolev orders fitted by `scaling` (0 to 3).
    pub orders: Vec<u32>,
    pub inertial: InertialRange,
    /// Band ratio `M` of the spectrum estimator.
    pub m_band: f64,
    /// Structure-function degrees.
    pub degrees: Vec<f64>,
    /// Number of separations (or wavenumbers) spanning the inertial range.
    pub points: usize,
    /// Exponents `gamma` probed at `k = ceil(nu^{-gamma})`.
    pub gammas: Vec<f64>,
    pub mixing_times: Vec<f64>,
    pub streams: StreamPolicy,
    /// Start of the second ensemble in `mixing`.
    pub second_initial: InitialCondition,
    /// Recurrence threshold; defaults to `0.3 sqrt(B_0 / (8 pi^2 nu))`.
    pub epsilon: Option<f64>,
    pub survival_times: Vec<f64>,
}

impl Default for AnalysisPlan {
    fn default() -> Self {
        Self {
            orders: vec![1, 2],
            inertial: InertialRange::default(),
            m_band: 4.0,
            degrees: vec![0.5, 1.0, 2.0, 3.0],
            points: 8,
            gammas: vec![0.5, 0.8, 1.2],
            mixing_times: vec![1.0, 2.0, 5.0, 10.0, 15.0, 20.0],
            streams: StreamPolicy::Independent,
            second_initial: InitialCondition::Mode { mode: 1, amplitude: -2.0 },
            epsilon: None,
            survival_times: vec![1.0, 2.0, 5.0, 10.0, 20.0],
        }
    }
}

/// The file format: every field optional so that defaults can depend on `kind`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    kind: Option<ExperimentKind>,
    seed: Option<u64>,
    nu: Option<f64>,
    nu_grid: Option<Vec<f64>>,
    n_modes: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    members: Option<usize>,
    save_every: Option<usize>,
    dealias: Option<bool>,
    t_start: Option<f64>,
    sigma: Option<f64>,
    snapshot_every: Option<f64>,
    output: Option<PathBuf>,
    initial: Option<InitialCondition>,
    noise: Option<NoisePlan>,
    analysis: Option<AnalysisPlan>,
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub nu_grid: Vec<f64>,
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Ensemble size `R` per viscosity.
    pub members: usize,
    pub save_every: usize,
    pub dealias: bool,
    /// Start of the averaging window.
    pub t_start: f64,
    /// Length of the averaging window.
    pub sigma: f64,
    pub snapshot_every: f64,
    pub output: Option<PathBuf>,
    pub initial: InitialCondition,
    pub noise: NoisePlan,
    pub analysis: AnalysisPlan,
}

/// One trajectory of the schedule: viscosity and noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub nu: f64,
    pub stream: u64,
}

pub const DEFAULT_N_MODES: usize = 256;
pub const DEFAULT_DT: f64 = 2e-4;
pub const DEFAULT_T_END: f64 = 30.0;
pub const DEFAULT_MEMBERS: usize = 50;
pub const SCALING_T_END: f64 = 15.0;
pub const SCALING_MEMBERS: usize = 30;
pub const SCALING_NU_GRID: [f64; 4] = [0.1, 0.05, 0.02, 0.01];
const DEFAULT_T_START: f64 = 5.0;
const MIXING_MEMBERS: usize = 100;
const MIXING_T_END: f64 = 20.0;

impl ExperimentPlan {
    /// Parses `text`, applies `key=value` overrides (dotted keys reach nested tables),
    /// fills defaults and validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw: RawPlan = table.try_into().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
        let plan = Self::from_raw(raw)?;
        plan.validate()?;
        Ok(plan)
    }

    fn from_raw(raw: RawPlan) -> Result<Self> {
        let kind = raw.kind.ok_or_else(|| HarnessError::Invalid("missing field `kind`".into()))?;
        let scaling = kind == ExperimentKind::Scaling;
        let mixing = matches!(kind, ExperimentKind::Mixing | ExperimentKind::Recurrence);
        let nu_grid = match (raw.nu, raw.nu_grid) {
            (Some(_), Some(_)) => return Err(HarnessError::Invalid("give either `nu` or `nu_grid`, not both".into())),
            (Some(nu), None) => vec![nu],
            (None, Some(grid)) => grid,
            (None, None) if scaling => SCALING_NU_GRID.to_vec(),
            (None, None) if kind == ExperimentKind::Validate => Vec::new(),
            (None, None) => return Err(HarnessError::Invalid("missing field `nu`".into())),
        };
        let t_end = raw.t_end.unwrap_or(if scaling {
            SCALING_T_END
        } else if mixing {
            MIXING_T_END
        } else {
            DEFAULT_T_END
        });
        let t_start = raw.t_start.unwrap_or(DEFAULT_T_START.min(0.5 * t_end));
        let dt = raw.dt.unwrap_or(DEFAULT_DT);
        let save_every = raw.save_every.unwrap_or(50);
        let initial = raw.initial.unwrap_or(if mixing {
            InitialCondition::Mode { mode: 1, amplitude: 2.0 }
        } else {
            InitialCondition::Zero
        });
        Ok(Self {
            kind,
            seed: raw.seed.unwrap_or(0),
            nu_grid,
            n_modes: raw.n_modes.unwrap_or(DEFAULT_N_MODES),
            dt,
            t_end,
            members: raw.members.unwrap_or(if scaling {
                SCALING_MEMBERS
            } else if mixing {
                MIXING_MEMBERS
            } else {
                DEFAULT_MEMBERS
            }),
            save_every,
            dealias: raw.dealias.unwrap_or(true),
            t_start,
            sigma: raw.sigma.unwrap_or(t_end - t_start),
            snapshot_every: raw.snapshot_every.unwrap_or(0.1),
            output: raw.output,
            initial,
            noise: raw.noise.unwrap_or_default(),
            analysis: raw.analysis.unwrap_or_default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(HarnessError::Invalid(m));
        if let Some(nu) = self.nu_grid.iter().find(|nu| !(**nu > 0.0 && **nu <= 1.0)) {
            return invalid(format!("nu out of (0,1]: {nu}"));
        }
        if self.kind != ExperimentKind::Validate && self.nu_grid.is_empty() {
            return invalid("nu_grid is empty".into());
        }
        if self.members == 0 {
            return invalid("members (R) must be at least 1".into());
        }
        if !(self.t_start >= 0.0 && self.sigma > 0.0 && self.t_start + self.sigma <= self.t_end + 1e-9) {
            return invalid(format!(
                "window [{}, {}] does not lie within [0, t_end = {}]",
                self.t_start,
                self.t_start + self.sigma,
                self.t_end
            ));
        }
        let late = |times: &[f64]| times.iter().copied().find(|&t| !(0.0..=self.t_end + 1e-9).contains(&t));
        if self.kind == ExperimentKind::Mixing {
            if let Some(t) = late(&self.analysis.mixing_times) {
                return invalid(format!("mixing time {t} lies outside [0, t_end = {}]", self.t_end));
            }
        }
        if self.kind == ExperimentKind::Recurrence {
            if let Some(t) = late(&self.analysis.survival_times) {
                return invalid(format!("survival time {t} lies outside [0, t_end = {}]", self.t_end));
            }
        }
        if self.kind.needs_snapshots() && !(self.snapshot_every >= self.dt) {
            return invalid(format!("snapshot_every {} is shorter than dt", self.snapshot_every));
        }
        if self.kind == ExperimentKind::Scaling && self.analysis.orders.iter().any(|&m| m > 3) {
            return invalid("scaling orders must lie in 0..=3".into());
        }
        if let Some(eps) = self.analysis.epsilon {
            if !(eps > 0.0) {
                return invalid(format!("epsilon must be positive, got {eps}"));
            }
        }
        self.noise.build()?;
        for &nu in &self.nu_grid {
            self.sim_config(nu).validate()?;
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        self.noise.build()
    }

    pub fn sim_config(&self, nu: f64) -> SimConfig {
        let mut cfg = SimConfig::new(nu, self.n_modes, self.dt, self.t_end);
        cfg.save_every = self.save_every;
        cfg.dealias = self.dealias;
        if self.kind.needs_snapshots() {
            let every = ((self.snapshot_every / self.dt).round() as usize).max(1);
            cfg.snapshots = Some(SnapshotSchedule { every, start: self.t_start });
        }
        cfg
    }

    /// Members grouped by viscosity; viscosity `j` owns streams `j R .. (j + 1) R`.
    pub fn member_schedule(&self) -> Vec<Member> {
        let r = self.members as u64;
        self.nu_grid
            .iter()
            .enumerate()
            .flat_map(|(j, &nu)| (0..r).map(move |i| Member { nu, stream: j as u64 * r + i }))
            .collect()
    }

    /// The recurrence threshold: explicit, or 30% of the stationary bound on `||u||`
    /// implied by `nu ||u||_1^2 ~ B_0 / 2` and Poincare.
    pub fn epsilon(&self, nu: f64) -> Result<f64> {
        match self.analysis.epsilon {
            Some(e) => Ok(e),
            None => {
                let b0 = b_sum(&self.noise_spec()?, 0.0);
                Ok(0.3 * (b0 / (8.0 * std::f64::consts::PI.powi(2) * nu)).sqrt())
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plans serialize")
    }
}

/// Reads and validates a plan file.
pub fn load_plan(path: &Path, overrides: &[String]) -> Result<ExperimentPlan> {
    let text =
        std::fs::read_to_string(path).map_err(|source| HarnessError::Read { path: path.to_path_buf(), source })?;
    ExperimentPlan::parse(&text, overrides)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, value) = spec.split_once('=').ok_or_else(|| HarnessError::Override(spec.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(HarnessError::Override(spec.to_string()));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut cursor = table;
    for p in parts {
        let entry = cursor.entry(p).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| HarnessError::Override(spec.to_string()))?;
    }
    cursor.insert(leaf.to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_plan_gets_documented_defaults() {
        let p = ExperimentPlan::parse("kind = \"simulate\"\nnu = 0.05\nseed = 7\n", &[]).unwrap();
        assert_eq!(p.n_modes, 256);
        assert_eq!(p.dt, 2e-4);
        assert_eq!(p.members, 50);
        assert_eq!(p.t_end, 30.0);
        assert_eq!(p.seed, 7);
        assert_eq!(p.noise.build().unwrap(), NoiseSpec::default_profile());
    }

    #[test]
    fn scaling_defaults_are_shorter() {
        let p = ExperimentPlan::parse("kind = \"scaling\"", &[]).unwrap();
        assert_eq!(p.t_end, 15.0);
        assert_eq!(p.members, 30);
        assert_eq!(p.nu_grid, SCALING_NU_GRID.to_vec());
    }

    #[test]
    fn viscosity_out_of_range_is_named() {
        let err = ExperimentPlan::parse("kind = \"simulate\"\nnu = 1.5", &[]).unwrap_err();
        assert!(err.to_string().contains("nu out of (0,1]"), "{err}");
    }

    #[test]
    fn unknown_field_is_reported_with_its_name() {
        let err = ExperimentPlan::parse("kind = \"simulate\"\nnu = 0.1\nviscosity = 2", &[]).unwrap_err();
        assert!(err.to_string().contains("viscosity"), "{err}");
    }

    #[test]
    fn syntax_error_reports_the_line() {
        let err = ExperimentPlan::parse("kind = \"simulate\"\nnu = = 0.1", &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn window_must_fit() {
        let err = ExperimentPlan::parse("kind = \"simulate\"\nnu = 0.1\nt_end = 10\nt_start = 8\nsigma = 5", &[])
            .unwrap_err();
        assert!(err.to_string().contains("window"), "{err}");
    }

    #[test]
    fn overrides_reach_nested_tables() {
        let o = vec!["members=3".to_string(), "analysis.m_band=2.5".into(), "noise.b0=2".into()];
        let p = ExperimentPlan::parse("kind = \"spectrum\"\nnu = 0.05", &o).unwrap();
        assert_eq!(p.members, 3);
        assert_eq!(p.analysis.m_band, 2.5);
        assert_eq!(p.noise.b0, 2.0);
        assert!(matches!(
            ExperimentPlan::parse("kind = \"spectrum\"\nnu = 0.05", &["members".into()]),
            Err(HarnessError::Override(_))
        ));
    }

    #[test]
    fn schedule_gives_each_viscosity_its_own_streams() {
        let p = ExperimentPlan::parse("kind = \"scaling\"\nmembers = 3", &[]).unwrap();
        let s = p.member_schedule();
        assert_eq!(s.len(), 12);
        let mut streams: Vec<u64> = s.iter().map(|m| m.stream).collect();
        streams.dedup();
        assert_eq!(streams, (0..12).collect::<Vec<u64>>());
        for (j, nu) in SCALING_NU_GRID.iter().enumerate() {
            assert!(s[3 * j..3 * j + 3].iter().all(|m| m.nu == *nu));
        }
    }

    #[test]
    fn echo_round_trips() {
        let p = ExperimentPlan::parse("kind = \"mixing\"\nnu = 0.05", &[]).unwrap();
        let again = ExperimentPlan::parse(&p.to_toml(), &[]);
        // the echo spells out `nu_grid`, which the raw format accepts
        assert_eq!(again.unwrap(), p);
    }

    #[test]
    fn default_epsilon_uses_the_poincare_bound() {
        let p = ExperimentPlan::parse("kind = \"recurrence\"\nnu = 0.05", &[]).unwrap();
        let eps = p.epsilon(0.05).unwrap();
        assert!((eps - 0.3 * (1.0f64 / (8.0 * std::f64::consts::PI.powi(2) * 0.05)).sqrt()).abs() < 1e-12);
    }
}
