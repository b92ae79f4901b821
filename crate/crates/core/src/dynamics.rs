//! Time integration.
//!
//! The stochastic equation is advanced by a drift-implicit Euler-Maruyama step
//! in Fourier space,
//!
//! ```text
//! u_k(t + dt) = (u_k + dt F_k(u) + dxi_k) / (1 + nu (2 pi k)^2 dt),   F = -1/2 d/dx (u^2),
//! ```
//!
//! explicit in the dealiased flux and implicit in the viscous term, with the
//! noise increment entering inside the implicit solve. Two exact oracles sit
//! alongside: the forced heat semigroup and the Cole-Hopf solution of the
//! unforced equation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticProbe, DiagnosticRow};
use crate::error::{Error, Result};
use crate::noise::{sample_increment_into, NoiseSpec, RngStream};
use crate::spectral::{dealiased_grid, min_grid, sobolev_norm, FftWorkspace, FluxWorkspace, RealCoeffs, SpectralField};

const TWO_PI: f64 = 2.0 * PI;

/// Periodic field snapshots stored alongside the diagnostic rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSchedule {
    /// Store every this many steps...
    pub every: usize,
    /// ...once `t >= start`.
    pub start: f64,
}

/// Parameters of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nu: f64,
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Diagnostic row every this many steps.
    pub save_every: usize,
    /// Use the 2/3-rule grid for the flux; otherwise the minimal `2N + 2` grid.
    pub dealias: bool,
    /// Explicit grid size for the flux; derived from `dealias` when absent.
    pub grid_size: Option<usize>,
    pub cfl_safety: f64,
    /// Drop the flux (forced heat equation); a test hook for the oracles.
    pub linear: bool,
    pub snapshots: Option<SnapshotSchedule>,
}

impl SimConfig {
    pub const DEFAULT_CFL_SAFETY: f64 = 0.4;

    pub fn new(nu: f64, n_modes: usize, dt: f64, t_end: f64) -> Self {
        Self {
            nu,
            n_modes,
            dt,
            t_end,
            save_every: 50,
            dealias: true,
            grid_size: None,
            cfl_safety: Self::DEFAULT_CFL_SAFETY,
            linear: false,
            snapshots: None,
        }
    }

    pub fn grid(&self) -> usize {
        self.grid_size.unwrap_or_else(
            || {
                if self.dealias {
                    dealiased_grid(self.n_modes)
                } else {
                    min_grid(self.n_modes)
                }
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::Config(format!("nu out of (0,1]: {}", self.nu)));
        }
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Config(format!("dt and t_end must be positive (dt {}, t_end {})", self.dt, self.t_end)));
        }
        if self.save_every == 0 {
            return Err(Error::Config("save_every must be positive".into()));
        }
        if !(self.cfl_safety > 0.0) {
            return Err(Error::Config("cfl_safety must be positive".into()));
        }
        if let Some(s) = self.snapshots {
            if s.every == 0 {
                return Err(Error::Config("snapshot interval must be positive".into()));
            }
        }
        let g = self.grid();
        if g < min_grid(self.n_modes) || !g.is_multiple_of(2) {
            return Err(Error::Alias { grid: g, modes: self.n_modes, required: min_grid(self.n_modes) });
        }
        self.n_steps().map(|_| ())
    }

    /// `t_end / dt`, which must be an integer.
    pub fn n_steps(&self) -> Result<usize> {
        let ratio = self.t_end / self.dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::Config(format!("t_end / dt = {ratio} is not a whole number of steps")));
        }
        Ok(n as usize)
    }

    /// Step index nearest to time `t`.
    pub fn step_of(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// Initial conditions offered by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// `amplitude * e_mode` in the real basis.
    Mode {
        mode: i64,
        amplitude: f64,
    },
    /// Gaussian coefficients decaying like `|s|^{-3}` on `|s| <= 8`, rescaled so `||u0||_1 = h1_norm`.
    RandomSmooth {
        h1_norm: f64,
        seed: u64,
    },
}

impl InitialCondition {
    pub fn build(&self, n_modes: usize) -> SpectralField {
        match *self {
            InitialCondition::Zero => SpectralField::zeros(n_modes),
            InitialCondition::Mode { mode, amplitude } => SpectralField::basis(n_modes, mode, amplitude),
            InitialCondition::RandomSmooth { h1_norm, seed } => {
                let mut rng = RngStream::new(seed, u64::MAX);
                let mut c = RealCoeffs::zeros(n_modes);
                for s in 1..=n_modes.min(8) as i64 {
                    let w = (s as f64).powi(-3);
                    c.set(s, w * rng.standard_normal());
                    c.set(-s, w * rng.standard_normal());
                }
                let f = crate::spectral::real_to_complex(&c);
                let norm = sobolev_norm(&f, 1.0);
                if norm == 0.0 {
                    f
                } else {
                    &f * (h1_norm / norm)
                }
            }
        }
    }
}

/// Single-trajectory integrator with owned workspaces.
#[derive(Debug)]
pub struct Stepper {
    dt: f64,
    linear: bool,
    cfl_limit_factor: f64,
    inv_damping: Vec<f64>,
    flux: FluxWorkspace,
    flux_buf: Vec<Complex64>,
    last_sup: f64,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let flux = FluxWorkspace::with_grid(cfg.n_modes, cfg.grid())?;
        let inv_damping = (1..=cfg.n_modes)
            .map(|k| {
                let w = TWO_PI * k as f64;
                1.0 / (1.0 + cfg.nu * w * w * cfg.dt)
            })
            .collect();
        Ok(Self {
            dt: cfg.dt,
            linear: cfg.linear,
            cfl_limit_factor: cfg.cfl_safety / flux.grid_size() as f64,
            inv_damping,
            flux_buf: vec![Complex64::new(0.0, 0.0); cfg.n_modes],
            flux,
            last_sup: 0.0,
        })
    }

    /// `|u|_inf` on the flux grid seen by the last step (0 in linear mode).
    pub fn last_sup(&self) -> f64 {
        self.last_sup
    }

    /// Advances `u` by one step with complex increment `dxi` (modes `1..=len`).
    /// `t` is the time at the start of the step, used for error reporting.
    pub fn step_in_place(&mut self, u: &mut SpectralField, dxi: &[Complex64], t: f64) -> Result<()> {
        if self.linear {
            self.flux_buf.fill(Complex64::new(0.0, 0.0));
        } else {
            let sup = self.flux.flux_into(u, &mut self.flux_buf);
            self.last_sup = sup;
            let limit = self.cfl_limit_factor / sup.max(1.0);
            if !sup.is_finite() {
                return Err(Error::BlowUp { t });
            }
            if self.dt > limit {
                return Err(Error::StepRejected { t, dt: self.dt, limit });
            }
        }
        let dt = self.dt;
        let modes = u.modes_mut();
        for (k, c) in modes.iter_mut().enumerate() {
            let forcing = dxi.get(k).copied().unwrap_or_default();
            *c = (*c + self.flux_buf[k] * dt + forcing) * self.inv_damping[k];
        }
        if !u.is_finite() {
            return Err(Error::BlowUp { t: t + dt });
        }
        Ok(())
    }
}

/// Writes `(c_s - i c_{-s}) / sqrt2` into `out[..c.n_modes()]`.
fn increment_to_complex(c: &RealCoeffs, out: &mut [Complex64]) {
    for ((dst, a), b) in out.iter_mut().zip(c.cos_part()).zip(c.sin_part()) {
        *dst = Complex64::new(*a, -*b) * FRAC_1_SQRT_2;
    }
}

/// One step of the scheme. `dxi` is an increment drawn with the same `dt`.
pub fn step(u: &SpectralField, cfg: &SimConfig, dxi: &RealCoeffs) -> Result<SpectralField> {
    if dxi.n_modes() > u.n_modes() {
        return Err(Error::Config(format!("increment has {} modes but the field only {}", dxi.n_modes(), u.n_modes())));
    }
    let mut stepper = Stepper::new(cfg)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); dxi.n_modes()];
    increment_to_complex(dxi, &mut buf);
    let mut next = u.clone();
    stepper.step_in_place(&mut next, &buf, 0.0)?;
    Ok(next)
}

/// A running simulation: state, time, noise stream and workspaces.
#[derive(Debug)]
pub struct Simulation {
    cfg: SimConfig,
    spec: NoiseSpec,
    rng: RngStream,
    stepper: Stepper,
    state: SpectralField,
    step_index: usize,
    sqrt_dt: f64,
    increment: RealCoeffs,
    increment_c: Vec<Complex64>,
    unforced: bool,
}

impl Simulation {
    pub fn new(u0: SpectralField, cfg: &SimConfig, spec: &NoiseSpec, rng: RngStream) -> Result<Self> {
        cfg.validate()?;
        if u0.n_modes() != cfg.n_modes {
            return Err(Error::Config(format!(
                "initial condition has {} modes, configuration {}",
                u0.n_modes(),
                cfg.n_modes
            )));
        }
        if spec.effective_support() > cfg.n_modes {
            return Err(Error::Config(format!(
                "noise support {} exceeds truncation N = {}",
                spec.effective_support(),
                cfg.n_modes
            )));
        }
        let support = spec.support();
        Ok(Self {
            stepper: Stepper::new(cfg)?,
            cfg: cfg.clone(),
            spec: spec.clone(),
            rng,
            state: u0,
            step_index: 0,
            sqrt_dt: cfg.dt.sqrt(),
            increment: RealCoeffs::zeros(support),
            increment_c: vec![Complex64::new(0.0, 0.0); support.min(cfg.n_modes)],
            unforced: spec.is_zero(),
        })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// The increment applied by the last [`Self::advance`] (real basis).
    pub fn last_increment(&self) -> &RealCoeffs {
        &self.increment
    }

    pub fn advance(&mut self) -> Result<()> {
        let t = self.time();
        if self.unforced {
            self.increment_c.fill(Complex64::new(0.0, 0.0));
        } else {
            sample_increment_into(&self.spec, self.sqrt_dt, &mut self.rng, &mut self.increment);
            increment_to_complex(&self.increment, &mut self.increment_c);
        }
        self.stepper.step_in_place(&mut self.state, &self.increment_c, t)?;
        self.step_index += 1;
        Ok(())
    }

    /// Advances with an externally supplied complex increment (coupled runs).
    pub(crate) fn advance_with(&mut self, dxi: &[Complex64]) -> Result<()> {
        let t = self.time();
        self.stepper.step_in_place(&mut self.state, dxi, t)?;
        self.step_index += 1;
        Ok(())
    }

    /// Draws the next complex increment from this simulation's stream.
    pub(crate) fn draw_increment(&mut self) -> &[Complex64] {
        if self.unforced {
            self.increment_c.fill(Complex64::new(0.0, 0.0));
        } else {
            sample_increment_into(&self.spec, self.sqrt_dt, &mut self.rng, &mut self.increment);
            increment_to_complex(&self.increment, &mut self.increment_c);
        }
        &self.increment_c
    }
}

/// Time series of diagnostics for one noise realization, plus optional field snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub master_seed: u64,
    pub member_index: u64,
    pub nu: f64,
    pub n_modes: usize,
    pub rows: Vec<DiagnosticRow>,
    pub snapshots: Vec<(f64, SpectralField)>,
}

impl TrajectoryRecord {
    pub const CSV_HEADER: &'static str = "t,norm0,norm1,norm2,norm3,linf_u,l1_ux,sup_ux_plus";

    /// Builds a record directly from rows (synthetic data, replay).
    pub fn from_rows(nu: f64, n_modes: usize, rows: Vec<DiagnosticRow>) -> Self {
        Self { master_seed: 0, member_index: 0, nu, n_modes, rows, snapshots: Vec::new() }
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.t, r.norm0, r.norm1, r.norm2, r.norm3, r.linf_u, r.l1_ux, r.sup_ux_plus
            )?;
        }
        Ok(())
    }

    /// Snapshot spectra as `t,k,energy` rows with `energy = |u_k|^2`.
    pub fn write_spectra_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,k,energy")?;
        for (t, f) in &self.snapshots {
            for (i, e) in f.mode_energies().iter().enumerate() {
                writeln!(w, "{},{},{:e}", t, i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Integrates from `u0` to `cfg.t_end`, recording a row every `save_every`
/// steps (including `t = 0`) and snapshots per `cfg.snapshots`.
pub fn run(u0: &SpectralField, cfg: &SimConfig, spec: &NoiseSpec, rng: RngStream) -> Result<TrajectoryRecord> {
    let n_steps = cfg.n_steps()?;
    let (master_seed, member_index) = (rng.master_seed(), rng.member_index());
    let mut sim = Simulation::new(u0.clone(), cfg, spec, rng)?;
    let mut probe = DiagnosticProbe::new(cfg.n_modes, cfg.grid());
    let mut rows = Vec::with_capacity(n_steps / cfg.save_every + 1);
    let mut snapshots = Vec::new();
    let record = |sim: &Simulation,
                  probe: &mut DiagnosticProbe,
                  rows: &mut Vec<DiagnosticRow>,
                  snaps: &mut Vec<(f64, SpectralField)>| {
        let i = sim.step_index();
        if i.is_multiple_of(cfg.save_every) || i == n_steps {
            rows.push(probe.row(sim.time(), sim.state()));
        }
        if let Some(s) = cfg.snapshots {
            if i.is_multiple_of(s.every) && sim.time() >= s.start - 1e-9 {
                snaps.push((sim.time(), sim.state().clone()));
            }
        }
    };
    record(&sim, &mut probe, &mut rows, &mut snapshots);
    for _ in 0..n_steps {
        sim.advance()?;
        record(&sim, &mut probe, &mut rows, &mut snapshots);
    }
    Ok(TrajectoryRecord { master_seed, member_index, nu: cfg.nu, n_modes: cfg.n_modes, rows, snapshots })
}

/// Forced heat equation `v_t - nu v_xx = d/dt xi` solved mode by mode with the
/// exact integrating factor; each increment is added at the end of its step:
/// `v_k(t + dt) = exp(-nu (2 pi k)^2 dt) v_k(t) + dxi_k`.
pub fn heat_exact(u0: &SpectralField, increments: &[RealCoeffs], nu: f64, dt: f64) -> SpectralField {
    let n = u0.n_modes();
    let decay: Vec<f64> = (1..=n)
        .map(|k| {
            let w = TWO_PI * k as f64;
            (-nu * w * w * dt).exp()
        })
        .collect();
    let mut v = u0.clone();
    let mut inc = vec![Complex64::new(0.0, 0.0); n];
    for dxi in increments {
        assert!(dxi.n_modes() <= n, "increment wider than the field");
        inc.fill(Complex64::new(0.0, 0.0));
        increment_to_complex(dxi, &mut inc[..dxi.n_modes()]);
        for ((c, d), f) in v.modes_mut().iter_mut().zip(&decay).zip(&inc) {
            *c = *c * *d + f;
        }
    }
    v
}

/// Span of `Phi / (2 nu)` (in e-folds) beyond which the Cole-Hopf oracle loses
/// accuracy: the heat solution's smallest values drown in FFT round-off.
pub const COLE_HOPF_MAX_SPAN: f64 = 30.0;

/// Unforced Burgers solution at time `t` by the Cole-Hopf transform:
/// `phi_0 = exp(-Phi / (2 nu))` with `Phi' = u0`, heat flow of `phi`, then
/// `u = -2 nu d/dx log phi`, projected onto the modes of `u0`.
pub fn cole_hopf(u0: &SpectralField, nu: f64, t: f64) -> Result<SpectralField> {
    if !(nu > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("Cole-Hopf needs nu > 0 and t >= 0 (nu {nu}, t {t})")));
    }
    let n = u0.n_modes();
    let grid = (16 * n).max(2048).next_power_of_two();
    let half = grid / 2 - 1;
    let mut fft = FftWorkspace::new(grid);

    // zero-mean potential Phi_s = u_s / (2 pi i s)
    let potential: Vec<Complex64> =
        u0.modes().iter().enumerate().map(|(i, c)| c / Complex64::new(0.0, TWO_PI * (i + 1) as f64)).collect();
    let mut padded = vec![Complex64::new(0.0, 0.0); half];
    padded[..n].copy_from_slice(&potential);
    let mut phi = vec![0.0; grid];
    fft.synthesize(&padded, &mut phi);
    let (lo, hi) = phi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = (hi - lo) / (2.0 * nu);
    if !(span <= COLE_HOPF_MAX_SPAN) {
        return Err(Error::OracleRange { span, limit: COLE_HOPF_MAX_SPAN });
    }
    for v in phi.iter_mut() {
        *v = (-(*v - lo) / (2.0 * nu)).exp();
    }
    let mean = phi.iter().sum::<f64>() / grid as f64;
    let mut heat = vec![Complex64::new(0.0, 0.0); half];
    fft.analyze(&phi, &mut heat);
    for (i, c) in heat.iter_mut().enumerate() {
        let w = TWO_PI * (i + 1) as f64;
        *c *= (-nu * w * w * t).exp();
    }
    let dheat: Vec<Complex64> =
        heat.iter().enumerate().map(|(i, c)| c * Complex64::new(0.0, TWO_PI * (i + 1) as f64)).collect();
    let mut phi_t = vec![0.0; grid];
    let mut dphi_t = vec![0.0; grid];
    fft.synthesize(&heat, &mut phi_t);
    fft.synthesize(&dheat, &mut dphi_t);
    let u: Vec<f64> = phi_t.iter().zip(&dphi_t).map(|(p, dp)| -2.0 * nu * dp / (p + mean)).collect();
    let mut modes = vec![Complex64::new(0.0, 0.0); n];
    fft.analyze(&u, &mut modes);
    SpectralField::from_modes(modes)
}

/// Two trajectories driven by the same noise path, with their L1 distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrajectoryRecord {
    /// `(t, |u1(t) - u2(t)|_1)` at every saved step.
    pub l1_distance: Vec<(f64, f64)>,
    pub first: TrajectoryRecord,
    pub second: TrajectoryRecord,
}

impl CoupledTrajectoryRecord {
    /// `max_t (|du(t)|_1 - |du(0)|_1 - rate * t)`: positive when growth exceeds `rate` per unit time.
    pub fn max_excess_growth(&self, rate: f64) -> f64 {
        let d0 = self.l1_distance.first().map(|p| p.1).unwrap_or(0.0);
        self.l1_distance.iter().map(|&(t, d)| d - d0 - rate * t).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Advances two solutions with an identical increment each step.
pub fn run_coupled(
    u1_0: &SpectralField,
    u2_0: &SpectralField,
    cfg: &SimConfig,
    spec: &NoiseSpec,
    rng: RngStream,
) -> Result<CoupledTrajectoryRecord> {
    let n_steps = cfg.n_steps()?;
    let (master_seed, member_index) = (rng.master_seed(), rng.member_index());
    let mut a = Simulation::new(u1_0.clone(), cfg, spec, rng)?;
    // the second copy never draws; it replays the first copy's increments
    let mut b = Simulation::new(u2_0.clone(), cfg, &NoiseSpec::zero(), RngStream::new(master_seed, member_index))?;
    let grid = cfg.grid();
    let mut probe_a = DiagnosticProbe::new(cfg.n_modes, grid);
    let mut probe_b = DiagnosticProbe::new(cfg.n_modes, grid);
    let mut diff_fft = FftWorkspace::new(grid);
    let mut diff_grid = vec![0.0; grid];
    let mut l1_distance = Vec::new();
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    let mut save =
        |a: &Simulation, b: &Simulation, rows_a: &mut Vec<DiagnosticRow>, rows_b: &mut Vec<DiagnosticRow>| {
            let diff = a.state() - b.state();
            diff_fft.synthesize(diff.modes(), &mut diff_grid);
            let l1 = diff_grid.iter().map(|v| v.abs()).sum::<f64>() / grid as f64;
            l1_distance.push((a.time(), l1));
            rows_a.push(probe_a.row(a.time(), a.state()));
            rows_b.push(probe_b.row(b.time(), b.state()));
        };
    save(&a, &b, &mut rows_a, &mut rows_b);
    let mut inc = vec![Complex64::new(0.0, 0.0); spec.support().min(cfg.n_modes)];
    for i in 1..=n_steps {
        inc.copy_from_slice(a.draw_increment());
        a.advance_with(&inc)?;
        b.advance_with(&inc)?;
        if i % cfg.save_every == 0 || i == n_steps {
            save(&a, &b, &mut rows_a, &mut rows_b);
        }
    }
    let rec = |member_index, rows| TrajectoryRecord {
        master_seed,
        member_index,
        nu: cfg.nu,
        n_modes: cfg.n_modes,
        rows,
        snapshots: Vec::new(),
    };
    Ok(CoupledTrajectoryRecord { l1_distance, first: rec(member_index, rows_a), second: rec(member_index, rows_b) })
}

/// Random smooth field with standard-normal coefficients decaying like `|s|^{-decay}`
/// on `|s| <= max_mode`, for tests and experiments that need generic data.
pub fn random_smooth_field(n_modes: usize, max_mode: usize, decay: f64, rng: &mut RngStream) -> SpectralField {
    let mut c = RealCoeffs::zeros(n_modes);
    for s in 1..=max_mode.min(n_modes) as i64 {
        let w = (s as f64).powf(-decay);
        c.set(s, w * rng.standard_normal());
        c.set(-s, w * rng.standard_normal());
    }
    crate::spectral::real_to_complex(&c)
}
