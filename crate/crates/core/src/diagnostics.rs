//! Per-snapshot Kruzhkov statistics, the ensemble/time bracket
//! `<<f>>_{T,sigma} = (1/sigma) int_T^{T+sigma} E f(t) dt`, and the Ito energy ledger.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SimConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::noise::{b_sum, NoiseSpec};
use crate::spectral::{sobolev_norm_sqr, FftWorkspace, SpectralField};
use crate::stats::{mean_and_se, trapezoid_window};

/// One saved row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub norm0: f64,
    pub norm1: f64,
    pub norm2: f64,
    pub norm3: f64,
    pub linf_u: f64,
    pub l1_ux: f64,
    pub sup_ux_plus: f64,
}

impl DiagnosticRow {
    pub fn kruzhkov(&self) -> KruzhkovStats {
        KruzhkovStats { t: self.t, sup_ux_plus: self.sup_ux_plus, l1_ux: self.l1_ux, linf_u: self.linf_u }
    }
}

/// One-sided derivative statistics of a snapshot, evaluated on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruzhkovStats {
    pub t: f64,
    /// `max_x (u_x)^+`
    pub sup_ux_plus: f64,
    /// `|u_x|_1`
    pub l1_ux: f64,
    /// `|u|_inf`
    pub linf_u: f64,
}

impl KruzhkovStats {
    /// A zero-mean periodic `f` with `f' <= c` has `|f|_inf <= c` and `|f'|_1 <= 2c`;
    /// checked here with `c = sup_ux_plus` and relative slack `rel_tol` for quadrature.
    pub fn one_sided_bounds_hold(&self, rel_tol: f64) -> bool {
        let c = self.sup_ux_plus * (1.0 + rel_tol);
        if self.sup_ux_plus == 0.0 {
            return self.linf_u == 0.0 && self.l1_ux == 0.0;
        }
        self.linf_u <= c && self.l1_ux <= 2.0 * c
    }
}

/// Grid evaluator for diagnostic rows; one per trajectory.
#[derive(Debug)]
pub struct DiagnosticProbe {
    fft: FftWorkspace,
    u_grid: Vec<f64>,
    ux_grid: Vec<f64>,
    ux_modes: Vec<Complex64>,
}

impl DiagnosticProbe {
    pub fn new(n_modes: usize, grid: usize) -> Self {
        assert!(grid >= 2 * n_modes + 2, "grid {grid} too small for {n_modes} modes");
        Self {
            fft: FftWorkspace::new(grid),
            u_grid: vec![0.0; grid],
            ux_grid: vec![0.0; grid],
            ux_modes: vec![Complex64::new(0.0, 0.0); n_modes],
        }
    }

    pub fn kruzhkov(&mut self, t: f64, u: &SpectralField) -> KruzhkovStats {
        self.fft.synthesize(u.modes(), &mut self.u_grid);
        for (i, (dst, c)) in self.ux_modes.iter_mut().zip(u.modes()).enumerate() {
            *dst = c * Complex64::new(0.0, 2.0 * std::f64::consts::PI * (i + 1) as f64);
        }
        self.fft.synthesize(&self.ux_modes, &mut self.ux_grid);
        let g = self.u_grid.len() as f64;
        let linf_u = self.u_grid.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let sup_ux_plus = self.ux_grid.iter().fold(0.0_f64, |m, v| m.max(*v));
        let l1_ux = self.ux_grid.iter().map(|v| v.abs()).sum::<f64>() / g;
        KruzhkovStats { t, sup_ux_plus, l1_ux, linf_u }
    }

    pub fn row(&mut self, t: f64, u: &SpectralField) -> DiagnosticRow {
        let k = self.kruzhkov(t, u);
        DiagnosticRow {
            t,
            norm0: sobolev_norm_sqr(u, 0.0).sqrt(),
            norm1: sobolev_norm_sqr(u, 1.0).sqrt(),
            norm2: sobolev_norm_sqr(u, 2.0).sqrt(),
            norm3: sobolev_norm_sqr(u, 3.0).sqrt(),
            linf_u: k.linf_u,
            l1_ux: k.l1_ux,
            sup_ux_plus: k.sup_ux_plus,
        }
    }
}

/// Evaluates `u_x` on a grid of `grid` points and reports its positive
/// maximum, its L1 norm, and `|u|_inf`.
pub fn kruzhkov_stats(u: &SpectralField, grid: usize) -> Result<KruzhkovStats> {
    if grid < 2 * u.n_modes() + 2 || !grid.is_multiple_of(2) {
        return Err(Error::Alias { grid, modes: u.n_modes(), required: 2 * u.n_modes() + 2 });
    }
    Ok(DiagnosticProbe::new(u.n_modes(), grid).kruzhkov(0.0, u))
}

/// Ensemble-and-time average with its standard error across members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketEstimate {
    pub value: f64,
    pub std_error: f64,
    pub t_start: f64,
    pub sigma: f64,
    pub members: usize,
}

/// Bracket of arbitrary per-member sampled signals `(times, values)`.
pub fn bracket_series(series: &[(Vec<f64>, Vec<f64>)], t_start: f64, sigma: f64) -> Result<BracketEstimate> {
    if series.len() < 2 {
        return Err(Error::EnsembleTooSmall { required: 2, got: series.len() });
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("bracket window length must be positive, got {sigma}")));
    }
    let averages = series
        .iter()
        .map(|(t, v)| trapezoid_window(t, v, t_start, t_start + sigma).map(|i| i / sigma))
        .collect::<Result<Vec<f64>>>()?;
    let (value, std_error) = mean_and_se(&averages);
    Ok(BracketEstimate { value, std_error, t_start, sigma, members: series.len() })
}

/// `<<observable>>_{T,sigma}` over the diagnostic rows of an ensemble: a
/// trapezoidal time integral per member, then the mean across members with
/// standard error `sd / sqrt(R)`.
pub fn bracket<F>(records: &[TrajectoryRecord], observable: F, t_start: f64, sigma: f64) -> Result<BracketEstimate>
where
    F: Fn(&DiagnosticRow) -> f64,
{
    let series: Vec<(Vec<f64>, Vec<f64>)> =
        records.iter().map(|r| (r.times(), r.rows.iter().map(&observable).collect())).collect();
    bracket_series(&series, t_start, sigma)
}

/// Terms of `1/2 E||u(T+s)||^2 - 1/2 E||u(T)||^2 + nu int E||u||_1^2 = s B_0 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub t_start: f64,
    pub sigma: f64,
    pub e_start: f64,
    pub e_end: f64,
    pub dissipation: f64,
    pub input: f64,
    /// `e_end - e_start + dissipation - input`
    pub residual: f64,
    pub residual_se: f64,
    pub members: usize,
}

impl EnergyLedger {
    /// `|residual| <= rel * input + k SE`.
    pub fn balanced(&self, rel: f64, k: f64) -> bool {
        self.residual.abs() <= rel * self.input + k * self.residual_se
    }
}

/// Mean of `||u||^2` over the three saved rows nearest to `t`.
fn endpoint_energy(record: &TrajectoryRecord, t: f64) -> Result<f64> {
    let rows = &record.rows;
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(Error::Window { start: t, end: t, first: f64::NAN, last: f64::NAN }),
    };
    if rows.len() < 3 || t < first - 1e-9 || t > last + 1e-9 {
        return Err(Error::Window { start: t, end: t, first, last });
    }
    let centre = rows.partition_point(|r| r.t < t);
    let mut idx: Vec<usize> = (centre.saturating_sub(3)..(centre + 3).min(rows.len())).collect();
    idx.sort_by(|&a, &b| (rows[a].t - t).abs().total_cmp(&(rows[b].t - t).abs()).then(a.cmp(&b)));
    Ok(idx[..3].iter().map(|&i| rows[i].norm0 * rows[i].norm0).sum::<f64>() / 3.0)
}

/// Assembles the energy balance over `[t_start, t_start + sigma]` from recorded norms.
pub fn energy_ledger(
    records: &[TrajectoryRecord],
    cfg: &SimConfig,
    spec: &NoiseSpec,
    t_start: f64,
    sigma: f64,
) -> Result<EnergyLedger> {
    if records.len() < 2 {
        return Err(Error::EnsembleTooSmall { required: 2, got: records.len() });
    }
    let input = 0.5 * sigma * b_sum(spec, 0.0);
    let mut starts = Vec::with_capacity(records.len());
    let mut ends = Vec::with_capacity(records.len());
    let mut dissipations = Vec::with_capacity(records.len());
    let mut residuals = Vec::with_capacity(records.len());
    for r in records {
        let e0 = 0.5 * endpoint_energy(r, t_start)?;
        let e1 = 0.5 * endpoint_energy(r, t_start + sigma)?;
        let norm1_sq: Vec<f64> = r.rows.iter().map(|row| row.norm1 * row.norm1).collect();
        let diss = cfg.nu * trapezoid_window(&r.times(), &norm1_sq, t_start, t_start + sigma)?;
        starts.push(e0);
        ends.push(e1);
        dissipations.push(diss);
        residuals.push(e1 - e0 + diss - input);
    }
    let (residual, residual_se) = mean_and_se(&residuals);
    Ok(EnergyLedger {
        t_start,
        sigma,
        e_start: mean_and_se(&starts).0,
        e_end: mean_and_se(&ends).0,
        dissipation: mean_and_se(&dissipations).0,
        input,
        residual,
        residual_se,
        members: records.len(),
    })
}

/// Window length `max(5, 2 C / B_0)` where `C` is the measured plateau of `E||u||^2`.
pub fn default_sigma(energy_plateau: f64, b0: f64) -> f64 {
    if b0 > 0.0 {
        (2.0 * energy_plateau / b0).max(5.0)
    } else {
        5.0
    }
}
