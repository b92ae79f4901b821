//! Structure functions, the band-averaged energy spectrum, the dissipation
//! scale assay, and log-log scaling fits.
//!
//! All estimators read the field snapshots stored in [`TrajectoryRecord`]s and
//! bracket over the snapshot times of each member, then across members.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::spectral::{dealiased_grid, FftWorkspace, RealCoeffs, SpectralField};
use crate::stats::{linear_regression, mean_and_se, trapezoid_window};

/// Operational inertial range: separations `l in [c1 nu, c2]`, wavenumbers
/// `k in [1/c2, 1/(c1 nu)]`.
///
/// The default brackets the plateau of `S_2(l) / l` measured at `nu = 0.01`
/// and `nu = 0.02` under the default forcing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialRange {
    pub c1: f64,
    pub c2: f64,
}

impl Default for InertialRange {
    fn default() -> Self {
        Self { c1: 10.0, c2: 0.3 }
    }
}

impl InertialRange {
    pub fn separations(&self, nu: f64) -> (f64, f64) {
        (self.c1 * nu, self.c2)
    }

    pub fn wavenumbers(&self, nu: f64) -> (f64, f64) {
        (1.0 / self.c2, 1.0 / (self.c1 * nu))
    }

    /// `count` geometrically spaced points spanning `[lo, hi]`.
    pub fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![lo];
        }
        let r = (hi / lo).ln() / (count - 1) as f64;
        (0..count).map(|i| lo * (r * i as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfPoint {
    pub l_requested: f64,
    /// Separation actually used: the nearest whole grid shift, `shift / G`.
    pub l_actual: f64,
    pub shift: usize,
    pub value: f64,
    pub std_error: f64,
}

/// `S_p(l) = << int |u(x+l) - u(x)|^p dx >>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFunction {
    pub p: f64,
    pub grid: usize,
    pub points: Vec<SfPoint>,
}

impl StructureFunction {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l_requested,l,s_p,se\n");
        for pt in &self.points {
            out.push_str(&format!("{},{},{:e},{:e}\n", pt.l_requested, pt.l_actual, pt.value, pt.std_error));
        }
        out
    }

    /// `(l_actual, S_p)` pairs for [`scaling_fit`].
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.l_actual, p.value)).collect()
    }
}

fn common_modes(records: &[TrajectoryRecord]) -> Result<usize> {
    let n = records.first().map(|r| r.n_modes).ok_or(Error::EnsembleTooSmall { required: 1, got: 0 })?;
    if records.iter().any(|r| r.n_modes != n) {
        return Err(Error::Sample("records disagree on the truncation".into()));
    }
    Ok(n)
}

/// Snapshots of one record that cover `[start, end]` (plus one neighbour on each side).
fn window_snapshots(r: &TrajectoryRecord, start: f64, end: f64) -> Result<&[(f64, SpectralField)]> {
    let snaps = &r.snapshots;
    let (first, last) = match (snaps.first(), snaps.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::Window { start, end, first: f64::NAN, last: f64::NAN }),
    };
    if start < first - 1e-9 || end > last + 1e-9 {
        return Err(Error::Window { start, end, first, last });
    }
    let lo = snaps.partition_point(|s| s.0 < start - 1e-9).saturating_sub(1);
    let hi = (snaps.partition_point(|s| s.0 <= end + 1e-9) + 1).min(snaps.len());
    Ok(&snaps[lo..hi])
}

/// Structure functions of several degrees in one pass over the snapshots.
pub fn structure_functions(
    records: &[TrajectoryRecord],
    degrees: &[f64],
    l_grid: &[f64],
    t_start: f64,
    sigma: f64,
) -> Result<Vec<StructureFunction>> {
    if records.len() < 2 {
        return Err(Error::EnsembleTooSmall { required: 2, got: records.len() });
    }
    if let Some(p) = degrees.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::Domain(format!("structure-function degree must be positive, got {p}")));
    }
    let n = common_modes(records)?;
    let grid = dealiased_grid(n);
    let mut shifts = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        if !(l >= 1.0 / grid as f64 - 1e-12) || l > 1.0 {
            return Err(Error::Resolution { l, grid });
        }
        shifts.push(((l * grid as f64).round() as usize).max(1));
    }
    let end = t_start + sigma;
    // per member: averages[p][l]
    let per_member: Vec<Vec<Vec<f64>>> = records
        .par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            let snaps = window_snapshots(r, t_start, end)?;
            let mut fft = FftWorkspace::new(grid);
            let mut values = vec![0.0; grid];
            let times: Vec<f64> = snaps.iter().map(|s| s.0).collect();
            // series[p][l][snapshot]
            let mut series = vec![vec![Vec::with_capacity(snaps.len()); shifts.len()]; degrees.len()];
            for (_, f) in snaps {
                fft.synthesize(f.modes(), &mut values);
                for (li, &m) in shifts.iter().enumerate() {
                    for (pi, &p) in degrees.iter().enumerate() {
                        let mut acc = 0.0;
                        for j in 0..grid {
                            let d = (values[(j + m) % grid] - values[j]).abs();
                            acc += if p == 2.0 {
                                d * d
                            } else if p == 1.0 {
                                d
                            } else if p == 0.5 {
                                d.sqrt()
                            } else {
                                d.powf(p)
                            };
                        }
                        series[pi][li].push(acc / grid as f64);
                    }
                }
            }
            series
                .iter()
                .map(|per_l| {
                    per_l.iter().map(|s| trapezoid_window(&times, s, t_start, end).map(|v| v / sigma)).collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(degrees
        .iter()
        .enumerate()
        .map(|(pi, &p)| StructureFunction {
            p,
            grid,
            points: l_grid
                .iter()
                .zip(&shifts)
                .enumerate()
                .map(|(li, (&l, &m))| {
                    let samples: Vec<f64> = per_member.iter().map(|pm| pm[pi][li]).collect();
                    let (value, std_error) = mean_and_se(&samples);
                    SfPoint { l_requested: l, l_actual: m as f64 / grid as f64, shift: m, value, std_error }
                })
                .collect(),
        })
        .collect())
}

/// `S_p(l)` for separations rounded to whole shifts of the 2/3-rule grid.
pub fn structure_function(
    records: &[TrajectoryRecord],
    p: f64,
    l_grid: &[f64],
    t_start: f64,
    sigma: f64,
) -> Result<StructureFunction> {
    Ok(structure_functions(records, &[p], l_grid, t_start, sigma)?.remove(0))
}

/// `||u(. + l) - u||^2 = 8 sum_{n >= 1} sin^2(pi n l) |u_n|^2`, the spectral side of `S_2`.
pub fn second_order_increment_spectral(f: &SpectralField, l: f64) -> f64 {
    8.0 * f.modes().iter().enumerate().map(|(i, c)| (PI * (i + 1) as f64 * l).sin().powi(2) * c.norm_sqr()).sum::<f64>()
}

/// `|u_n|^2 = (c_n^2 + c_{-n}^2) / 2` computed from real-basis coefficients.
pub fn mode_energies_from_real(c: &RealCoeffs) -> Vec<f64> {
    c.cos_part().iter().zip(c.sin_part()).map(|(a, b)| 0.5 * (a * a + b * b)).collect()
}

/// `<<|u_n|^2>>` for `n = 1..=N`, with per-member time averages kept for error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEnergyProfile {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub per_member: Vec<Vec<f64>>,
}

pub fn mode_energy_bracket(records: &[TrajectoryRecord], t_start: f64, sigma: f64) -> Result<ModeEnergyProfile> {
    if records.len() < 2 {
        return Err(Error::EnsembleTooSmall { required: 2, got: records.len() });
    }
    let n = common_modes(records)?;
    let end = t_start + sigma;
    let per_member: Vec<Vec<f64>> = records
        .iter()
        .map(|r| -> Result<Vec<f64>> {
            let snaps = window_snapshots(r, t_start, end)?;
            let times: Vec<f64> = snaps.iter().map(|s| s.0).collect();
            let energies: Vec<Vec<f64>> = snaps.iter().map(|s| s.1.mode_energies()).collect();
            (0..n)
                .map(|k| {
                    let series: Vec<f64> = energies.iter().map(|e| e[k]).collect();
                    trapezoid_window(&times, &series, t_start, end).map(|v| v / sigma)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut mean = Vec::with_capacity(n);
    let mut std_error = Vec::with_capacity(n);
    for k in 0..n {
        let samples: Vec<f64> = per_member.iter().map(|m| m[k]).collect();
        let (m, se) = mean_and_se(&samples);
        mean.push(m);
        std_error.push(se);
    }
    Ok(ModeEnergyProfile { mean, std_error, per_member })
}

/// Integer modes `n >= 1` with `k / M <= n <= M k`.
fn band(k: f64, m_band: f64) -> (usize, usize) {
    let lo = ((k / m_band) - 1e-9).ceil().max(1.0) as usize;
    let hi = (m_band * k + 1e-9).floor() as usize;
    (lo, hi)
}

/// `E_k = 1 / (2k (M - 1/M)) sum_{k/M <= |n| <= Mk} 1/2 |u_n|^2` from `|u_n|^2`, `n = 1..=N`
/// (both signs of `n` counted, so the half cancels against the pair).
pub fn band_energy(mode_energy: &[f64], m_band: f64, k: f64) -> Result<f64> {
    if !(m_band > 1.0) || !(k > 0.0) {
        return Err(Error::Domain(format!("band needs M > 1 and k > 0 (M {m_band}, k {k})")));
    }
    let (lo, hi) = band(k, m_band);
    if hi > mode_energy.len() {
        return Err(Error::Band { upper: m_band * k, n_modes: mode_energy.len() });
    }
    let sum: f64 = if lo <= hi { mode_energy[lo - 1..hi].iter().sum() } else { 0.0 };
    Ok(sum / (2.0 * k * (m_band - 1.0 / m_band)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub k: f64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub m_band: f64,
    pub points: Vec<SpectrumPoint>,
}

impl EnergySpectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,e_k,se\n");
        for p in &self.points {
            out.push_str(&format!("{},{:e},{:e}\n", p.k, p.value, p.std_error));
        }
        out
    }

    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.k, p.value)).collect()
    }
}

/// Bracketed band spectrum `E_k` for each `k` in `k_grid`.
pub fn energy_spectrum(
    records: &[TrajectoryRecord],
    m_band: f64,
    k_grid: &[f64],
    t_start: f64,
    sigma: f64,
) -> Result<EnergySpectrum> {
    let n = common_modes(records)?;
    for &k in k_grid {
        if m_band * k > n as f64 + 1e-9 {
            return Err(Error::Band { upper: m_band * k, n_modes: n });
        }
    }
    let profile = mode_energy_bracket(records, t_start, sigma)?;
    spectrum_from_profile(&profile, m_band, k_grid)
}

pub fn spectrum_from_profile(profile: &ModeEnergyProfile, m_band: f64, k_grid: &[f64]) -> Result<EnergySpectrum> {
    let points = k_grid
        .iter()
        .map(|&k| {
            let samples = profile.per_member.iter().map(|m| band_energy(m, m_band, k)).collect::<Result<Vec<f64>>>()?;
            let (value, std_error) = mean_and_se(&samples);
            Ok(SpectrumPoint { k, value, std_error })
        })
        .collect::<Result<_>>()?;
    Ok(EnergySpectrum { m_band, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    /// The profile vanishes identically.
    Trivial,
    /// Local log-slope no steeper than `-4`: power-law bounded below.
    Algebraic,
    Transitional,
    /// Local log-slope at least as steep as `-8`, or below the `k^{-8}` line
    /// anchored at the top of the inertial range.
    SuperAlgebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceScalePoint {
    pub gamma: f64,
    pub k: usize,
    pub value: f64,
    /// `C k^{-2}` extrapolated from the inertial range.
    pub reference: f64,
    /// `value / reference`.
    pub ratio: f64,
    /// `C k_hi^{-2} (k / k_hi)^{-8}`.
    pub reference_k8: f64,
    pub local_slope: f64,
    pub class: DecayClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceScaleReport {
    pub nu: f64,
    /// Median of `k^2 <<|u_k|^2>>` over the inertial range.
    pub inertial_constant: f64,
    pub k_range: (usize, usize),
    pub points: Vec<SpaceScalePoint>,
}

const SUPER_ALGEBRAIC_SLOPE: f64 = -8.0;
const ALGEBRAIC_SLOPE: f64 = -4.0;

/// Evaluates `<<|u_k|^2>>` at `k = ceil(nu^{-gamma})` for each `gamma` and
/// classifies the local decay against the inertial-range `k^{-2}` law.
pub fn assay_profile(profile: &[f64], gamma_grid: &[f64], nu: f64, k_range: (f64, f64)) -> Result<SpaceScaleReport> {
    let n = profile.len();
    let k_lo = (k_range.0.ceil() as usize).max(1);
    let k_hi = (k_range.1.floor() as usize).min(n);
    if k_lo > k_hi {
        return Err(Error::Band { upper: k_range.1, n_modes: n });
    }
    let mut compensated: Vec<f64> = (k_lo..=k_hi).map(|k| (k * k) as f64 * profile[k - 1]).collect();
    compensated.sort_by(f64::total_cmp);
    let c = compensated[compensated.len() / 2];
    let trivial = profile.iter().all(|&v| v == 0.0);
    let points = gamma_grid
        .iter()
        .map(|&gamma| {
            let k = nu.powf(-gamma).ceil() as usize;
            if k > n || k == 0 {
                return Err(Error::Band { upper: k as f64, n_modes: n });
            }
            let value = profile[k - 1];
            let reference = c / (k * k) as f64;
            let reference_k8 = c / (k_hi * k_hi) as f64 * (k as f64 / k_hi as f64).powi(-8);
            let k1 = ((k as f64 / 1.25).floor() as usize).max(1);
            let k2 = ((k as f64 * 1.25).ceil() as usize).min(n);
            let local_slope = if k2 > k1 && profile[k1 - 1] > 0.0 && profile[k2 - 1] > 0.0 {
                (profile[k2 - 1] / profile[k1 - 1]).ln() / (k2 as f64 / k1 as f64).ln()
            } else if profile[k2 - 1] == 0.0 && profile[k1 - 1] > 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            };
            let class = if trivial {
                DecayClass::Trivial
            } else if local_slope <= SUPER_ALGEBRAIC_SLOPE || (k > k_hi && value <= reference_k8) {
                DecayClass::SuperAlgebraic
            } else if local_slope >= ALGEBRAIC_SLOPE {
                DecayClass::Algebraic
            } else {
                DecayClass::Transitional
            };
            let ratio = if reference > 0.0 { value / reference } else { 0.0 };
            Ok(SpaceScalePoint { gamma, k, value, reference, ratio, reference_k8, local_slope, class })
        })
        .collect::<Result<_>>()?;
    Ok(SpaceScaleReport { nu, inertial_constant: c, k_range: (k_lo, k_hi), points })
}

/// [`assay_profile`] on the bracketed mode energies of an ensemble.
pub fn space_scale_assay(
    records: &[TrajectoryRecord],
    gamma_grid: &[f64],
    nu: f64,
    t_start: f64,
    sigma: f64,
    range: &InertialRange,
) -> Result<SpaceScaleReport> {
    let profile = mode_energy_bracket(records, t_start, sigma)?;
    assay_profile(&profile.mean, gamma_grid, nu, range.wavenumbers(nu))
}

/// Least-squares power law `y ~ x^slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub slope_se: f64,
    /// `ln` of the prefactor.
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 4 {
        return Err(Error::Domain(format!("a scaling fit needs at least 4 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::Domain(format!("log-log fit needs positive data, got ({x}, {y})")));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    if lx.iter().all(|&v| v == lx[0]) {
        return Err(Error::Domain("abscissae are all equal".into()));
    }
    let (intercept, slope, slope_se, r_squared) = linear_regression(&lx, &ly);
    Ok(ScalingFit { slope, slope_se, intercept, r_squared, points: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::DiagnosticRow;
    use crate::noise::RngStream;
    use crate::spectral::{complex_to_real, real_to_complex};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn frozen(field: SpectralField, members: usize) -> Vec<TrajectoryRecord> {
        (0..members)
            .map(|i| {
                let mut r = TrajectoryRecord::from_rows(0.1, field.n_modes(), Vec::<DiagnosticRow>::new());
                r.member_index = i as u64;
                r.snapshots = (0..=10).map(|j| (j as f64 * 0.1, field.clone())).collect();
                r
            })
            .collect()
    }

    fn random_records(n: usize, members: usize, seed: u64) -> Vec<TrajectoryRecord> {
        (0..members)
            .map(|i| {
                let mut rng = RngStream::new(seed, i as u64);
                let mut r = TrajectoryRecord::from_rows(0.1, n, Vec::new());
                r.snapshots = (0..=4)
                    .map(|j| (j as f64 * 0.25, crate::dynamics::random_smooth_field(n, n, 1.0, &mut rng)))
                    .collect();
                r
            })
            .collect()
    }

    #[test]
    fn second_order_structure_function_of_frozen_mode() {
        let recs = frozen(SpectralField::basis(16, 1, 1.0), 3);
        let ls = [1.0 / 64.0, 0.1, 0.25, 0.5];
        let sf = structure_function(&recs, 2.0, &ls, 0.2, 0.6).unwrap();
        for pt in &sf.points {
            let exact = 4.0 * (PI * pt.l_actual).sin().powi(2);
            assert_abs_diff_eq!(pt.value, exact, epsilon = 1e-12);
            assert_abs_diff_eq!(pt.std_error, 0.0, epsilon = 1e-12);
        }
        assert_eq!(sf.grid, 64);
        assert_abs_diff_eq!(sf.points[1].l_actual, 6.0 / 64.0);
    }

    #[test]
    fn separation_below_resolution_is_rejected() {
        let recs = frozen(SpectralField::basis(16, 1, 1.0), 2);
        assert!(matches!(structure_function(&recs, 2.0, &[1e-3], 0.0, 1.0), Err(Error::Resolution { .. })));
    }

    #[test]
    fn zero_shift_limit_vanishes() {
        let f = SpectralField::basis(8, 3, 1.0);
        assert_eq!(second_order_increment_spectral(&f, 0.0), 0.0);
        // the smallest representable shift gives a small positive value
        let recs = frozen(f, 2);
        let sf = structure_function(&recs, 1.0, &[1.0 / 32.0], 0.0, 1.0).unwrap();
        assert!(sf.points[0].value > 0.0);
    }

    #[test]
    fn second_order_matches_spectral_side() {
        let recs = random_records(12, 3, 4);
        let ls = [0.03, 0.1, 0.33, 0.7];
        let sf = structure_function(&recs, 2.0, &ls, 0.0, 1.0).unwrap();
        for (li, pt) in sf.points.iter().enumerate() {
            let per_member: Vec<f64> = recs
                .iter()
                .map(|r| {
                    let t: Vec<f64> = r.snapshots.iter().map(|s| s.0).collect();
                    let v: Vec<f64> =
                        r.snapshots.iter().map(|s| second_order_increment_spectral(&s.1, pt.l_actual)).collect();
                    trapezoid_window(&t, &v, 0.0, 1.0).unwrap()
                })
                .collect();
            let oracle = per_member.iter().sum::<f64>() / per_member.len() as f64;
            assert!((pt.value - oracle).abs() <= 1e-8 * oracle.max(1e-300), "l index {li}");
        }
    }

    #[test]
    fn power_mean_ordering_per_snapshot() {
        let recs = random_records(16, 2, 8);
        let ls = [0.05, 0.2, 0.45];
        let degrees = [0.5, 1.0, 2.0, 3.0];
        // a single snapshot window: [0, 0] is degenerate, so use frozen copies instead
        for r in &recs {
            let frozen_recs = frozen(r.snapshots[2].1.clone(), 2);
            let sfs = structure_functions(&frozen_recs, &degrees, &ls, 0.0, 1.0).unwrap();
            for li in 0..ls.len() {
                let norms: Vec<f64> = sfs.iter().map(|sf| sf.points[li].value.powf(1.0 / sf.p)).collect();
                for w in norms.windows(2) {
                    assert!(w[0] <= w[1] * (1.0 + 1e-12), "{norms:?}");
                }
            }
        }
    }

    #[test]
    fn band_energy_of_frozen_mode() {
        let e1 = SpectralField::basis(8, 1, 1.0);
        let recs = frozen(e1, 2);
        let spec = energy_spectrum(&recs, 2.0, &[1.0], 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(spec.points[0].value, 1.0 / 6.0, epsilon = 1e-14);
        let zero = frozen(SpectralField::zeros(8), 2);
        let spec = energy_spectrum(&zero, 2.0, &[1.0, 2.0, 4.0], 0.0, 1.0).unwrap();
        assert!(spec.points.iter().all(|p| p.value == 0.0));
        assert!(matches!(energy_spectrum(&zero, 4.0, &[3.0], 0.0, 1.0), Err(Error::Band { .. })));
    }

    #[test]
    fn band_bookkeeping_identity() {
        // bands [k/M, Mk] for k = 1, 4, 16 with M = 2 overlap at n = 2 and n = 8
        let energy: Vec<f64> = (1..=32).map(|n| 1.0 / (n * n) as f64 + 0.01).collect();
        let m = 2.0;
        let total: f64 =
            [1.0, 4.0, 16.0].iter().map(|&k| 2.0 * k * (m - 1.0 / m) * band_energy(&energy, m, k).unwrap()).sum();
        let mut multiplicity = vec![0.0; 32];
        for k in [1usize, 4, 16] {
            for n in k.div_ceil(2)..=2 * k {
                if n >= 1 {
                    multiplicity[n - 1] += 1.0;
                }
            }
        }
        let expected: f64 = energy.iter().zip(&multiplicity).map(|(e, c)| e * c).sum();
        assert_abs_diff_eq!(total, expected, epsilon = 1e-13);
        assert_eq!(multiplicity[1], 2.0);
        assert_eq!(multiplicity[7], 2.0);
    }

    #[test]
    fn synthetic_space_scale_classification() {
        let nu: f64 = 0.01;
        let profile: Vec<f64> = (1..=2000).map(|k| (k as f64).powi(-2) * (-(k as f64) * nu).exp()).collect();
        let report = assay_profile(&profile, &[0.5, 0.8, 1.5, 1.6], nu, (2.0, 20.0)).unwrap();
        assert_eq!(report.points[0].class, DecayClass::Algebraic);
        assert_eq!(report.points[1].class, DecayClass::Algebraic);
        assert_eq!(report.points[2].class, DecayClass::SuperAlgebraic);
        assert_eq!(report.points[3].class, DecayClass::SuperAlgebraic);
        assert_eq!(report.points[2].k, 1000);
        let zero = assay_profile(&vec![0.0; 100], &[0.5, 1.5], 0.05, (2.0, 10.0)).unwrap();
        assert!(zero.points.iter().all(|p| p.class == DecayClass::Trivial && p.value == 0.0));
        assert!(matches!(assay_profile(&profile[..100], &[1.5], nu, (2.0, 20.0)), Err(Error::Band { .. })));
    }

    #[test]
    fn scaling_fit_examples() {
        let exact: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 3.0 * (i * i) as f64)).collect();
        let fit = scaling_fit(&exact).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-12);

        let mut rng = RngStream::new(17, 0);
        let noisy: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = 10f64.powf(i as f64 / 10.0);
                (x, (1.0 + 0.01 * rng.standard_normal()) / x)
            })
            .collect();
        let fit = scaling_fit(&noisy).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05, "{fit:?}");

        assert!(matches!(scaling_fit(&[(1.0, 1.0)]), Err(Error::Domain(_))));
        assert!(matches!(scaling_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn spectrum_is_basis_invariant(v in prop::collection::vec(-2.0..2.0f64, 20)) {
            let c = RealCoeffs::from_parts(v[..10].to_vec(), v[10..].to_vec()).unwrap();
            let f = real_to_complex(&c);
            let from_complex = f.mode_energies();
            let from_real = mode_energies_from_real(&complex_to_real(&f));
            for (a, b) in from_complex.iter().zip(&from_real) {
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300);
            }
            for k in [1.0, 2.0] {
                let ea = band_energy(&from_complex, 4.0, k).unwrap();
                let eb = band_energy(&mode_energies_from_real(&c), 4.0, k).unwrap();
                prop_assert!((ea - eb).abs() <= 1e-12 * ea.max(1e-300));
            }
        }
    }
}
