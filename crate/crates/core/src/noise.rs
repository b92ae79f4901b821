//! The Wiener process `xi(t) = sum_s b_s beta_s(t) e_s` driving the equation,
//! its increments, and Monte-Carlo checks of its second moments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::RealCoeffs;
use crate::stats::mean_and_se;

/// Forcing amplitudes `b_s`, `0 < |s| <= S_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl NoiseSpec {
    /// No forcing at all.
    pub fn zero() -> Self {
        Self { cos: vec![0.0], sin: vec![0.0] }
    }

    /// Amplitudes from `(s, b_s)` pairs; unlisted modes are unforced.
    pub fn from_pairs(pairs: &[(i64, f64)]) -> Result<Self> {
        let support = pairs.iter().map(|(s, _)| s.unsigned_abs() as usize).max().unwrap_or(1).max(1);
        let mut spec = Self { cos: vec![0.0; support], sin: vec![0.0; support] };
        for &(s, b) in pairs {
            if s == 0 {
                return Err(Error::Config("noise mode 0 is not allowed (fields have zero mean)".into()));
            }
            if !b.is_finite() {
                return Err(Error::Config(format!("noise amplitude for mode {s} is not finite")));
            }
            let idx = s.unsigned_abs() as usize - 1;
            if s > 0 {
                spec.cos[idx] = b;
            } else {
                spec.sin[idx] = b;
            }
        }
        Ok(spec)
    }

    /// `b_s = c |s|^{-exponent}` for `1 <= |s| <= cutoff`, with `c` chosen so that `B_0 = target_b0`.
    pub fn power_law(exponent: f64, cutoff: usize, target_b0: f64) -> Result<Self> {
        if cutoff == 0 || !(target_b0 >= 0.0) || !exponent.is_finite() {
            return Err(Error::Config(format!(
                "power-law noise needs cutoff >= 1 and B_0 >= 0 (got cutoff {cutoff}, B_0 {target_b0})"
            )));
        }
        let raw: Vec<f64> = (1..=cutoff).map(|s| (s as f64).powf(-exponent)).collect();
        let b0_raw: f64 = 2.0 * raw.iter().map(|b| b * b).sum::<f64>();
        let c = (target_b0 / b0_raw).sqrt();
        let cos: Vec<f64> = raw.iter().map(|b| c * b).collect();
        Ok(Self { sin: cos.clone(), cos })
    }

    /// `b_s = c |s|^{-3}` on `1 <= |s| <= 16`, normalized to `B_0 = 1`.
    pub fn default_profile() -> Self {
        Self::power_law(3.0, 16, 1.0).expect("default profile is valid")
    }

    /// Largest `|s|` with a slot in this spec.
    pub fn support(&self) -> usize {
        self.cos.len()
    }

    pub fn amplitude(&self, s: i64) -> f64 {
        let idx = s.unsigned_abs() as usize;
        if s == 0 || idx > self.cos.len() {
            return 0.0;
        }
        if s > 0 {
            self.cos[idx - 1]
        } else {
            self.sin[idx - 1]
        }
    }

    /// Non-zero `(s, b_s)` pairs, positive modes first.
    pub fn pairs(&self) -> Vec<(i64, f64)> {
        let pos = self.cos.iter().enumerate().map(|(i, &b)| (i as i64 + 1, b));
        let neg = self.sin.iter().enumerate().map(|(i, &b)| (-(i as i64) - 1, b));
        pos.chain(neg).filter(|(_, b)| *b != 0.0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&b| b == 0.0)
    }

    /// Highest mode with non-zero amplitude (0 when unforced).
    pub fn effective_support(&self) -> usize {
        (1..=self.cos.len()).rev().find(|&s| self.cos[s - 1] != 0.0 || self.sin[s - 1] != 0.0).unwrap_or(0)
    }
}

/// `B_m = sum_s |s|^{2m} b_s^2`.
pub fn b_sum(spec: &NoiseSpec, m: f64) -> f64 {
    spec.cos.iter().zip(&spec.sin).enumerate().map(|(i, (a, b))| ((i + 1) as f64).powf(2.0 * m) * (a * a + b * b)).sum()
}

/// Per-member random stream.
///
/// The stream is ChaCha8 keyed by `master_seed` with `member_index` as the
/// stream id, so members never share state and a member's draws do not depend
/// on how members are scheduled across workers.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    member_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, member_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(member_index);
        Self { master_seed, member_index, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn member_index(&self) -> u64 {
        self.member_index
    }

    /// Position in the keystream, in 32-bit words.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// `Delta xi_s = b_s g_s`, `g_s ~ N(0, dt)` independent, in the real basis.
///
/// One normal is drawn per slot `s = 1..=S_b` (cosine then sine), including
/// unforced slots, so the stream layout depends only on the support.
pub fn sample_increment(spec: &NoiseSpec, dt: f64, rng: &mut RngStream) -> RealCoeffs {
    assert!(dt > 0.0, "time step must be positive, got {dt}");
    let mut out = RealCoeffs::zeros(spec.support());
    sample_increment_into(spec, dt.sqrt(), rng, &mut out);
    out
}

pub(crate) fn sample_increment_into(spec: &NoiseSpec, sqrt_dt: f64, rng: &mut RngStream, out: &mut RealCoeffs) {
    let (cos, sin) = out.parts_mut();
    for i in 0..spec.cos.len() {
        cos[i] = spec.cos[i] * sqrt_dt * rng.standard_normal();
        sin[i] = spec.sin[i] * sqrt_dt * rng.standard_normal();
    }
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let (mean, std_error) = mean_and_se(samples);
        Self { mean, std_error }
    }
}

/// Second moments of discretely sampled noise paths on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub t_end: f64,
    pub dt: f64,
    pub members: usize,
    /// `E ||xi(T)||^2`
    pub final_sq: Estimate,
    /// Exact value `T B_0`.
    pub final_sq_exact: f64,
    /// `E sup_t ||xi(t)||^2` over the sampled times.
    pub sup_sq: Estimate,
    /// Doob's maximal inequality at `p = 2`: `4 T B_0`.
    pub doob_bound: f64,
}

impl MomentReport {
    /// `|E ||xi(T)||^2 - T B_0| <= k SE`.
    pub fn final_moment_consistent(&self, k: f64) -> bool {
        (self.final_sq.mean - self.final_sq_exact).abs() <= k * self.final_sq.std_error
    }

    /// `E sup ||xi||^2 <= 4 T B_0 + k SE`.
    pub fn doob_holds(&self, k: f64) -> bool {
        self.sup_sq.mean <= self.doob_bound + k * self.sup_sq.std_error
    }
}

/// Simulates `members` paths of `xi` on a grid of step `dt` up to `t_end`
/// (member `i` uses stream `(master_seed, i)`) and reports the moments.
pub fn path_moments_test(spec: &NoiseSpec, t_end: f64, dt: f64, members: usize, master_seed: u64) -> MomentReport {
    assert!(t_end > 0.0 && dt > 0.0, "need positive horizon and step");
    let steps = (t_end / dt).round() as usize;
    let sqrt_dt = dt.sqrt();
    let per_member: Vec<(f64, f64)> = (0..members as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(master_seed, i);
            let mut xi = RealCoeffs::zeros(spec.support());
            let mut inc = RealCoeffs::zeros(spec.support());
            let mut sup: f64 = 0.0;
            for _ in 0..steps {
                sample_increment_into(spec, sqrt_dt, &mut rng, &mut inc);
                let (xc, xs) = xi.parts_mut();
                for (a, b) in xc.iter_mut().zip(inc.cos_part()) {
                    *a += b;
                }
                for (a, b) in xs.iter_mut().zip(inc.sin_part()) {
                    *a += b;
                }
                sup = sup.max(xi.norm_sqr());
            }
            (xi.norm_sqr(), sup)
        })
        .collect();
    let finals: Vec<f64> = per_member.iter().map(|p| p.0).collect();
    let sups: Vec<f64> = per_member.iter().map(|p| p.1).collect();
    let b0 = b_sum(spec, 0.0);
    let horizon = steps as f64 * dt;
    MomentReport {
        t_end: horizon,
        dt,
        members,
        final_sq: Estimate::from_samples(&finals),
        final_sq_exact: horizon * b0,
        sup_sq: Estimate::from_samples(&sups),
        doob_bound: 4.0 * horizon * b0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_pair() -> NoiseSpec {
        NoiseSpec::from_pairs(&[(1, 1.0), (-1, 1.0)]).unwrap()
    }

    #[test]
    fn b_sums() {
        let spec = unit_pair();
        assert_eq!(b_sum(&spec, 0.0), 2.0);
        assert_eq!(b_sum(&spec, 1.0), 2.0);

        let pairs: Vec<(i64, f64)> =
            (1..=3i64).flat_map(|s| [(s, (s as f64).powi(-2)), (-s, (s as f64).powi(-2))]).collect();
        let spec = NoiseSpec::from_pairs(&pairs).unwrap();
        assert_abs_diff_eq!(b_sum(&spec, 0.0), 2.0 * (1.0 + 1.0 / 16.0 + 1.0 / 81.0), epsilon = 1e-15);
    }

    #[test]
    fn default_profile_is_normalized_and_smooth() {
        let spec = NoiseSpec::default_profile();
        assert_abs_diff_eq!(b_sum(&spec, 0.0), 1.0, epsilon = 1e-14);
        assert_eq!(spec.support(), 16);
        assert!(b_sum(&spec, 4.0).is_finite());
        assert_abs_diff_eq!(spec.amplitude(2) / spec.amplitude(1), 0.125, epsilon = 1e-15);
        assert_eq!(spec.amplitude(-3), spec.amplitude(3));
        assert_eq!(spec.amplitude(17), 0.0);
    }

    #[test]
    fn mode_zero_rejected() {
        assert!(NoiseSpec::from_pairs(&[(0, 1.0)]).is_err());
        assert!(NoiseSpec::from_pairs(&[(2, f64::INFINITY)]).is_err());
    }

    #[test]
    fn zero_spec_gives_zero_increment() {
        let spec = NoiseSpec::from_pairs(&[(3, 0.0)]).unwrap();
        let mut rng = RngStream::new(1, 0);
        let inc = sample_increment(&spec, 0.1, &mut rng);
        assert_eq!(inc.norm_sqr(), 0.0);
        assert!(spec.is_zero());
        assert_eq!(spec.effective_support(), 0);
    }

    #[test]
    fn equal_streams_are_bit_identical() {
        let spec = NoiseSpec::default_profile();
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        for _ in 0..50 {
            assert_eq!(sample_increment(&spec, 1e-3, &mut a), sample_increment(&spec, 1e-3, &mut b));
        }
        assert_eq!(a.counter(), b.counter());
        let mut c = RngStream::new(42, 8);
        let mut a = RngStream::new(42, 7);
        assert_ne!(sample_increment(&spec, 1e-3, &mut a), sample_increment(&spec, 1e-3, &mut c));
    }

    #[test]
    fn increment_variance_matches_dt() {
        let spec = NoiseSpec::from_pairs(&[(1, 1.0)]).unwrap();
        let mut rng = RngStream::new(2024, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_increment(&spec, 0.01, &mut rng).get(1)).collect();
        let sq: Vec<f64> = draws.iter().map(|v| v * v).collect();
        let (var, se) = mean_and_se(&sq);
        assert!((var - 0.01).abs() <= 3.0 * se, "variance {var} +- {se}");
    }

    #[test]
    fn moments_of_unit_pair() {
        let report = path_moments_test(&unit_pair(), 1.0, 1e-2, 2000, 99);
        assert_abs_diff_eq!(report.final_sq_exact, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.doob_bound, 8.0, epsilon = 1e-12);
        assert!(report.final_moment_consistent(3.0), "{report:?}");
        assert!(report.doob_holds(3.0), "{report:?}");
        // The running sup dominates the endpoint.
        assert!(report.sup_sq.mean >= report.final_sq.mean);
    }

    #[test]
    fn moments_of_zero_noise_vanish() {
        let report = path_moments_test(&NoiseSpec::zero(), 1.0, 0.1, 10, 0);
        assert_eq!(report.final_sq.mean, 0.0);
        assert_eq!(report.sup_sq.mean, 0.0);
        assert_eq!(report.final_sq.std_error, 0.0);
    }
}
