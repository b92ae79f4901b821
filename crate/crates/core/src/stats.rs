//! Small numerical reductions shared by the estimators.

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Sample mean and standard error `sd / sqrt(n)` (unbiased variance).
/// A single sample has standard error zero.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Wilson score interval for a binomial proportion `successes / n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Slack for window edges that land on sample times up to round-off.
const EDGE_SLACK: f64 = 1e-9;

/// Trapezoidal integral of a sampled signal over `[start, end]`, with linear
/// interpolation at window edges that fall between samples.
///
/// `times` must be non-decreasing.
pub fn trapezoid_window(times: &[f64], values: &[f64], start: f64, end: f64) -> Result<f64> {
    debug_assert_eq!(times.len(), values.len());
    let (first, last) = match (times.first(), times.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Window { start, end, first: f64::NAN, last: f64::NAN }),
    };
    let slack = EDGE_SLACK * (1.0 + last.abs());
    if !(end >= start) || start < first - slack || end > last + slack {
        return Err(Error::Window { start, end, first, last });
    }
    let start = start.max(first);
    let end = end.min(last);
    if end == start {
        return Ok(0.0);
    }
    let interp = |t: f64| -> f64 {
        let i = times.partition_point(|&x| x < t);
        if i == 0 {
            return values[0];
        }
        if i >= times.len() {
            return values[times.len() - 1];
        }
        let (t0, t1) = (times[i - 1], times[i]);
        if t1 == t0 {
            return values[i];
        }
        let w = (t - t0) / (t1 - t0);
        values[i - 1] * (1.0 - w) + values[i] * w
    };
    let mut acc = CompensatedSum::default();
    let mut prev_t = start;
    let mut prev_v = interp(start);
    let lo = times.partition_point(|&x| x <= start);
    for i in lo..times.len() {
        if times[i] >= end {
            break;
        }
        acc.add(0.5 * (prev_v + values[i]) * (times[i] - prev_t));
        prev_t = times[i];
        prev_v = values[i];
    }
    let end_v = interp(end);
    acc.add(0.5 * (prev_v + end_v) * (end - prev_t));
    Ok(acc.value())
}

/// Least-squares line `y = a + b x`: returns `(a, b, se_b, r_squared)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let se = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (intercept, slope, se, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_interval_known_values() {
        // 5 of 10 at z = 1.96: centre 0.5, half-width 1.96 sqrt(0.025 + 0.0096) / 1.384
        let (lo, hi) = wilson_interval(5, 10, 1.96);
        assert_abs_diff_eq!(lo, 0.236_590, epsilon = 1e-5);
        assert_abs_diff_eq!(hi, 0.763_410, epsilon = 1e-5);
        let (lo, hi) = wilson_interval(0, 20, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1e16, 1.0, -1e16];
        v.extend(std::iter::repeat_n(1e-3, 1000));
        assert_abs_diff_eq!(compensated_sum(v), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn mean_and_se_basic() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5);
        assert_abs_diff_eq!(se, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert_eq!(mean_and_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn trapezoid_is_exact_on_linear_signals() {
        let t: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x - 1.0).collect();
        // off-grid edges
        let exact = |a: f64, b: f64| 1.5 * (b * b - a * a) - (b - a);
        assert_abs_diff_eq!(trapezoid_window(&t, &v, 0.0, 2.0).unwrap(), exact(0.0, 2.0), epsilon = 1e-12);
        assert_abs_diff_eq!(trapezoid_window(&t, &v, 0.33, 1.57).unwrap(), exact(0.33, 1.57), epsilon = 1e-12);
        assert_abs_diff_eq!(trapezoid_window(&t, &v, 0.5, 0.5).unwrap(), 0.0);
        assert!(matches!(trapezoid_window(&t, &v, -0.1, 1.0), Err(Error::Window { .. })));
        assert!(matches!(trapezoid_window(&t, &v, 1.0, 2.5), Err(Error::Window { .. })));
    }

    #[test]
    fn regression_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (a, b, se, r2) = linear_regression(&x, &y);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(se, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }
}
