//! Distributional checks of the sampled forcing against chi-square quantiles.

use burgulence::noise::{sample_increment, NoiseSpec, RngStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn standardized(spec: &NoiseSpec, dt: f64, rng: &mut RngStream) -> Vec<f64> {
    let inc = sample_increment(spec, dt, rng);
    let mut z = Vec::new();
    for s in 1..=spec.support() as i64 {
        for m in [s, -s] {
            let b = spec.amplitude(m);
            if b > 0.0 {
                z.push(inc.get(m) / (b * dt.sqrt()));
            }
        }
    }
    z
}

#[test]
fn increments_have_the_prescribed_variance() {
    let spec = NoiseSpec::default_profile();
    let mut rng = RngStream::new(42, 0);
    let draws = 2000;
    let mut sum = 0.0;
    let mut count = 0usize;
    for _ in 0..draws {
        for z in standardized(&spec, 1e-3, &mut rng) {
            sum += z * z;
            count += 1;
        }
    }
    let chi = ChiSquared::new(count as f64).unwrap();
    let (lo, hi) = (chi.inverse_cdf(5e-4), chi.inverse_cdf(1.0 - 5e-4));
    assert!(lo < sum && sum < hi, "{sum} outside [{lo}, {hi}] for {count} dof");
}

#[test]
fn member_streams_are_uncorrelated() {
    let spec = NoiseSpec::from_pairs(&[(1, 1.0), (-1, 1.0), (3, 0.5)]).unwrap();
    let draws = 5000;
    let mut a = RngStream::new(7, 0);
    let mut b = RngStream::new(7, 1);
    let mut cross = 0.0;
    let mut n = 0.0;
    for _ in 0..draws {
        for (x, y) in standardized(&spec, 1.0, &mut a).iter().zip(standardized(&spec, 1.0, &mut b)) {
            cross += x * y;
            n += 1.0;
        }
    }
    // the mean of products of independent standard normals has standard deviation 1 / sqrt(n)
    assert!((cross / n).abs() < 4.0 / n.sqrt(), "{}", cross / n);
}

#[test]
fn squared_norm_of_one_increment_is_chi_square_for_a_flat_profile() {
    let spec = NoiseSpec::from_pairs(&[(1, 1.0), (-1, 1.0), (2, 1.0), (-2, 1.0)]).unwrap();
    let dt = 0.01;
    let mut rng = RngStream::new(3, 9);
    let chi = ChiSquared::new(4.0).unwrap();
    let samples: Vec<f64> = (0..4000).map(|_| sample_increment(&spec, dt, &mut rng).norm_sqr() / dt).collect();
    // empirical CDF against the exact law at a few points
    for q in [0.1, 0.5, 0.9] {
        let x = chi.inverse_cdf(q);
        let frac = samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64;
        assert!((frac - q).abs() < 4.0 * (q * (1.0 - q) / samples.len() as f64).sqrt(), "q {q}: {frac}");
    }
}
