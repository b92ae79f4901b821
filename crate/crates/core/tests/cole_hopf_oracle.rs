//! Deterministic Burgers against a Cole-Hopf solution built here by direct
//! quadrature and summation, with no FFT.

use std::f64::consts::{PI, SQRT_2};

use burgulence::dynamics::{cole_hopf, SimConfig, Simulation};
use burgulence::noise::{NoiseSpec, RngStream};
use burgulence::spectral::{to_grid, SpectralField};
use burgulence::Complex64;

/// `u(x, t)` for `u0 = amp sqrt2 cos(2 pi x)` from `phi = exp(-Phi / (2 nu))`.
fn reference(amp: f64, nu: f64, t: f64, xs: &[f64]) -> Vec<f64> {
    let quad = 2048;
    let modes = 60i64;
    let phi0 = |x: f64| (-(amp * SQRT_2 * (2.0 * PI * x).sin() / (2.0 * PI)) / (2.0 * nu)).exp();
    let coeffs: Vec<(i64, Complex64)> = (-modes..=modes)
        .map(|n| {
            let c = (0..quad)
                .map(|j| {
                    let x = j as f64 / quad as f64;
                    phi0(x) * Complex64::from_polar(1.0, -2.0 * PI * n as f64 * x)
                })
                .sum::<Complex64>()
                / quad as f64;
            let w = 2.0 * PI * n as f64;
            (n, c * (-nu * w * w * t).exp())
        })
        .collect();
    xs.iter()
        .map(|&x| {
            let (mut phi, mut dphi) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &(n, c) in &coeffs {
                let e = Complex64::from_polar(1.0, 2.0 * PI * n as f64 * x);
                phi += c * e;
                dphi += c * e * Complex64::new(0.0, 2.0 * PI * n as f64);
            }
            -2.0 * nu * dphi.re / phi.re
        })
        .collect()
}

#[test]
fn library_oracle_matches_direct_summation() {
    let (nu, t) = (0.1, 0.5);
    let grid = 512;
    let xs: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();
    let want = reference(1.0, nu, t, &xs);
    let got = to_grid(&cole_hopf(&SpectralField::basis(128, 1, 1.0), nu, t).unwrap(), grid).unwrap();
    for (a, b) in got.values().iter().zip(&want) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn integrator_converges_to_direct_summation() {
    let (nu, t, n) = (0.1, 0.5, 128);
    let grid = 512;
    let xs: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();
    let want = reference(1.0, nu, t, &xs);
    let mut errors = Vec::new();
    for dt in [4e-4, 2e-4, 1e-4] {
        let cfg = SimConfig::new(nu, n, dt, t);
        let mut sim =
            Simulation::new(SpectralField::basis(n, 1, 1.0), &cfg, &NoiseSpec::zero(), RngStream::new(0, 0)).unwrap();
        for _ in 0..cfg.n_steps().unwrap() {
            sim.advance().unwrap();
        }
        let got = to_grid(sim.state(), grid).unwrap();
        errors.push(got.values().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    assert!(errors[2] <= 1e-4, "{errors:?}");
    // first order in time
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..2.3).contains(&ratio), "{errors:?}");
    }
}
