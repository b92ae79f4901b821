//! Cross-module invariants on generated fields and short trajectories.

use burgulence::diagnostics::{bracket, kruzhkov_stats};
use burgulence::dynamics::{random_smooth_field, run, run_coupled, InitialCondition, SimConfig};
use burgulence::noise::{NoiseSpec, RngStream};
use burgulence::spectral::{to_grid, SpectralField};
use burgulence::turbulence::second_order_increment_spectral;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_sided_bounds_hold_for_smooth_fields(seed in any::<u64>(), scale in 0.1f64..5.0, decay in 1.0f64..3.0) {
        let mut rng = RngStream::new(seed, 0);
        let u = &random_smooth_field(32, 12, decay, &mut rng) * scale;
        let k = kruzhkov_stats(&u, 2048).unwrap();
        prop_assert!(k.one_sided_bounds_hold(1e-2), "{k:?}");
    }

    #[test]
    fn second_order_increment_matches_the_grid(seed in any::<u64>(), shift in 1usize..64) {
        let mut rng = RngStream::new(seed, 1);
        let u = random_smooth_field(16, 16, 1.0, &mut rng);
        let g = 128;
        let v = to_grid(&u, g).unwrap();
        let vals = v.values();
        let direct = (0..g).map(|j| (vals[(j + shift) % g] - vals[j]).powi(2)).sum::<f64>() / g as f64;
        let spectral = second_order_increment_spectral(&u, shift as f64 / g as f64);
        prop_assert!((direct - spectral).abs() <= 1e-10 * (1.0 + direct));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn coupled_solutions_contract_in_l1(seed in 0u64..1_000_000) {
        let dt = 5e-4;
        let cfg = SimConfig::new(0.05, 48, dt, 0.5);
        let u1 = InitialCondition::RandomSmooth { h1_norm: 4.0, seed }.build(48);
        let u2 = InitialCondition::RandomSmooth { h1_norm: 4.0, seed: seed ^ 0x5555 }.build(48);
        let rec = run_coupled(&u1, &u2, &cfg, &NoiseSpec::default_profile(), RngStream::new(seed, 0)).unwrap();
        prop_assert!(rec.max_excess_growth(10.0 * dt) <= 0.0);
    }
}

#[test]
fn unforced_energy_decays_monotonically() {
    let mut cfg = SimConfig::new(0.05, 64, 5e-4, 1.0);
    cfg.save_every = 10;
    let u0 = InitialCondition::RandomSmooth { h1_norm: 5.0, seed: 3 }.build(64);
    let rec = run(&u0, &cfg, &NoiseSpec::zero(), RngStream::new(0, 0)).unwrap();
    for w in rec.rows.windows(2) {
        assert!(w[1].norm0 < w[0].norm0);
        // nonlinear transfer keeps the energy budget: d/dt ||u||^2 = -2 nu ||u||_1^2
        let dt = w[1].t - w[0].t;
        let predicted = -2.0 * cfg.nu * 0.5 * (w[0].norm1.powi(2) + w[1].norm1.powi(2)) * dt;
        let actual = w[1].norm0.powi(2) - w[0].norm0.powi(2);
        assert!((actual - predicted).abs() <= 0.02 * predicted.abs(), "{actual} vs {predicted}");
    }
}

#[test]
fn bracket_of_the_recorded_energy_matches_the_rows() {
    let mut cfg = SimConfig::new(0.1, 32, 1e-3, 2.0);
    cfg.save_every = 1;
    let spec = NoiseSpec::default_profile();
    let u0 = SpectralField::zeros(32);
    let recs: Vec<_> = (0..4).map(|i| run(&u0, &cfg, &spec, RngStream::new(1, i)).unwrap()).collect();
    let b = bracket(&recs, |r| r.norm0 * r.norm0, 1.0, 1.0).unwrap();
    // independent left-endpoint sum on the same rows; the step is small enough that both agree
    let per_member: Vec<f64> = recs
        .iter()
        .map(|r| {
            r.rows
                .iter()
                .filter(|row| row.t >= 1.0 - 1e-9 && row.t < 2.0 - 1e-9)
                .map(|row| row.norm0.powi(2))
                .sum::<f64>()
                * cfg.dt
        })
        .collect();
    let mean = per_member.iter().sum::<f64>() / 4.0;
    assert!((b.value - mean).abs() < 0.01 * mean, "{} vs {mean}", b.value);
}

#[test]
fn recorded_norms_satisfy_poincare() {
    let mut cfg = SimConfig::new(0.05, 32, 1e-3, 1.0);
    cfg.save_every = 5;
    let rec = run(&SpectralField::zeros(32), &cfg, &NoiseSpec::default_profile(), RngStream::new(2, 0)).unwrap();
    let c = (2.0 * std::f64::consts::PI).powi(2);
    for row in &rec.rows[1..] {
        assert!(row.norm1.powi(2) >= c * row.norm0.powi(2) * (1.0 - 1e-12));
        assert!(row.norm2.powi(2) >= c * row.norm1.powi(2) * (1.0 - 1e-12));
    }
}
