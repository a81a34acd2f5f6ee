use std::sync::Arc;

use dinls::bounds::{
    blowup_upper, damping_from_gamma, gamma_from_damping, lifespan_damping_threshold, lifespan_lower, BlowCase,
};
use dinls::functionals::{barrier_g, VirialData};
use dinls::model::{admissible_pair, blowup_gamma, theta, validate_params, ModelParams};
use dinls::{Field, Grid, Spectral};
use num_complex::Complex64;
use proptest::prelude::*;

/// Parameters inside the `ge` window: s < N/2, 0 < b < min(2, N − 2s),
/// 0 < α ≤ (4 − 2b)/(N − 2s).
fn ge_params() -> impl Strategy<Value = ModelParams> {
    (1usize..=3, 0u32..=1, 0.01f64..0.99, 0.01f64..1.0, 0.0f64..5.0).prop_filter_map(
        "needs s < N/2",
        |(dim, s, bf, af, a)| {
            let n = dim as f64;
            let room = n - 2.0 * s as f64;
            if room <= 0.0 {
                return None;
            }
            let b = bf * 2.0f64.min(room);
            let crit = (4.0 - 2.0 * b) / room;
            Some(ModelParams::new(dim, s, b, af * crit, 1.0, a))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn admissible_pair_identity(p in ge_params()) {
        prop_assert!(validate_params(&p).unwrap().ge);
        let (gamma, rho) = admissible_pair(&p);
        let lhs = 2.0 / gamma + p.n() / rho;
        let rhs = p.n() / 2.0;
        prop_assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn validation_is_pure(p in ge_params()) {
        prop_assert_eq!(validate_params(&p).unwrap(), validate_params(&p).unwrap());
    }

    #[test]
    fn gamma_damping_round_trip(
        dim in 2usize..=3,
        b in 0.05f64..0.95,
        excess in 0.05f64..2.0,
        a in 0.0f64..10.0,
    ) {
        // Nα − 4 + 2b > 0 keeps γ defined.
        let alpha = (4.0 - 2.0 * b) / dim as f64 + excess;
        let p = ModelParams::new(dim, 1, b, alpha, 1.0, a);
        let back = damping_from_gamma(&p, gamma_from_damping(&p, a).unwrap()).unwrap();
        prop_assert!((back - a).abs() <= 1e-14 * a.max(1.0));
        let double = blowup_gamma(&p.with_damping((2.0 * a).into())).unwrap();
        prop_assert!((double - 2.0 * blowup_gamma(&p).unwrap()).abs() <= 1e-14 * double.abs().max(1.0));
    }

    #[test]
    fn case_ii_bound_is_a_root_of_the_barrier(
        v0 in -5.0f64..-0.05,
        i0 in 0.1f64..5.0,
        frac in 0.0f64..0.99,
    ) {
        let gamma = frac * 4.0 * v0.abs() / i0;
        let vd = VirialData::new(0.0, v0, i0, gamma);
        let t = blowup_upper(&vd).unwrap();
        // g is of size I0 near the root and has slope of size |V0|.
        prop_assert!(barrier_g(&vd, t).abs() <= 1e-10 * i0.max(v0.abs() * t), "g = {}", barrier_g(&vd, t));
    }

    #[test]
    fn case_ii_bound_grows_with_gamma(v0 in -5.0f64..-0.05, i0 in 0.1f64..5.0) {
        let hi = 4.0 * v0.abs() / i0;
        let mut last = 0.0;
        for j in 0..50 {
            let vd = VirialData::new(0.0, v0, i0, hi * j as f64 / 50.0);
            let t = blowup_upper(&vd).unwrap();
            prop_assert!(t >= last * (1.0 - 1e-12), "γ step {j}: {t} < {last}");
            last = t;
        }
    }

    #[test]
    fn lifespan_monotone(
        p in ge_params().prop_filter("subcritical", |p| !validate_params(p).unwrap().ge_critical),
        norm in 0.1f64..5.0,
        c in 0.1f64..5.0,
    ) {
        let base = lifespan_lower(&p, norm, c).unwrap().as_f64();
        let larger_norm = lifespan_lower(&p, 1.5 * norm, c).unwrap().as_f64();
        prop_assert!(larger_norm <= base);
        let more_damping = lifespan_lower(&p.with_damping((p.damping() + 0.5).into()), norm, c).unwrap().as_f64();
        prop_assert!(more_damping >= base);
        let threshold = lifespan_damping_threshold(&p, norm, c).unwrap();
        // Near the critical exponent C‖u0‖^{αθ} can under- or overflow.
        prop_assume!(threshold > f64::MIN_POSITIVE * 1e10 && threshold < f64::MAX / 1e10);
        prop_assert!(lifespan_lower(&p.with_damping(threshold.into()), norm, c).unwrap().is_infinite());
        let below = threshold * (1.0 - 1e-9);
        prop_assert!(!lifespan_lower(&p.with_damping(below.into()), norm, c).unwrap().is_infinite());
    }

    #[test]
    fn fft_round_trip_and_parseval(
        dim in 1usize..=3,
        seed in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let n = [64, 32, 16][dim - 1];
        let grid = Arc::new(Grid::new(dim, n, 5.0).unwrap());
        let values: Vec<Complex64> = (0..grid.len())
            .map(|i| Complex64::new(seed[i % 64], seed[(7 * i + 3) % 64] * (i as f64).sin()))
            .collect();
        let field = Field::from_values(grid.clone(), values.clone()).unwrap();
        let spectral = Spectral::new(grid.clone());
        let mut data = values.clone();
        spectral.forward(&mut data);
        let fourier_mass: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_volume() / grid.len() as f64;
        prop_assert!((fourier_mass - field.mass()).abs() <= 1e-12 * field.mass().max(1e-300));
        spectral.inverse(&mut data);
        let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = data.iter().zip(&values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-13 * scale);
    }
}

#[test]
fn theta_diverges_only_at_the_critical_exponent() {
    for (dim, s, b) in [(1, 0, 0.5), (2, 0, 0.3), (3, 1, 0.5), (3, 0, 1.2)] {
        let p = ModelParams::new(dim, s, b, 1.0, 1.0, 0.0);
        let crit = p.hs_critical_alpha();
        assert!(theta(&ModelParams { alpha: crit, ..p }).is_infinite());
        for off in [1e-9, 1e-6, 1e-2, -1e-6, -1e-2] {
            let t = theta(&ModelParams { alpha: crit + off, ..p });
            assert!(t.is_finite(), "α = crit + {off}");
        }
        // θ grows without bound as α approaches the critical value from below.
        let near = theta(&ModelParams { alpha: crit - 1e-9, ..p });
        assert!(near > 1e8);
    }
}

#[test]
fn case_two_examples() {
    // E0 = 0, V0 = −1, I0 = 1: bound log(1 + γ/(4 − γ))/γ, γ = 1 gives log(4/3).
    let vd = VirialData::new(0.0, -1.0, 1.0, 1.0);
    assert!((blowup_upper(&vd).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    assert_eq!(dinls::bounds::blow_case_for(&vd).unwrap().0, BlowCase::Ii);
}
