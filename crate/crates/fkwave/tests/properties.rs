//! Property tests for the dispersion, profile and field invariants.

mod common;

use fkwave::dispersion::{dispersion_eval, inversion_constants, kernel_roots, Params, K0};
use fkwave::fields::{
    apply_l, h2_norm, parity_defect, sup_norms, Analytic, CompositeField, Grid, Parity,
};
use fkwave::profiles::{Mollifier, ProfileSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_points_are_roots(c2 in 0.83f64..=1.0) {
        let p = Params::new(c2).unwrap();
        prop_assert!(dispersion_eval(K0, &p).0.abs() <= 1e-12);
        prop_assert!(dispersion_eval(-K0, &p).0.abs() <= 1e-12);
    }

    #[test]
    fn symbol_even_and_derivative_odd(c2 in 0.83f64..=1.0, z in -20.0f64..20.0) {
        let p = Params::new(c2).unwrap();
        let (d, dp) = dispersion_eval(z, &p);
        let (dm, dpm) = dispersion_eval(-z, &p);
        prop_assert!((d - dm).abs() <= 1e-12 * (1.0 + d.abs()));
        prop_assert!((dp + dpm).abs() <= 1e-12 * (1.0 + dp.abs()));
    }

    #[test]
    fn profile_amplitudes_sum_to_one(c2 in 0.83f64..=1.0) {
        let s = ProfileSpec::new(&Params::new(c2).unwrap());
        prop_assert!((s.exp_amplitude + s.trig_amplitude - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn mollified_force_bounds(eps in 1e-3f64..0.1, u in -0.5f64..0.5, x in -3.0f64..3.0) {
        let m = Mollifier::new(eps).unwrap();
        prop_assert!((m.prime(u) + m.prime(-u)).abs() <= 1e-15);
        prop_assert!(m.prime(eps) == 1.0 && m.prime(-eps) == -1.0);
        let w = (1.0 + x * x).powf(1.5);
        prop_assert!(w * m.partial11(u, x).abs() <= m.envelope_constant() * (1.0 + 1e-12));
    }

    #[test]
    fn kernel_roots_certified(c2 in 0.83f64..=1.0) {
        let r = kernel_roots(&Params::new(c2).unwrap()).unwrap();
        prop_assert!(r.certified);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn l_preserves_parity(seed in any::<u64>(), odd in any::<bool>()) {
        let grid = Grid::new(32, 8).unwrap().with_tail_tol(1e-6);
        let parity = if odd { Parity::Odd } else { Parity::Even };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_decaying(grid, parity, &mut rng);
        let p = Params::new(0.9).unwrap();
        let lf = apply_l(&f, &p).unwrap().total();
        let scale = lf.iter().map(|v| v.abs()).fold(1.0, f64::max);
        prop_assert!(parity_defect(&lf, &grid, parity) <= 1e-12 * scale);
    }

    #[test]
    fn sobolev_embedding(seed in any::<u64>()) {
        let grid = Grid::new(32, 8).unwrap().with_tail_tol(1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_decaying(grid, Parity::None, &mut rng);
        let h2 = h2_norm(&f).unwrap();
        let (s0, s1) = sup_norms(&f).unwrap();
        prop_assert!(s0 <= 0.5 * h2 + 1e-6);
        prop_assert!(s1 <= 0.5 * h2 + 1e-6);
    }
}

#[test]
fn kernel_modes_are_annihilated() {
    let grid = Grid::new(64, 16).unwrap();
    for c2 in [0.83, 0.9, 1.0] {
        let p = Params::new(c2).unwrap();
        for a in [Analytic::KernelSin, Analytic::KernelCos] {
            let f = CompositeField::from_analytic(grid, a, Parity::None);
            let lf = apply_l(&f, &p).unwrap().total();
            assert!(lf.iter().all(|v| v.abs() <= 1e-10));
        }
    }
}

#[test]
fn bound_factor_trend_is_reported() {
    // Monotonicity is not asserted: the factor peaks where D'(k0/2) vanishes.
    let values: Vec<f64> = [0.83, 0.85, 0.95, 1.0]
        .iter()
        .map(|&c2| {
            inversion_constants(&Params::new(c2).unwrap())
                .unwrap()
                .bound_factor
        })
        .collect();
    assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));
    let at_one = inversion_constants(&Params::new(1.0).unwrap())
        .unwrap()
        .bound_factor;
    assert!((at_one - 34.385).abs() < 0.01);
}
