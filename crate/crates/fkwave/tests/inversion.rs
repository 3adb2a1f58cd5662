//! Randomized checks of the inverse of L on moment-projected data.

mod common;

use fkwave::dispersion::{inversion_constants, Params};
use fkwave::fields::{Grid, KernelMode, Parity};
use fkwave::linsolve::{check_inversion, invert_l, project_moment};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(parity: Parity, mode: KernelMode, seed: u64) {
    // The projection window is not small in the tail band, hence the looser tail tolerance.
    let grid = Grid::new(64, 16).unwrap().with_tail_tol(1e-2);
    let p = Params::new(1.0).unwrap();
    let constants = inversion_constants(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..100 {
        let q = common::random_decaying(grid, parity, &mut rng);
        let proj = project_moment(&q, mode).unwrap();
        let inv = invert_l(&proj.field, &p, parity).unwrap();
        let check = check_inversion(&proj.field, &inv, &p, &constants);
        assert!(check.bound_ratio <= 1.0, "{check:?}");
        assert!(check.round_trip <= 1e-10, "{check:?}");
        assert!(check.residue <= 1e-8, "{check:?}");
        assert_eq!(inv.r.parity, parity);
        assert!(inv.r.parity_defect() <= 1e-12);
        worst_ratio = worst_ratio.max(check.bound_ratio);
    }
    assert!(worst_ratio > 0.0);
}

#[test]
fn odd_fields_obey_the_bound() {
    run(Parity::Odd, KernelMode::Sin, 11);
}

#[test]
fn even_fields_obey_the_bound() {
    run(Parity::Even, KernelMode::Cos, 12);
}
