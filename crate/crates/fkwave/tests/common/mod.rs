//! Shared helpers for the integration tests.

use fkwave::fields::{symmetrize, CompositeField, Grid, Parity};
use rand::Rng;

/// Sum of a few Gaussian-windowed oscillations, symmetrized to `parity`.
pub fn random_decaying(grid: Grid, parity: Parity, rng: &mut impl Rng) -> CompositeField {
    let bumps: Vec<(f64, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-6.0..6.0),
                rng.gen_range(0.8..3.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut values: Vec<f64> = grid
        .xs()
        .iter()
        .map(|&x| {
            bumps
                .iter()
                .map(|&(a, c, w, k, ph)| a * (-((x - c) / w).powi(2)).exp() * (k * x + ph).cos())
                .sum()
        })
        .collect();
    symmetrize(&mut values, &grid, parity);
    CompositeField::from_grid(grid, values, parity)
}
