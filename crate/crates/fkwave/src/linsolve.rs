//! Inversion of L on decaying odd or even data with vanishing kernel moment.
//!
//! Modes j != +-X/2 are divided by the symbol D(k_j). At +-k0 the symbol
//! vanishes exactly; there the returned corrector carries the kernel-mode
//! content of the decaying whole-line solution, r^(k0) = Q^'(k0)/D'(k0),
//! which keeps the corrector decaying on the periodic box.

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::{symbol, symbol_prime, InversionConstants, Params};
use crate::error::{Result, WaveError};
use crate::fields::{
    apply_l_values, discrete_moment, h2_norm_values, l2_norm, spectral, symmetrize,
    weighted_norm_values, CompositeField, Grid, KernelMode, Parity, SpectralField, WeightPower,
};

/// Moment tolerance, relative to max(1, ||Q||_{L^2}).
pub const MOMENT_TOL: f64 = 1e-10;

/// Modes whose symbol falls below this are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-8;

/// Width of the projection window sech(x / PROJECTION_WIDTH).
pub const PROJECTION_WIDTH: f64 = 8.0;

/// Result of removing a kernel moment.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub field: CompositeField,
    /// Moment value removed from the input.
    pub defect: f64,
}

/// Subtracts mu * mode(k0 x) * sech(x/8) so that the discrete kernel moment
/// of the result is zero. Analytic parts are folded into the grid first.
pub fn project_moment(q: &CompositeField, mode: KernelMode) -> Result<Projection> {
    let mut field = q.folded();
    field.check_tail()?;
    let grid = field.grid;
    let defect = discrete_moment(&field.grid_part, &grid, mode);
    if defect != 0.0 {
        let window: Vec<f64> = grid
            .xs()
            .iter()
            .map(|&x| mode.eval(x) / (x / PROJECTION_WIDTH).cosh())
            .collect();
        let norm = discrete_moment(&window, &grid, mode);
        let mu = defect / norm;
        for (f, w) in field.grid_part.iter_mut().zip(&window) {
            *f -= mu * w;
        }
    }
    Ok(Projection { field, defect })
}

/// Corrector with the bookkeeping of its inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub r: CompositeField,
    /// Coefficients of Q at +-k0 removed before division.
    pub residue: [Complex64; 2],
    /// Kernel-mode coefficient restored after division.
    pub kernel_coefficient: f64,
}

impl Inversion {
    /// Magnitude of the deflated residue in moment units (h |Q^(k0)|).
    pub fn residue_magnitude(&self) -> f64 {
        self.r.grid.spacing() * self.residue[0].norm().max(self.residue[1].norm())
    }
}

fn moment_tol(values: &[f64], grid: &Grid) -> f64 {
    MOMENT_TOL * l2_norm(values, grid).max(1.0)
}

/// Checks that the kernel moment of `values` for `mode` is negligible.
pub fn check_moment(values: &[f64], grid: &Grid, mode: KernelMode) -> Result<f64> {
    let moment = discrete_moment(values, grid, mode);
    let tol = moment_tol(values, grid);
    if moment.abs() > tol {
        Err(WaveError::MomentViolated { moment, tol })
    } else {
        Ok(moment)
    }
}

/// Solves L r = Q for `parity` odd or even. Q must be decaying and its
/// matching kernel moment (sin for odd, cos for even) must vanish.
pub fn invert_l(q: &CompositeField, p: &Params, parity: Parity) -> Result<Inversion> {
    let mode = KernelMode::matching(parity)
        .ok_or_else(|| WaveError::InvalidParams("invert_l needs an odd or even parity".into()))?;
    let mut field = q.folded();
    field.check_tail()?;
    let grid = field.grid;
    symmetrize(&mut field.grid_part, &grid, parity);
    check_moment(&field.grid_part, &grid, mode)?;
    let (mut values, residue) = divide_by_symbol(&field.grid_part, &grid, p)?;

    // Kernel-mode content of the decaying solution: the integral of r against
    // the matching mode equals the x-moment of Q against the other mode over D'(k0).
    let h = grid.spacing();
    let dp = symbol_prime(p.k0, p.c2);
    let xs = grid.xs();
    let x_moment: f64 = match mode {
        KernelMode::Sin => {
            h * xs
                .iter()
                .zip(&field.grid_part)
                .map(|(x, v)| x * v * (p.k0 * x).cos())
                .sum::<f64>()
        }
        KernelMode::Cos => {
            -h * xs
                .iter()
                .zip(&field.grid_part)
                .map(|(x, v)| x * v * (p.k0 * x).sin())
                .sum::<f64>()
        }
    };
    let kernel_coefficient = x_moment / dp / grid.half_length() as f64;
    for (v, x) in values.iter_mut().zip(&xs) {
        *v += kernel_coefficient * mode.eval(*x);
    }
    symmetrize(&mut values, &grid, parity);

    Ok(Inversion {
        r: CompositeField::from_grid(grid, values, parity),
        residue,
        kernel_coefficient,
    })
}

/// Divides the spectrum by D(k_j), zeroing +-k0 and returning their removed values.
fn divide_by_symbol(values: &[f64], grid: &Grid, p: &Params) -> Result<(Vec<f64>, [Complex64; 2])> {
    let mut spec = SpectralField::from_values(values, *grid);
    spec.deflate_kernel();
    let kernel = grid.kernel_indices();
    for (j, c) in spec.coefficients.iter_mut().enumerate() {
        if j == kernel[0] || j == kernel[1] {
            continue;
        }
        let d = symbol(grid.wavenumber(j), p.c2, p.alpha);
        if d.abs() < SINGULAR_TOL {
            return Err(WaveError::NearSingularMode { index: j, value: d });
        }
        *c /= d;
    }
    let residue = [spec.deflated_modes[0].1, spec.deflated_modes[1].1];
    Ok((spec.to_values(), residue))
}

/// Odd and even corrector pieces of a general inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralInversion {
    pub r: CompositeField,
    pub odd: Inversion,
    pub even: Inversion,
}

/// Inverts data without parity by splitting Q = Q_o + Q_e.
pub fn invert_l_general(q: &CompositeField, p: &Params) -> Result<GeneralInversion> {
    let field = q.folded();
    let grid = field.grid;
    let mut q_odd = field.grid_part.clone();
    let mut q_even = field.grid_part.clone();
    symmetrize(&mut q_odd, &grid, Parity::Odd);
    symmetrize(&mut q_even, &grid, Parity::Even);
    let odd = invert_l(
        &CompositeField::from_grid(grid, q_odd, Parity::Odd),
        p,
        Parity::Odd,
    )?;
    let even = invert_l(
        &CompositeField::from_grid(grid, q_even, Parity::Even),
        p,
        Parity::Even,
    )?;
    let values = odd
        .r
        .grid_part
        .iter()
        .zip(&even.r.grid_part)
        .map(|(a, b)| a + b)
        .collect();
    Ok(GeneralInversion {
        r: CompositeField::from_grid(grid, values, Parity::None),
        odd,
        even,
    })
}

/// Quality figures of one inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionCheck {
    pub h2_norm: f64,
    pub weighted_data_norm: f64,
    /// ||r||_{H^2} / (bound_factor ||(1+x^2) Q||_{L^2}); at most 1 when the bound holds.
    pub bound_ratio: f64,
    /// ||L r - Q|| / ||Q|| in discrete L^2.
    pub round_trip: f64,
    pub residue: f64,
}

/// Evaluates the weighted H^2 bound and the round trip of an inversion.
pub fn check_inversion(
    q: &CompositeField,
    inv: &Inversion,
    p: &Params,
    constants: &InversionConstants,
) -> InversionCheck {
    let q = q.folded();
    let grid = q.grid;
    let h2 = h2_norm_values(&inv.r.grid_part, &grid);
    let wq = weighted_norm_values(&q.grid_part, &grid, WeightPower::One);
    let lr = apply_l_values(&inv.r.grid_part, &grid, p);
    let diff: Vec<f64> = lr.iter().zip(&q.grid_part).map(|(a, b)| a - b).collect();
    let qn = l2_norm(&q.grid_part, &grid);
    InversionCheck {
        h2_norm: h2,
        weighted_data_norm: wq,
        bound_ratio: if wq > 0.0 {
            h2 / (constants.bound_factor * wq)
        } else {
            0.0
        },
        round_trip: if qn > 0.0 {
            l2_norm(&diff, &grid) / qn
        } else {
            l2_norm(&diff, &grid)
        },
        residue: inv.residue_magnitude(),
    }
}

/// Spectral first derivative of a corrector, for sup-norm checks.
pub fn corrector_derivative(r: &CompositeField) -> Vec<f64> {
    spectral::derivative(&r.grid_part, &r.grid, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::inversion_constants;
    use crate::fields::{apply_l, Analytic};

    fn odd_bump(grid: &Grid) -> Vec<f64> {
        grid.xs().iter().map(|x| x * (-x * x).exp()).collect()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = Grid::default();
        let p = Params::new(0.9).unwrap();
        let inv = invert_l(&CompositeField::zeros(g, Parity::Odd), &p, Parity::Odd).unwrap();
        assert!(inv.r.grid_part.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn projection_cases() {
        let g = Grid::default();
        let zero = CompositeField::zeros(g, Parity::Odd);
        let pr = project_moment(&zero, KernelMode::Sin).unwrap();
        assert_eq!(pr.defect, 0.0);
        assert_eq!(pr.field, zero);

        // The window itself is ~1e-3 in the tail band.
        let g = g.with_tail_tol(1e-2);
        let w: Vec<f64> = g
            .xs()
            .iter()
            .map(|x| (K * x).sin() / (x / 8.0).cosh())
            .collect();
        let own = discrete_moment(&w, &g, KernelMode::Sin);
        let pr = project_moment(
            &CompositeField::from_grid(g, w, Parity::Odd),
            KernelMode::Sin,
        )
        .unwrap();
        assert!((pr.defect - own).abs() < 1e-14);
        assert!(discrete_moment(&pr.field.grid_part, &g, KernelMode::Sin).abs() < 1e-12);

        let odd = CompositeField::from_grid(g, odd_bump(&g), Parity::Odd);
        assert!(project_moment(&odd, KernelMode::Cos).unwrap().defect.abs() < 1e-15);
    }

    const K: f64 = crate::dispersion::K0;

    #[test]
    fn recovers_decaying_preimage() {
        // Q = L g for g = x e^{-x^2}; the whole-line solution is g itself.
        let g = Grid::default();
        for c2 in [0.85, 1.0] {
            let p = Params::new(c2).unwrap();
            let gv = odd_bump(&g);
            let q = apply_l_values(&gv, &g, &p);
            let pr = project_moment(
                &CompositeField::from_grid(g, q, Parity::Odd),
                KernelMode::Sin,
            )
            .unwrap();
            let inv = invert_l(&pr.field, &p, Parity::Odd).unwrap();
            let err = inv
                .r
                .grid_part
                .iter()
                .zip(&gv)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "c2={c2} err={err}");
            let k = inversion_constants(&p).unwrap();
            let chk = check_inversion(&pr.field, &inv, &p, &k);
            assert!(chk.round_trip < 1e-10);
            assert!(chk.bound_ratio < 1.0);
        }
    }

    #[test]
    fn even_inversion_recovers_preimage() {
        let g = Grid::default();
        let p = Params::new(0.9).unwrap();
        let gv: Vec<f64> = g.xs().iter().map(|x| (-x * x).exp()).collect();
        let q = apply_l_values(&gv, &g, &p);
        let inv = invert_l(
            &CompositeField::from_grid(g, q, Parity::Even),
            &p,
            Parity::Even,
        )
        .unwrap();
        assert!(inv.r.tail_magnitude() < 1e-12);
        assert!(inv.residue_magnitude() < 1e-8);
        let err = inv
            .r
            .grid_part
            .iter()
            .zip(&gv)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn moment_violation_rejected() {
        let g = Grid::default();
        let p = Params::new(0.9).unwrap();
        let q: Vec<f64> = g
            .xs()
            .iter()
            .map(|x| (K * x).sin() * (-x * x / 8.0).exp())
            .collect();
        let f = CompositeField::from_grid(g, q, Parity::Odd);
        assert!(matches!(
            invert_l(&f, &p, Parity::Odd),
            Err(WaveError::MomentViolated { .. })
        ));
        assert!(invert_l(&f, &p, Parity::None).is_err());
    }

    #[test]
    fn general_inversion_splits_parities() {
        let g = Grid::default();
        let p = Params::new(0.95).unwrap();
        let gv: Vec<f64> = g
            .xs()
            .iter()
            .map(|x| (x + 0.5 * x * x) * (-(x - 0.3).powi(2)).exp())
            .collect();
        let f = CompositeField::from_grid(g, apply_l_values(&gv, &g, &p), Parity::None);
        let gen = invert_l_general(&f, &p).unwrap();
        let err = gen
            .r
            .grid_part
            .iter()
            .zip(&gv)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        let n = |v: &[f64]| h2_norm_values(v, &g);
        let lhs = n(&gen.r.grid_part).powi(2);
        let rhs = n(&gen.odd.r.grid_part).powi(2) + n(&gen.even.r.grid_part).powi(2);
        assert!((lhs - rhs).abs() < 1e-10 * lhs);

        let odd = apply_l_values(&odd_bump(&g), &g, &p);
        let odd = CompositeField::from_grid(g, odd, Parity::Odd);
        let a = invert_l_general(&odd, &p).unwrap().r.grid_part;
        let b = invert_l(&odd, &p, Parity::Odd).unwrap().r.grid_part;
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn analytic_input_is_folded() {
        let g = Grid::default().with_tail_tol(1e-2);
        let p = Params::new(1.0).unwrap();
        let f = CompositeField::from_analytic(g, Analytic::OddCarrier, Parity::Odd);
        let lf = apply_l(&f, &p).unwrap();
        let pr = project_moment(&lf, KernelMode::Sin).unwrap();
        assert!(pr.field.analytic.is_zero());
        assert!(invert_l(&pr.field, &p, Parity::Odd).is_ok());
    }
}
