//! Two-transition waves with force sgn(u).
//!
//! Two stage-1 waves shifted to +-x0 are joined by the blend lambda into an
//! even profile v_p vanishing at +-x0. An even corrector r~ removes the
//! remaining defect, with beta_e u_e fixing the cos moment and gamma~ cos(k0 x)
//! restoring the zeros at +-x0.

use serde::Serialize;

use crate::dispersion::{inversion_constants, Params};
use crate::error::{Result, WaveError};
use crate::fields::{
    apply_l, apply_l_values, discrete_moment, h2_norm_values, l2_norm, parity_defect, symmetrize,
    weighted_norm_values, Analytic, CompositeField, Grid, KernelMode, Parity, WeightPower,
};
use crate::linsolve::{check_inversion, check_moment, invert_l};
use crate::profiles::{lambda_blend, snapped_sign};
use crate::waves::{SolverConfig, Stage1Solution};

/// Smallest admissible transition location.
pub const MIN_X0: usize = 6;

/// Distance kept between the transitions and the domain edge.
pub const EDGE_MARGIN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoTransDiagnostics {
    /// ||(1+x^2)(L v_p - alpha sgn(v_p))||
    pub vp_defect_norm: f64,
    /// C ||(1+x^2)(L v_p - alpha sgn v_p)|| ||cos(k0 x)/(1+x^2)|| with C = 1/(2(c^2 k0 - 1)).
    pub beta_e_bound: f64,
    pub vp_at_origin: f64,
    /// v_p'(x0)
    pub vp_slope_at_x0: f64,
    pub cos_moment: f64,
    pub sin_moment: f64,
    pub residual: f64,
    pub residual_independent: f64,
    pub sign_changes: usize,
    /// max |u(+-x0)|
    pub u_at_x0: f64,
    pub r_tilde_parity_defect: f64,
    pub u_parity_defect: f64,
    pub h2_norm_r_tilde: f64,
    pub bound_ratio: f64,
    /// u < 0 on (-x0+2, x0-2) and u > 0 on (x0+2, X-4).
    pub well_separated: bool,
}

/// Converged two-transition wave.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTransSolution {
    pub x0: usize,
    pub beta_e: f64,
    pub gamma_tilde: f64,
    pub r_tilde: CompositeField,
    pub v_p: CompositeField,
    /// v_p + beta_e u_e + gamma~ cos(k0 x) - r~.
    pub u: CompositeField,
    pub diagnostics: TwoTransDiagnostics,
}

fn validate_x0(x0: usize, grid: &Grid) -> Result<()> {
    if !x0.is_multiple_of(2) || x0 < MIN_X0 {
        return Err(WaveError::InvalidParams(format!(
            "x0 = {x0} must be an even integer >= {MIN_X0}"
        )));
    }
    if x0 + EDGE_MARGIN > grid.half_length() {
        return Err(WaveError::DomainTooSmall(format!(
            "x0 = {x0} needs X >= {}",
            x0 + EDGE_MARGIN
        )));
    }
    Ok(())
}

/// out[i] = values[i - shift] with periodic wrap.
fn roll(values: &[f64], shift: isize) -> Vec<f64> {
    let n = values.len() as isize;
    (0..n)
        .map(|i| values[(i - shift).rem_euclid(n) as usize])
        .collect()
}

/// (1/2 + lambda) u_p(x - x0) - (1/2 - lambda) u_p(x + x0), with u_p = u_pa - r.
pub fn build_vp(x0: usize, stage1: &Stage1Solution, g: &Grid) -> Result<CompositeField> {
    if g.half_length() != stage1.grid.half_length()
        || g.points_per_unit() != stage1.grid.points_per_unit()
    {
        return Err(WaveError::InvalidParams(
            "grid differs from the stage-1 grid".into(),
        ));
    }
    let grid = stage1.grid;
    validate_x0(x0, &grid)?;
    let s = x0 as f64;
    let upa = Analytic::Profile(stage1.profile);
    let plus = Analytic::Const(0.5).plus(Analytic::Blend);
    let minus = Analytic::Const(0.5).plus(Analytic::Blend.scaled(-1.0));
    let analytic = plus
        .times(upa.clone().shifted(s))
        .plus(minus.times(upa.shifted(-s)).scaled(-1.0));
    let nodes = (x0 * grid.points_per_unit()) as isize;
    let right = roll(&stage1.r.grid_part, nodes);
    let left = roll(&stage1.r.grid_part, -nodes);
    let mut grid_part: Vec<f64> = grid
        .xs()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let l = lambda_blend(x);
            -(0.5 + l) * right[i] + (0.5 - l) * left[i]
        })
        .collect();
    symmetrize(&mut grid_part, &grid, Parity::Even);
    Ok(CompositeField::new(grid, analytic, grid_part, Parity::Even))
}

/// Samples of L v_p - alpha sgn(v_p).
fn vp_defect(vp: &CompositeField, p: &Params) -> Result<(Vec<f64>, Vec<f64>)> {
    let values = vp.total();
    let lvp = apply_l(vp, p)?.total();
    let defect = values
        .iter()
        .zip(&lvp)
        .map(|(v, l)| l - p.alpha * snapped_sign(*v))
        .collect();
    Ok((defect, lvp))
}

/// beta_e = -[int (L v_p - alpha sgn v_p) cos(k0 x)] / [int (L u_e) cos(k0 x)].
pub fn beta_e_of(vp: &CompositeField, p: &Params) -> Result<f64> {
    vp.check_tail()?;
    let (defect, _) = vp_defect(vp, p)?;
    let l_ue = Analytic::EvenCarrier.l_image(p).sample(&vp.grid, 0);
    Ok(-discrete_moment(&defect, &vp.grid, KernelMode::Cos)
        / discrete_moment(&l_ue, &vp.grid, KernelMode::Cos))
}

/// Sign changes of a sequence, skipping exact zeros.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let signs: Vec<f64> = values
        .iter()
        .map(|v| snapped_sign(*v))
        .filter(|s| *s != 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Builds and verifies the two-transition wave at transition location x0.
pub fn solve_two_transition(
    x0: usize,
    p: &Params,
    g: &Grid,
    stage1: &Stage1Solution,
    cfg: &SolverConfig,
) -> Result<TwoTransSolution> {
    cfg.validate()?;
    let vp = build_vp(x0, stage1, g)?;
    let grid = vp.grid;
    let n = grid.n_points();
    let xs = grid.xs();
    let (defect, lvp) = vp_defect(&vp, p)?;
    let ue = Analytic::EvenCarrier;
    let l_ue = ue.l_image(p).sample(&grid, 0);
    let beta_e = -discrete_moment(&defect, &grid, KernelMode::Cos)
        / discrete_moment(&l_ue, &grid, KernelMode::Cos);

    let mut q: Vec<f64> = (0..n).map(|i| beta_e * l_ue[i] + defect[i]).collect();
    symmetrize(&mut q, &grid, Parity::Even);
    let cos_moment = check_moment(&q, &grid, KernelMode::Cos)?;
    let sin_moment = check_moment(&q, &grid, KernelMode::Sin)?;
    let q_field = CompositeField::from_grid(grid, q, Parity::Even);
    let inv = invert_l(&q_field, p, Parity::Even).map_err(|e| match e {
        WaveError::TailTooLarge { tail, tol } => {
            WaveError::DomainTooSmall(format!("even corrector tail {tail:.3e} exceeds {tol:.1e}"))
        }
        other => other,
    })?;
    let r_tilde = inv.r.clone();

    let i0 = grid.index_of(x0 as f64).expect("x0 lies on the grid");
    let cos_x0 = (p.k0 * x0 as f64).cos().round();
    let gamma_tilde = (r_tilde.grid_part[i0] - beta_e * ue.eval(x0 as f64)) * cos_x0;

    let vpv = vp.total();
    let ue_s = ue.sample(&grid, 0);
    let cos: Vec<f64> = xs.iter().map(|x| (p.k0 * x).cos()).collect();
    let u_samples: Vec<f64> = (0..n)
        .map(|i| vpv[i] + beta_e * ue_s[i] + gamma_tilde * cos[i] - r_tilde.grid_part[i])
        .collect();
    let lr = apply_l_values(&r_tilde.grid_part, &grid, p);
    let res: Vec<f64> = (0..n)
        .map(|i| lvp[i] + beta_e * l_ue[i] - lr[i] - p.alpha * snapped_sign(u_samples[i]))
        .collect();
    let residual = l2_norm(&res, &grid);

    let analytic = vp
        .analytic
        .clone()
        .plus(ue.scaled(beta_e))
        .plus(Analytic::KernelCos.scaled(gamma_tilde));
    let grid_part: Vec<f64> = (0..n)
        .map(|i| vp.grid_part[i] - r_tilde.grid_part[i])
        .collect();
    let u = CompositeField::new(grid, analytic, grid_part, Parity::Even);
    let ut = u.total();
    let lu = apply_l(&u, p)?.total();
    let res_ind: Vec<f64> = (0..n)
        .map(|i| lu[i] - p.alpha * snapped_sign(ut[i]))
        .collect();
    let residual_independent = l2_norm(&res_ind, &grid);

    let u_at_x0 = ut[i0].abs().max(ut[grid.mirror(i0)].abs());
    for i in 0..n {
        if i != i0 && i != grid.mirror(i0) && snapped_sign(ut[i]) != snapped_sign(vpv[i]) {
            return Err(WaveError::SignConditionFailed(format!(
                "sgn(u) differs from sgn(v_p) at x = {}",
                xs[i]
            )));
        }
    }
    let sign_changes = count_sign_changes(&ut);
    if sign_changes != 2 {
        return Err(WaveError::SignConditionFailed(format!(
            "u has {sign_changes} sign changes"
        )));
    }
    let xf = x0 as f64;
    let edge = grid.half_length() as f64 - crate::fields::TAIL_BAND;
    let well_separated = (0..n).all(|i| {
        let x = xs[i].abs();
        if x < xf - 2.0 {
            ut[i] < 0.0
        } else if x > xf + 2.0 && x < edge {
            ut[i] > 0.0
        } else {
            true
        }
    });

    let vp_defect_norm = weighted_norm_values(&defect, &grid, WeightPower::One);
    let cos_weight: Vec<f64> = xs
        .iter()
        .map(|x| (p.k0 * x).cos() / (1.0 + x * x))
        .collect();
    let beta_e_bound = vp_defect_norm * l2_norm(&cos_weight, &grid) / p.orthogonality_constant();
    let dvp = vp.derivative_samples(1);
    let check = check_inversion(&q_field, &inv, p, &inversion_constants(p)?);

    Ok(TwoTransSolution {
        x0,
        beta_e,
        gamma_tilde,
        diagnostics: TwoTransDiagnostics {
            vp_defect_norm,
            beta_e_bound,
            vp_at_origin: vpv[grid.center()],
            vp_slope_at_x0: dvp[i0],
            cos_moment,
            sin_moment,
            residual,
            residual_independent,
            sign_changes,
            u_at_x0,
            r_tilde_parity_defect: parity_defect(&r_tilde.grid_part, &grid, Parity::Even),
            u_parity_defect: parity_defect(&ut, &grid, Parity::Even),
            h2_norm_r_tilde: h2_norm_values(&r_tilde.grid_part, &grid),
            bound_ratio: check.bound_ratio,
            well_separated,
        },
        r_tilde,
        v_p: vp,
        u,
    })
}
