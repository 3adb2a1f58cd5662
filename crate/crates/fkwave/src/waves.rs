//! Two-stage nonlinear solver.
//!
//! Stage 1 solves the degenerate problem with force sgn(u): once the sign
//! pattern is fixed the equation is linear, L r = L u_pa - alpha sgn(x).
//! Stage 2 solves the mollified problem for u = u_p + beta u_odd + gamma sin(k0 x) - r
//! by a damped Picard iteration r <- L^{-1} Q(r), with beta(r) fixed by the
//! sin-moment condition.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dispersion::{inversion_constants, Params};
use crate::error::{Result, WaveError};
use crate::fields::{
    apply_l, apply_l_values, h2_norm_values, l2_norm, spectral, symmetrize, tail_magnitude,
    weighted_norm_values, Analytic, CompositeField, Grid, KernelMode, Parity, WeightPower,
};
use crate::linsolve::{check_inversion, check_moment, invert_l, project_moment};
use crate::profiles::{sign, snapped_sign, xi_saturate, Mollifier, ProfileSpec};

/// Iteration controls shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stop when the H^2 norm of the corrector increment falls below this.
    pub outer_tol: f64,
    /// Required discrete L^2 norm of the full-equation residual.
    pub residual_tol: f64,
    pub max_outer: usize,
    /// Picard damping in (0, 1].
    pub omega: f64,
    pub beta_inner_tol: f64,
    pub beta_inner_max: usize,
    /// Identity range of the beta saturation.
    pub beta_max: f64,
    pub tail_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-10,
            residual_tol: 1e-8,
            max_outer: 200,
            omega: 1.0,
            beta_inner_tol: 1e-12,
            beta_inner_max: 100,
            beta_max: 0.1,
            tail_tol: crate::fields::DEFAULT_TAIL_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tol", self.outer_tol),
            ("residual_tol", self.residual_tol),
            ("beta_inner_tol", self.beta_inner_tol),
            ("beta_max", self.beta_max),
            ("tail_tol", self.tail_tol),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(WaveError::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(WaveError::InvalidParams(format!(
                "damping omega = {} must lie in (0, 1]",
                self.omega
            )));
        }
        if self.max_outer == 0 || self.beta_inner_max == 0 {
            return Err(WaveError::InvalidParams(
                "iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Damping used after sign-alternating increments are detected.
pub const FALLBACK_OMEGA: f64 = 0.5;

/// Stage-1 re-solves allowed while the sign pattern settles.
pub const MAX_SIGN_PASSES: usize = 10;

/// Minimum number of grid nodes inside the half-window eps/u_p'(0).
pub const MIN_WINDOW_NODES: f64 = 3.0;

/// Least-squares fit of 1 - u_p(x) ~ lambda sin(k0 x + theta) on the last period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub amplitude: f64,
    pub phase: f64,
    pub mismatch: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage1Diagnostics {
    /// Discrete sin moment of L u_pa - alpha sgn removed by the projection.
    pub moment_defect: f64,
    /// Same moment with the analytic part integrated by Gauss-Legendre panels.
    pub continuum_moment: f64,
    pub sign_passes: usize,
    /// ||L u_p - alpha sgn(u_p)||_{L^2}
    pub residual: f64,
    pub residual_within_tol: bool,
    pub sup_r: f64,
    pub sup_r_prime: f64,
    /// sqrt(pi/2) sup|r|
    pub scaled_sup_r: f64,
    /// sqrt(pi/2) sup|r'|
    pub scaled_sup_r_prime: f64,
    pub h2_norm_r: f64,
    pub bound_ratio: f64,
    pub kernel_coefficient: f64,
    pub slope_at_origin: f64,
    pub tail_magnitude: f64,
    pub tail_fit: TailFit,
}

/// Solution of the degenerate problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Solution {
    pub params: Params,
    pub grid: Grid,
    pub profile: ProfileSpec,
    /// u_pa (analytic) minus r (grid).
    pub u_p: CompositeField,
    pub r: CompositeField,
    pub rho0: f64,
    pub x_margin: f64,
    pub diagnostics: Stage1Diagnostics,
}

impl Stage1Solution {
    /// Samples of u_p on the grid.
    pub fn samples(&self) -> Vec<f64> {
        self.u_p.total()
    }

    /// Samples of u_p'.
    pub fn derivative_samples(&self) -> Vec<f64> {
        self.u_p.derivative_samples(1)
    }
}

fn domain_error(e: WaveError) -> WaveError {
    match e {
        WaveError::TailTooLarge { tail, tol } => WaveError::DomainTooSmall(format!(
            "corrector tail {tail:.3e} exceeds {tol:.1e}; enlarge X"
        )),
        other => other,
    }
}

/// Solves c^2 u'' - Delta_D u + alpha u - alpha sgn(u) = 0 as u_p = u_pa - r.
pub fn solve_stage1(p: &Params, g: &Grid, cfg: &SolverConfig) -> Result<Stage1Solution> {
    cfg.validate()?;
    let grid = g.with_tail_tol(cfg.tail_tol);
    let n = grid.n_points();
    let xs = grid.xs();
    let spec = ProfileSpec::new(p);
    let upa = Analytic::Profile(spec);
    let l_upa = upa.l_image(p).sample(&grid, 0);
    let upa_samples = upa.sample(&grid, 0);

    let reference: Vec<f64> = xs.iter().map(|&x| sign(x)).collect();
    let mut pattern = reference.clone();
    let mut passes = 0;
    let (proj, inv) = loop {
        passes += 1;
        let q: Vec<f64> = (0..n).map(|i| l_upa[i] - p.alpha * pattern[i]).collect();
        let q = CompositeField::from_grid(grid, q, Parity::Odd);
        let proj = project_moment(&q, KernelMode::Sin).map_err(domain_error)?;
        let inv = invert_l(&proj.field, p, Parity::Odd).map_err(domain_error)?;
        let next: Vec<f64> = (0..n)
            .map(|i| snapped_sign(upa_samples[i] - inv.r.grid_part[i]))
            .collect();
        if next == pattern {
            break (proj, inv);
        }
        if passes == MAX_SIGN_PASSES {
            return Err(WaveError::SignConditionFailed(
                "stage-1 sign pattern did not stabilize".into(),
            ));
        }
        pattern = next;
    };
    if let Some(i) = (0..n).find(|&i| pattern[i] != reference[i]) {
        return Err(WaveError::SignConditionFailed(format!(
            "sgn(u_p) differs from sgn(x) at x = {}",
            xs[i]
        )));
    }

    let r = inv.r.clone();
    let tail = r.tail_magnitude();
    if tail > grid.tail_tol() {
        return Err(domain_error(WaveError::TailTooLarge {
            tail,
            tol: grid.tail_tol(),
        }));
    }
    let neg_r: Vec<f64> = r.grid_part.iter().map(|v| -v).collect();
    let u_p = CompositeField::new(grid, upa.clone(), neg_r, Parity::Odd);
    let up = u_p.total();
    let dup = u_p.derivative_samples(1);

    let lr = apply_l_values(&r.grid_part, &grid, p);
    let res: Vec<f64> = (0..n)
        .map(|i| l_upa[i] - lr[i] - p.alpha * snapped_sign(up[i]))
        .collect();
    let residual = l2_norm(&res, &grid);

    let (rho0, x_margin) = sign_margin(&up, &dup, &grid);
    if rho0.is_nan() || rho0 <= 0.0 {
        return Err(WaveError::SignConditionFailed(format!(
            "no positive sign margin (rho0 = {rho0:.3e})"
        )));
    }

    let dr = spectral::derivative(&r.grid_part, &grid, 1);
    let sup = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let scale = (PI / 2.0).sqrt();
    let constants = inversion_constants(p)?;
    let check = check_inversion(&proj.field, &inv, p, &constants);
    let continuum = crate::fields::kernel_moment(
        &CompositeField::from_analytic(
            grid,
            upa.l_image(p).plus(Analytic::Sign.scaled(-p.alpha)),
            Parity::Odd,
        ),
        KernelMode::Sin,
    )?;

    let diagnostics = Stage1Diagnostics {
        moment_defect: proj.defect,
        continuum_moment: continuum,
        sign_passes: passes,
        residual,
        residual_within_tol: residual <= cfg.residual_tol,
        sup_r: sup(&r.grid_part),
        sup_r_prime: sup(&dr),
        scaled_sup_r: scale * sup(&r.grid_part),
        scaled_sup_r_prime: scale * sup(&dr),
        h2_norm_r: check.h2_norm,
        bound_ratio: check.bound_ratio,
        kernel_coefficient: inv.kernel_coefficient,
        slope_at_origin: dup[grid.center()],
        tail_magnitude: tail,
        tail_fit: fit_tail(&up, &grid, p),
    };
    Ok(Stage1Solution {
        params: *p,
        grid,
        profile: spec,
        u_p,
        r,
        rho0,
        x_margin,
        diagnostics,
    })
}

/// Largest rho0 such that u_p > rho0/2 beyond some x_m in (0, 1] and
/// u_p' > rho0/2 on [0, x_m). Returns (rho0, x_m).
fn sign_margin(up: &[f64], dup: &[f64], grid: &Grid) -> (f64, f64) {
    let n = grid.n_points();
    let c = grid.center();
    let m = grid.points_per_unit();
    // suffix[i] = min of up over indices > i on the positive half-line.
    let mut suffix = vec![f64::INFINITY; n + 1];
    for i in (c..n).rev() {
        suffix[i] = suffix[i + 1].min(if i + 1 < n { up[i + 1] } else { f64::INFINITY });
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut slope_min = f64::INFINITY;
    for im in (c + 1)..=(c + m).min(n - 1) {
        slope_min = slope_min.min(dup[im - 1]);
        let cand = 2.0 * suffix[im].min(slope_min);
        if cand > best.0 {
            best = (cand, grid.x(im));
        }
    }
    best
}

fn fit_tail(up: &[f64], grid: &Grid, p: &Params) -> TailFit {
    let hi = grid.half_length() as f64 - crate::fields::TAIL_BAND;
    let lo = hi - 4.0;
    let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let idx: Vec<usize> = (0..grid.n_points())
        .filter(|&i| grid.x(i) >= lo && grid.x(i) < hi)
        .collect();
    for &i in &idx {
        let (s, c) = (p.k0 * grid.x(i)).sin_cos();
        let y = 1.0 - up[i];
        ss += s * s;
        sc += s * c;
        cc += c * c;
        ys += y * s;
        yc += y * c;
    }
    let det = ss * cc - sc * sc;
    let a = (ys * cc - yc * sc) / det;
    let b = (yc * ss - ys * sc) / det;
    let amplitude = a.hypot(b);
    let phase = b.atan2(a);
    let mismatch = idx
        .iter()
        .map(|&i| {
            let x = grid.x(i);
            (up[i] - (1.0 - amplitude * (p.k0 * x + phase).sin())).abs()
        })
        .fold(0.0, f64::max);
    TailFit {
        amplitude,
        phase,
        mismatch,
        window: (lo, hi),
    }
}

/// On-site force used by the stage-2 map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Force {
    /// psi' = sgn; the degenerate problem.
    Sign,
    Mollified(Mollifier),
}

impl Force {
    pub fn prime(&self, u: f64) -> f64 {
        match self {
            Force::Sign => snapped_sign(u),
            Force::Mollified(m) => m.prime(u),
        }
    }

    /// d/du of the localized potential.
    pub fn partial1(&self, u: f64, x: f64) -> f64 {
        if x.abs() <= 1.0 {
            self.prime(u)
        } else {
            sign(x)
        }
    }

    pub fn partial11(&self, u: f64, x: f64) -> f64 {
        match self {
            Force::Sign => 0.0,
            Force::Mollified(m) => m.partial11(u, x),
        }
    }
}

/// Grid samples shared by every evaluation of the stage-2 map.
struct Stage2Context {
    grid: Grid,
    params: Params,
    cfg: SolverConfig,
    force: Force,
    xs: Vec<f64>,
    up: Vec<f64>,
    l_up: Vec<f64>,
    uo: Vec<f64>,
    l_uo: Vec<f64>,
    sin: Vec<f64>,
    /// -h sum (L u_odd) sin(k0 x), the discrete form of 2(c^2 k0 - 1).
    denominator: f64,
}

impl Stage2Context {
    fn new(stage1: &Stage1Solution, p: &Params, cfg: &SolverConfig, force: Force) -> Self {
        let grid = stage1.grid;
        let xs = grid.xs();
        let up = stage1.samples();
        let mut l_up = Analytic::Profile(stage1.profile)
            .l_image(p)
            .sample(&grid, 0);
        let lr = apply_l_values(&stage1.r.grid_part, &grid, p);
        for (a, b) in l_up.iter_mut().zip(&lr) {
            *a -= b;
        }
        let uo = Analytic::OddCarrier.sample(&grid, 0);
        let l_uo = Analytic::OddCarrier.l_image(p).sample(&grid, 0);
        let sin: Vec<f64> = xs.iter().map(|x| (p.k0 * x).sin()).collect();
        let h = grid.spacing();
        let denominator = -h * l_uo.iter().zip(&sin).map(|(a, b)| a * b).sum::<f64>();
        Self {
            grid,
            params: *p,
            cfg: *cfg,
            force,
            xs,
            up,
            l_up,
            uo,
            l_uo,
            sin,
            denominator,
        }
    }

    /// u_p + xi u_odd + gamma sin - r at node i.
    fn argument(&self, i: usize, xi: f64, r: &[f64]) -> f64 {
        self.up[i] + xi * self.uo[i] + self.params.gamma * self.sin[i] - r[i]
    }

    fn beta_of(&self, r: &[f64]) -> Result<BetaSolve> {
        let h = self.grid.spacing();
        let a = self.params.alpha;
        let mut beta = 0.0;
        let mut prev_step: Option<f64> = None;
        let mut ratio: f64 = 0.0;
        for it in 1..=self.cfg.beta_inner_max {
            let xi = xi_saturate(beta, self.cfg.beta_max).value;
            let m: f64 = (0..self.xs.len())
                .map(|i| {
                    (self.l_up[i] - a * self.force.partial1(self.argument(i, xi, r), self.xs[i]))
                        * self.sin[i]
                })
                .sum::<f64>()
                * h;
            let next = m / self.denominator;
            let step = (next - beta).abs();
            if let Some(ps) = prev_step {
                if ps > 1e-14 {
                    ratio = ratio.max(step / ps);
                }
            }
            beta = next;
            if step < self.cfg.beta_inner_tol {
                if ratio >= 1.0 {
                    return Err(WaveError::NonContraction { ratio });
                }
                return Ok(BetaSolve {
                    beta,
                    iterations: it,
                    lipschitz_ratio: ratio,
                });
            }
            prev_step = Some(step);
        }
        if ratio >= 1.0 {
            return Err(WaveError::NonContraction { ratio });
        }
        Err(WaveError::IterationCapExceeded {
            cap: self.cfg.beta_inner_max,
        })
    }

    /// Q = beta L u_odd + L u_p - alpha d1Psi(u_p + xi(beta) u_odd + gamma sin - r), odd.
    fn assemble(&self, r: &[f64], beta: f64) -> Result<Vec<f64>> {
        let a = self.params.alpha;
        let xi = xi_saturate(beta, self.cfg.beta_max).value;
        let mut q: Vec<f64> = (0..self.xs.len())
            .map(|i| {
                beta * self.l_uo[i] + self.l_up[i]
                    - a * self.force.partial1(self.argument(i, xi, r), self.xs[i])
            })
            .collect();
        symmetrize(&mut q, &self.grid, Parity::Odd);
        check_moment(&q, &self.grid, KernelMode::Sin)?;
        Ok(q)
    }

    /// Samples of u and L u for given (r, beta), without the saturation.
    fn wave(&self, r: &[f64], beta: f64) -> (Vec<f64>, Vec<f64>) {
        let lr = apply_l_values(r, &self.grid, &self.params);
        let u = (0..self.xs.len())
            .map(|i| self.argument(i, beta, r))
            .collect();
        let lu = (0..self.xs.len())
            .map(|i| self.l_up[i] + beta * self.l_uo[i] - lr[i])
            .collect();
        (u, lu)
    }

    fn residual(&self, r: &[f64], beta: f64) -> f64 {
        let (u, lu) = self.wave(r, beta);
        let a = self.params.alpha;
        let res: Vec<f64> = u
            .iter()
            .zip(&lu)
            .map(|(ui, li)| li - a * self.force.prime(*ui))
            .collect();
        l2_norm(&res, &self.grid)
    }
}

/// Outcome of the inner fixed point for beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSolve {
    pub beta: f64,
    pub iterations: usize,
    /// Largest observed ratio of successive steps.
    pub lipschitz_ratio: f64,
}

/// Inner fixed point beta -> [int (L u_p - alpha d1Psi(...)) sin] / 2(c^2 k0 - 1), from beta = 0.
pub fn beta_of_r(
    r: &CompositeField,
    stage1: &Stage1Solution,
    p: &Params,
    cfg: &SolverConfig,
) -> Result<BetaSolve> {
    let force = Force::Mollified(Mollifier::new(p.epsilon)?);
    Stage2Context::new(stage1, p, cfg, force).beta_of(&r.grid_part)
}

/// The stage-2 right-hand side Q(r, beta) as an odd grid field.
pub fn assemble_q(
    r: &CompositeField,
    beta: f64,
    stage1: &Stage1Solution,
    p: &Params,
    cfg: &SolverConfig,
) -> Result<CompositeField> {
    let force = Force::Mollified(Mollifier::new(p.epsilon)?);
    let ctx = Stage2Context::new(stage1, p, cfg, force);
    Ok(CompositeField::from_grid(
        stage1.grid,
        ctx.assemble(&r.grid_part, beta)?,
        Parity::Odd,
    ))
}

/// Values entering the existence conditions, evaluated at a converged state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// |int alpha d11Psi(u) xi'(beta) u_odd sin(k0 x)| at the solution.
    pub c1_value: f64,
    /// Largest value of the same integral over a beta sample in [-3 beta_max, 3 beta_max].
    pub c1_sample_max: f64,
    pub c1_threshold: f64,
    /// alpha (2/eps) sup|xi' u_odd| k0 (6 eps/u_p'(0))^2.
    pub c1_theory_bound: f64,
    pub c1_pass: bool,
    /// ||(1+x^2) alpha (sgn(u_p) - d1Psi(u_p))||
    pub c2_sign_term: f64,
    /// ||(1+x^2) alpha (d1Psi(u_p) - d1Psi(u_p + xi u_odd + gamma sin - r))||
    pub c2_perturbation_term: f64,
    pub c2_lhs: f64,
    pub c2_rhs: f64,
    pub c2_pass: bool,
    pub weighted_l_uodd: f64,
    pub bound_factor: f64,
    pub rho: f64,
    /// 6 eps / u_p'(0)
    pub window_half_width: f64,
    /// Largest |x| where the sign term is nonzero.
    pub sign_term_support: f64,
    /// Envelope constant of the second-derivative bound (reported only).
    pub envelope_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage2Diagnostics {
    pub iterations: usize,
    pub inner_iterations: usize,
    pub lipschitz_ratio: f64,
    pub h2_norm_r: f64,
    pub residual: f64,
    /// Residual recomputed from the assembled composite field.
    pub residual_independent: f64,
    pub first_step_residual: f64,
    pub final_increment: f64,
    pub increments: Vec<f64>,
    pub omega_used: f64,
    pub damping_switched: bool,
    /// min |u| / |u_p| over nodes with u_p != 0.
    pub sign_margin_ratio: f64,
    pub clamp_active: bool,
    pub window_nodes: f64,
    pub sup_distance_to_stage1: f64,
    pub max_parity_defect: f64,
    pub bound_ratio: f64,
}

/// Converged mollified wave.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSolution {
    pub params: Params,
    pub grid: Grid,
    pub rho: f64,
    pub r: CompositeField,
    pub beta: f64,
    pub gamma: f64,
    /// u_p + beta u_odd + gamma sin(k0 x) - r.
    pub u: CompositeField,
    pub conditions: ConditionReport,
    pub diagnostics: Stage2Diagnostics,
}

/// Runs the stage-2 iteration with the mollified force.
pub fn solve_stage2(
    p: &Params,
    g: &Grid,
    cfg: &SolverConfig,
    stage1: &Stage1Solution,
) -> Result<WaveSolution> {
    let force = Force::Mollified(Mollifier::new(p.epsilon)?);
    solve_stage2_with_force(p, g, cfg, stage1, force)
}

pub fn solve_stage2_with_force(
    p: &Params,
    g: &Grid,
    cfg: &SolverConfig,
    stage1: &Stage1Solution,
    force: Force,
) -> Result<WaveSolution> {
    cfg.validate()?;
    if g.half_length() != stage1.grid.half_length()
        || g.points_per_unit() != stage1.grid.points_per_unit()
    {
        return Err(WaveError::InvalidParams(
            "grid differs from the stage-1 grid".into(),
        ));
    }
    if (p.c2 - stage1.params.c2).abs() > 0.0 {
        return Err(WaveError::InvalidParams(
            "c^2 differs from the stage-1 solution".into(),
        ));
    }
    let rho0 = stage1.rho0;
    let slope = stage1.diagnostics.slope_at_origin;
    let mut window_nodes = f64::INFINITY;
    if let Force::Mollified(m) = force {
        if m.epsilon >= rho0 / 6.0 {
            return Err(WaveError::InvalidParams(format!(
                "eps = {} must be below rho0/6 = {:.4}",
                m.epsilon,
                rho0 / 6.0
            )));
        }
        window_nodes = m.epsilon / (slope * stage1.grid.spacing());
        if window_nodes < MIN_WINDOW_NODES {
            return Err(WaveError::UnderResolved {
                nodes: window_nodes,
            });
        }
    }
    let rho = match p.rho {
        Some(r) if r >= rho0 => {
            return Err(WaveError::InvalidParams(format!(
                "rho = {r} must be below rho0 = {rho0:.4}"
            )))
        }
        Some(r) => r,
        None => 0.9 * rho0,
    };

    let mut cfg = *cfg;
    cfg.tail_tol = stage1.grid.tail_tol();
    let ctx = Stage2Context::new(stage1, p, &cfg, force);
    let grid = ctx.grid;
    let n = grid.n_points();
    let mut r = vec![0.0; n];
    let mut omega = cfg.omega;
    let mut switched = false;
    let mut prev_delta: Option<Vec<f64>> = None;
    let mut alternating = 0;
    let mut increments = Vec::new();
    let mut first_step_residual = f64::NAN;
    let mut max_parity_defect: f64 = 0.0;

    for it in 1..=cfg.max_outer {
        let bs = ctx.beta_of(&r)?;
        let q = ctx.assemble(&r, bs.beta)?;
        let q_field = CompositeField::from_grid(grid, q, Parity::Odd);
        let inv = invert_l(&q_field, p, Parity::Odd).map_err(domain_error)?;
        let delta: Vec<f64> = (0..n)
            .map(|i| omega * (inv.r.grid_part[i] - r[i]))
            .collect();
        let increment = h2_norm_values(&delta, &grid);
        increments.push(increment);
        if let Some(prev) = &prev_delta {
            let dot: f64 = prev.iter().zip(&delta).map(|(a, b)| a * b).sum();
            alternating = if dot < 0.0 { alternating + 1 } else { 0 };
            if alternating >= 2 && !switched && omega > FALLBACK_OMEGA {
                omega = FALLBACK_OMEGA;
                switched = true;
            }
        }
        for (ri, di) in r.iter_mut().zip(&delta) {
            *ri += di;
        }
        symmetrize(&mut r, &grid, Parity::Odd);
        max_parity_defect =
            max_parity_defect.max(crate::fields::parity_defect(&r, &grid, Parity::Odd));
        prev_delta = Some(delta);

        let norm = h2_norm_values(&r, &grid);
        if norm >= rho {
            return Err(WaveError::BallEscaped { norm, rho });
        }
        let residual = ctx.residual(&r, bs.beta);
        if it == 1 {
            first_step_residual = residual;
        }
        if increment < cfg.outer_tol && residual < cfg.residual_tol {
            return finish(
                &ctx,
                stage1,
                r,
                bs,
                it,
                Finish {
                    rho,
                    residual,
                    first_step_residual,
                    increments,
                    omega,
                    switched,
                    window_nodes,
                    max_parity_defect,
                    bound_ratio: check_inversion(&q_field, &inv, p, &inversion_constants(p)?)
                        .bound_ratio,
                },
            );
        }
    }
    Err(WaveError::IterationCapExceeded { cap: cfg.max_outer })
}

struct Finish {
    rho: f64,
    residual: f64,
    first_step_residual: f64,
    increments: Vec<f64>,
    omega: f64,
    switched: bool,
    window_nodes: f64,
    max_parity_defect: f64,
    bound_ratio: f64,
}

fn finish(
    ctx: &Stage2Context,
    stage1: &Stage1Solution,
    r: Vec<f64>,
    bs: BetaSolve,
    iterations: usize,
    f: Finish,
) -> Result<WaveSolution> {
    let p = ctx.params;
    let grid = ctx.grid;
    let beta = bs.beta;
    let clamp = xi_saturate(beta, ctx.cfg.beta_max).clamped;
    if clamp {
        return Err(WaveError::ClampActive { beta });
    }
    let (u_samples, _) = ctx.wave(&r, beta);

    let mut margin = f64::INFINITY;
    for (u, up) in u_samples.iter().zip(&ctx.up) {
        if *up != 0.0 {
            margin = margin.min(u.abs() / up.abs());
        }
    }
    if margin < 1.0 / 3.0 {
        return Err(WaveError::SignConditionFailed(format!(
            "|u| >= |u_p|/3 violated (ratio {margin:.4})"
        )));
    }
    // Outside [-1, 1] the localized force must coincide with psi'(u).
    for (&x, &u) in ctx.xs.iter().zip(&u_samples) {
        if x.abs() > 1.0 && ctx.force.prime(u) != sign(x) {
            return Err(WaveError::SignConditionFailed(format!(
                "psi'(u) differs from sgn(x) at x = {x}"
            )));
        }
    }

    let neg_r1: Vec<f64> = stage1.r.grid_part.iter().map(|v| -v).collect();
    let grid_part: Vec<f64> = neg_r1.iter().zip(&r).map(|(a, b)| a - b).collect();
    let analytic = Analytic::Profile(stage1.profile)
        .plus(Analytic::OddCarrier.scaled(beta))
        .plus(Analytic::KernelSin.scaled(p.gamma));
    let u = CompositeField::new(grid, analytic, grid_part, Parity::Odd);
    let lu = apply_l(&u, &p)?.total();
    let ut = u.total();
    let res: Vec<f64> = ut
        .iter()
        .zip(&lu)
        .map(|(ui, li)| li - p.alpha * ctx.force.prime(*ui))
        .collect();
    let residual_independent = l2_norm(&res, &grid);
    let sup_distance = (0..ut.len())
        .map(|i| (ut[i] - ctx.up[i]).abs())
        .fold(0.0, f64::max);

    let r_field = CompositeField::from_grid(grid, r, Parity::Odd);
    let conditions = conditions_at(ctx, stage1, &r_field.grid_part, beta, f.rho)?;
    Ok(WaveSolution {
        params: p,
        grid,
        rho: f.rho,
        beta,
        gamma: p.gamma,
        u,
        conditions,
        diagnostics: Stage2Diagnostics {
            iterations,
            inner_iterations: bs.iterations,
            lipschitz_ratio: bs.lipschitz_ratio,
            h2_norm_r: h2_norm_values(&r_field.grid_part, &grid),
            residual: f.residual,
            residual_independent,
            first_step_residual: f.first_step_residual,
            final_increment: *f.increments.last().unwrap_or(&0.0),
            increments: f.increments,
            omega_used: f.omega,
            damping_switched: f.switched,
            sign_margin_ratio: margin,
            clamp_active: clamp,
            window_nodes: f.window_nodes,
            sup_distance_to_stage1: sup_distance,
            max_parity_defect: f.max_parity_defect,
            bound_ratio: f.bound_ratio,
        },
        r: r_field,
    })
}

fn c1_integral(ctx: &Stage2Context, r: &[f64], beta: f64) -> f64 {
    let sat = xi_saturate(beta, ctx.cfg.beta_max);
    let h = ctx.grid.spacing();
    let a = ctx.params.alpha;
    (h * (0..ctx.xs.len())
        .map(|i| {
            a * ctx
                .force
                .partial11(ctx.argument(i, sat.value, r), ctx.xs[i])
                * sat.derivative
                * ctx.uo[i]
                * ctx.sin[i]
        })
        .sum::<f64>())
    .abs()
}

fn conditions_at(
    ctx: &Stage2Context,
    stage1: &Stage1Solution,
    r: &[f64],
    beta: f64,
    rho: f64,
) -> Result<ConditionReport> {
    let p = ctx.params;
    let grid = ctx.grid;
    let a = p.alpha;
    let eps = match ctx.force {
        Force::Mollified(m) => m.epsilon,
        Force::Sign => 0.0,
    };
    let c1_value = c1_integral(ctx, r, beta);
    let bm = ctx.cfg.beta_max;
    let c1_sample_max = (0..=40)
        .map(|j| c1_integral(ctx, r, -3.0 * bm + 6.0 * bm * j as f64 / 40.0))
        .fold(c1_value, f64::max);
    let c1_threshold = p.orthogonality_constant();
    let slope = stage1.diagnostics.slope_at_origin;
    let half_width = 6.0 * eps / slope;
    let sup_uo = ctx.uo.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let c1_theory_bound = if eps > 0.0 {
        a * 2.0 / eps * sup_uo * p.k0 * half_width * half_width
    } else {
        0.0
    };

    let xi = xi_saturate(beta, bm).value;
    let n = ctx.xs.len();
    let sign_term: Vec<f64> = (0..n)
        .map(|i| a * (snapped_sign(ctx.up[i]) - ctx.force.partial1(ctx.up[i], ctx.xs[i])))
        .collect();
    let pert_term: Vec<f64> = (0..n)
        .map(|i| {
            a * (ctx.force.partial1(ctx.up[i], ctx.xs[i])
                - ctx.force.partial1(ctx.argument(i, xi, r), ctx.xs[i]))
        })
        .collect();
    let support = (0..n)
        .filter(|&i| sign_term[i] != 0.0)
        .map(|i| ctx.xs[i].abs())
        .fold(0.0, f64::max);
    let c2_sign_term = weighted_norm_values(&sign_term, &grid, WeightPower::One);
    let c2_perturbation_term = weighted_norm_values(&pert_term, &grid, WeightPower::One);
    let weighted_l_uodd = weighted_norm_values(&ctx.l_uo, &grid, WeightPower::One);
    let bound_factor = inversion_constants(&p)?.bound_factor;
    let c2_rhs =
        rho / bound_factor / (weighted_l_uodd * (PI / 8.0).sqrt() / (p.c2 * p.k0 - 1.0) + 1.0);
    let c2_lhs = c2_sign_term + c2_perturbation_term;
    Ok(ConditionReport {
        c1_value,
        c1_sample_max,
        c1_threshold,
        c1_theory_bound,
        c1_pass: c1_sample_max < c1_threshold,
        c2_sign_term,
        c2_perturbation_term,
        c2_lhs,
        c2_rhs,
        c2_pass: c2_lhs < c2_rhs,
        weighted_l_uodd,
        bound_factor,
        rho,
        window_half_width: half_width,
        sign_term_support: support,
        envelope_constant: if eps > 0.0 {
            2f64.powf(2.5) / eps
        } else {
            f64::INFINITY
        },
    })
}

/// Re-evaluates the existence conditions for a converged solution.
pub fn check_conditions(
    sol: &WaveSolution,
    stage1: &Stage1Solution,
    p: &Params,
    cfg: &SolverConfig,
) -> Result<ConditionReport> {
    let force = Force::Mollified(Mollifier::new(p.epsilon)?);
    let ctx = Stage2Context::new(stage1, p, cfg, force);
    conditions_at(&ctx, stage1, &sol.r.grid_part, sol.beta, sol.rho)
}

/// Least-squares slope of log|y| against log x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Pointwise residual L u - alpha psi'(u) of a composite wave.
pub fn pointwise_residual(u: &CompositeField, p: &Params, force: Force) -> Result<Vec<f64>> {
    let lu = apply_l(u, p)?.total();
    Ok(u.total()
        .iter()
        .zip(&lu)
        .map(|(ui, li)| li - p.alpha * force.prime(*ui))
        .collect())
}

/// Tail magnitude of the corrector of a stage-2 solution.
pub fn corrector_tail(sol: &WaveSolution) -> f64 {
    tail_magnitude(&sol.r.grid_part, &sol.grid)
}
