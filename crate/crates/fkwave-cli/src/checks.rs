//! The acceptance criteria as runnable checks. Each check measures its
//! quantities, compares them against fixed tolerances and returns a
//! structured outcome.

use std::f64::consts::PI;
use std::sync::OnceLock;

use fkwave::dispersion::{
    alpha_of, dispersion_eval, inversion_constants, kernel_roots, Params, K0,
};
use fkwave::fields::{
    kernel_moment, symmetrize, Analytic, CompositeField, Grid, KernelMode, Parity,
};
use fkwave::lattice::{simulate, ChainForce};
use fkwave::linsolve::{check_inversion, invert_l, project_moment};
use fkwave::profiles::Mollifier;
use fkwave::twotrans::solve_two_transition;
use fkwave::waves::{
    log_log_slope, solve_stage1, solve_stage2, ConditionReport, SolverConfig, Stage2Diagnostics,
};
use fkwave::{Result, WaveError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::report::ErrorInfo;

/// Tolerances of the acceptance criteria.
pub mod tol {
    pub const DISPERSION_ZERO: f64 = 1e-12;
    pub const ALPHA_AT_ONE: f64 = 1e-12;
    pub const ORTHOGONALITY: f64 = 1e-6;
    pub const CROSS_MOMENT: f64 = 1e-10;
    /// (c^2, bound on sqrt(pi/2) sup|r|, bound on sqrt(pi/2) sup|r'|)
    pub const STAGE1_BOUNDS: [(f64, f64, f64); 2] = [(0.95, 0.257, 0.43), (0.85, 0.339, 0.34)];
    pub const ROUND_TRIP: f64 = 1e-10;
    pub const RESIDUAL: f64 = 1e-8;
    pub const SIGN_MARGIN: f64 = 1.0 / 3.0;
    pub const BETA_SLOPE: (f64, f64) = (1.6, 2.4);
    pub const ZERO_AT_X0: f64 = 1e-12;
    pub const LATTICE_ERROR: f64 = 1e-3;
    pub const DT_RATIO: (f64, f64) = (3.0, 5.0);
}

/// Criterion numbers and their check names.
pub const CRITERIA: [(u8, &str); 9] = [
    (1, "dispersion"),
    (2, "orthogonality"),
    (3, "stage1-bounds"),
    (4, "inverse-bound"),
    (5, "stage2-existence"),
    (6, "beta-scaling"),
    (7, "conditions"),
    (8, "two-transition"),
    (9, "lattice"),
];

/// Criteria expected to fail: the second existence condition is far from
/// satisfied at these mollification widths.
pub const KNOWN_FAILURES: [u8; 1] = [7];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub known_failure: bool,
    pub summary: String,
    pub details: Value,
}

impl Outcome {
    fn new(id: u8, pass: bool, summary: String, details: Value) -> Self {
        Self {
            id,
            name: name_of(id).to_string(),
            pass,
            known_failure: !pass && KNOWN_FAILURES.contains(&id),
            summary,
            details,
        }
    }

    fn error(id: u8, e: &WaveError) -> Self {
        Self::new(
            id,
            false,
            format!("error {}: {e}", e.name()),
            json!({ "error": ErrorInfo::from(e) }),
        )
    }

    /// One report line: `criterion N name PASS|FAIL summary`.
    pub fn line(&self) -> String {
        let status = match (self.pass, self.known_failure) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        format!(
            "criterion {} {:<17} {} {}",
            self.id, self.name, status, self.summary
        )
    }
}

pub fn name_of(id: u8) -> &'static str {
    CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown")
}

/// Maps `all`, `1`..`9` or a check name to criterion numbers.
pub fn resolve_targets(targets: &[String]) -> std::result::Result<Vec<u8>, String> {
    let mut ids = Vec::new();
    for t in targets {
        let t = t.trim();
        if t == "all" {
            ids.extend(CRITERIA.iter().map(|(i, _)| *i));
            continue;
        }
        let id = CRITERIA
            .iter()
            .find(|(i, n)| *n == t || i.to_string() == t)
            .map(|(i, _)| *i)
            .ok_or_else(|| format!("unknown check target `{t}`"))?;
        ids.push(id);
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

pub fn run_criterion(id: u8, seed: u64) -> Outcome {
    let result = match id {
        1 => dispersion_identities(),
        2 => orthogonality(),
        3 => stage1_bounds(),
        4 => inverse_bound(seed),
        5 => stage2_existence(),
        6 => beta_scaling(),
        7 => conditions(),
        8 => two_transition(),
        9 => lattice(),
        _ => Err(WaveError::InvalidParams(format!("no criterion {id}"))),
    };
    result.unwrap_or_else(|e| Outcome::error(id, &e))
}

fn dispersion_identities() -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut pass = true;
    for c2 in [0.83, 0.9, 1.0] {
        let p = Params::new(c2)?;
        let d_plus = dispersion_eval(K0, &p).0;
        let d_minus = dispersion_eval(-K0, &p).0;
        let roots = kernel_roots(&p)?;
        let ok = d_plus.abs() <= tol::DISPERSION_ZERO
            && d_minus.abs() <= tol::DISPERSION_ZERO
            && roots.certified;
        pass &= ok;
        rows.push(
            json!({ "c2": c2, "d_plus": d_plus, "d_minus": d_minus, "roots": roots, "pass": ok }),
        );
    }
    let alpha_err = (alpha_of(1.0) - (PI * PI / 4.0 - 2.0)).abs();
    pass &= alpha_err <= tol::ALPHA_AT_ONE;
    let worst = rows
        .iter()
        .map(|r| {
            r["d_plus"]
                .as_f64()
                .unwrap()
                .abs()
                .max(r["d_minus"].as_f64().unwrap().abs())
        })
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        1,
        pass,
        format!("max |D(+-k0)| = {worst:.2e}, alpha(1) error = {alpha_err:.2e}"),
        json!({ "rows": rows, "alpha_at_one_error": alpha_err }),
    ))
}

fn orthogonality() -> Result<Outcome> {
    let grid = Grid::new(64, 16)?;
    let mut rows = Vec::new();
    let mut pass = true;
    let (mut worst, mut worst_cross) = (0.0f64, 0.0f64);
    for c2 in [0.83, 0.9, 1.0] {
        let p = Params::new(c2)?;
        let moment = |a: Analytic, mode| {
            kernel_moment(
                &CompositeField::from_analytic(grid, a.l_image(&p), Parity::None),
                mode,
            )
        };
        let odd = moment(Analytic::OddCarrier, KernelMode::Sin)?;
        let even = moment(Analytic::EvenCarrier, KernelMode::Cos)?;
        let cross_odd = moment(Analytic::OddCarrier, KernelMode::Cos)?;
        let cross_even = moment(Analytic::EvenCarrier, KernelMode::Sin)?;
        let target = 2.0 * c2 * K0 - 2.0;
        let e_odd = (odd + target).abs();
        let e_even = (even - target).abs();
        let cross = cross_odd.abs().max(cross_even.abs());
        let ok = e_odd <= tol::ORTHOGONALITY
            && e_even <= tol::ORTHOGONALITY
            && cross <= tol::CROSS_MOMENT;
        pass &= ok;
        worst = worst.max(e_odd).max(e_even);
        worst_cross = worst_cross.max(cross);
        rows.push(json!({
            "c2": c2, "odd_sin": odd, "even_cos": even, "expected_even": target,
            "cross_odd_cos": cross_odd, "cross_even_sin": cross_even, "pass": ok
        }));
    }
    Ok(Outcome::new(
        2,
        pass,
        format!("max error {worst:.2e} (tol 1e-6), max cross {worst_cross:.2e} (tol 1e-10)"),
        json!({ "rows": rows }),
    ))
}

fn stage1_bounds() -> Result<Outcome> {
    let cfg = SolverConfig::default();
    let mut rows = Vec::new();
    let mut pass = true;
    let mut parts = Vec::new();
    for (c2, b0, b1) in tol::STAGE1_BOUNDS {
        let p = Params::new(c2)?;
        let s = solve_stage1(&p, &Grid::new(64, 64)?, &cfg)?;
        let d = &s.diagnostics;
        let ok = d.scaled_sup_r < b0 && d.scaled_sup_r_prime < b1;
        pass &= ok;
        parts.push(format!(
            "c2={c2}: {:.4}<{b0}, {:.4}<{b1}",
            d.scaled_sup_r, d.scaled_sup_r_prime
        ));
        rows.push(json!({
            "c2": c2, "scaled_sup_r": d.scaled_sup_r, "bound_r": b0,
            "scaled_sup_r_prime": d.scaled_sup_r_prime, "bound_r_prime": b1,
            "residual": d.residual, "pass": ok
        }));
    }
    Ok(Outcome::new(
        3,
        pass,
        parts.join("; "),
        json!({ "rows": rows }),
    ))
}

/// Gaussian-windowed random oscillations, symmetrized to `parity`.
pub fn random_decaying_field(grid: Grid, parity: Parity, rng: &mut impl Rng) -> CompositeField {
    let bumps: Vec<[f64; 5]> = (0..4)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-6.0..6.0),
                rng.gen_range(0.8..3.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    let mut values: Vec<f64> = grid
        .xs()
        .iter()
        .map(|&x| {
            bumps
                .iter()
                .map(|[a, c, w, k, ph]| a * (-((x - c) / w).powi(2)).exp() * (k * x + ph).cos())
                .sum()
        })
        .collect();
    symmetrize(&mut values, &grid, parity);
    CompositeField::from_grid(grid, values, parity)
}

fn inverse_bound(seed: u64) -> Result<Outcome> {
    // The projection window is not small in the tail band of random data.
    let grid = Grid::new(64, 16)?.with_tail_tol(1e-2);
    let p = Params::new(1.0)?;
    let constants = inversion_constants(&p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_ratio, mut worst_trip, mut failures) = (0.0f64, 0.0f64, 0usize);
    for (parity, mode) in [
        (Parity::Odd, KernelMode::Sin),
        (Parity::Even, KernelMode::Cos),
    ] {
        for _ in 0..100 {
            let q = random_decaying_field(grid, parity, &mut rng);
            let proj = project_moment(&q, mode)?;
            let inv = invert_l(&proj.field, &p, parity)?;
            let check = check_inversion(&proj.field, &inv, &p, &constants);
            if check.bound_ratio > 1.0 || check.round_trip > tol::ROUND_TRIP {
                failures += 1;
            }
            worst_ratio = worst_ratio.max(check.bound_ratio);
            worst_trip = worst_trip.max(check.round_trip);
        }
    }
    Ok(Outcome::new(
        4,
        failures == 0,
        format!(
            "bound_factor {:.3}, worst ratio {worst_ratio:.3e}, worst round trip {worst_trip:.2e}, {failures} failures / 200",
            constants.bound_factor
        ),
        json!({
            "bound_factor": constants.bound_factor, "c1": constants.c1,
            "worst_bound_ratio": worst_ratio, "worst_round_trip": worst_trip,
            "failures": failures, "samples": 200, "seed": seed
        }),
    ))
}

/// One stage-2 run of the existence matrix.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixEntry {
    pub c2: f64,
    pub epsilon: f64,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub diagnostics: Option<Stage2Diagnostics>,
    pub conditions: Option<ConditionReport>,
    pub error: Option<ErrorInfo>,
}

impl MatrixEntry {
    fn existence_ok(&self) -> bool {
        match (&self.diagnostics, self.rho) {
            (Some(d), Some(rho)) => {
                d.residual_independent <= tol::RESIDUAL
                    && d.residual <= tol::RESIDUAL
                    && d.h2_norm_r < rho
                    && !d.clamp_active
                    && d.sign_margin_ratio >= tol::SIGN_MARGIN
            }
            _ => false,
        }
    }

    fn summary(&self) -> Value {
        let mut v =
            json!({ "c2": self.c2, "epsilon": self.epsilon, "beta": self.beta, "rho": self.rho });
        if let Some(d) = &self.diagnostics {
            v["residual"] = json!(d.residual_independent);
            v["h2_norm_r"] = json!(d.h2_norm_r);
            v["sign_margin_ratio"] = json!(d.sign_margin_ratio);
            v["clamp_active"] = json!(d.clamp_active);
            v["iterations"] = json!(d.iterations);
        }
        if let Some(e) = &self.error {
            v["error"] = json!(e);
        }
        v
    }
}

pub const MATRIX_C2: [f64; 3] = [0.85, 0.9, 0.95];
pub const MATRIX_EPS: [f64; 3] = [0.05, 0.02, 0.01];

fn solve_row(c2: f64, eps_list: &[f64], m: usize) -> Vec<MatrixEntry> {
    let cfg = SolverConfig::default();
    let failed = |eps: f64, e: &WaveError| MatrixEntry {
        c2,
        epsilon: eps,
        beta: None,
        rho: None,
        diagnostics: None,
        conditions: None,
        error: Some(e.into()),
    };
    let stage1 = Params::new(c2)
        .and_then(|p| Grid::new(64, m).map(|g| (p, g)))
        .and_then(|(p, g)| solve_stage1(&p, &g, &cfg));
    let s = match stage1 {
        Ok(s) => s,
        Err(e) => return eps_list.iter().map(|&eps| failed(eps, &e)).collect(),
    };
    eps_list
        .iter()
        .map(|&eps| {
            match s
                .params
                .with_epsilon(eps)
                .and_then(|p| solve_stage2(&p, &s.grid, &cfg, &s))
            {
                Ok(sol) => MatrixEntry {
                    c2,
                    epsilon: eps,
                    beta: Some(sol.beta),
                    rho: Some(sol.rho),
                    diagnostics: Some(sol.diagnostics),
                    conditions: Some(sol.conditions),
                    error: None,
                },
                Err(e) => failed(eps, &e),
            }
        })
        .collect()
}

/// Stage-2 solutions over the c^2 x eps matrix, computed once per process.
pub fn existence_matrix() -> &'static [MatrixEntry] {
    static MATRIX: OnceLock<Vec<MatrixEntry>> = OnceLock::new();
    MATRIX.get_or_init(|| {
        MATRIX_C2
            .par_iter()
            .map(|&c2| solve_row(c2, &MATRIX_EPS, 1024))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    })
}

fn stage2_existence() -> Result<Outcome> {
    let matrix = existence_matrix();
    let passed = matrix.iter().filter(|e| e.existence_ok()).count();
    let worst = matrix
        .iter()
        .filter_map(|e| e.diagnostics.as_ref().map(|d| d.residual_independent))
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        5,
        passed == matrix.len(),
        format!(
            "{passed}/{} converged inside the ball, worst residual {worst:.2e}",
            matrix.len()
        ),
        json!({ "runs": matrix.iter().map(MatrixEntry::summary).collect::<Vec<_>>() }),
    ))
}

pub const SLOPE_EPS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

fn beta_scaling() -> Result<Outcome> {
    let row = solve_row(0.9, &SLOPE_EPS, 1024);
    if let Some(e) = row.iter().find_map(|r| r.error.clone()) {
        return Ok(Outcome::new(
            6,
            false,
            format!("error {}: {}", e.name, e.message),
            json!({ "error": e }),
        ));
    }
    let betas: Vec<f64> = row.iter().map(|r| r.beta.unwrap()).collect();
    let slope = log_log_slope(&SLOPE_EPS, &betas);
    let (lo, hi) = tol::BETA_SLOPE;
    Ok(Outcome::new(
        6,
        (lo..=hi).contains(&slope),
        format!("slope {slope:.3} in [{lo}, {hi}]"),
        json!({ "epsilon": SLOPE_EPS, "beta": betas, "slope": slope }),
    ))
}

fn conditions() -> Result<Outcome> {
    let matrix = existence_matrix();
    let mut c1_ok = true;
    let mut c2_ok = true;
    let mut rows = Vec::new();
    let (mut worst_c1, mut worst_gap) = (0.0f64, 0.0f64);
    for e in matrix {
        match &e.conditions {
            Some(c) => {
                c1_ok &= c.c1_pass;
                c2_ok &= c.c2_pass;
                worst_c1 = worst_c1.max(c.c1_sample_max / c.c1_threshold);
                worst_gap = worst_gap.max(c.c2_lhs / c.c2_rhs);
                rows.push(json!({ "c2": e.c2, "epsilon": e.epsilon, "conditions": c }));
            }
            None => {
                c1_ok = false;
                c2_ok = false;
                rows.push(e.summary());
            }
        }
    }
    Ok(Outcome::new(
        7,
        c1_ok && c2_ok,
        format!(
            "first condition {} (worst value/threshold {worst_c1:.2e}); second condition {} (worst lhs/rhs {worst_gap:.1})",
            if c1_ok { "holds" } else { "fails" },
            if c2_ok { "holds" } else { "fails" }
        ),
        json!({ "c1_pass": c1_ok, "c2_pass": c2_ok, "runs": rows }),
    ))
}

pub const SWEEP_X0: [usize; 4] = [8, 12, 16, 20];

fn two_transition() -> Result<Outcome> {
    let cfg = SolverConfig::default();
    let p = Params::new(0.9)?;
    let s = solve_stage1(&p, &Grid::new(64, 256)?, &cfg)?;
    let sols: Vec<_> = SWEEP_X0
        .par_iter()
        .map(|&x0| solve_two_transition(x0, &p, &s.grid, &s, &cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut pass = true;
    let rows: Vec<Value> = sols
        .iter()
        .map(|t| {
            let d = &t.diagnostics;
            let ok =
                d.u_at_x0 <= tol::ZERO_AT_X0 && d.sign_changes == 2 && d.residual <= tol::RESIDUAL;
            pass &= ok;
            json!({
                "x0": t.x0, "beta_e": t.beta_e, "gamma_tilde": t.gamma_tilde,
                "vp_defect_norm": d.vp_defect_norm, "u_at_x0": d.u_at_x0,
                "sign_changes": d.sign_changes, "residual": d.residual,
                "vp_slope_at_x0": d.vp_slope_at_x0, "pass": ok
            })
        })
        .collect();
    let (a, b) = (&sols[0], &sols[sols.len() - 1]);
    let trend = b.beta_e.abs() < a.beta_e.abs()
        && b.gamma_tilde.abs() < a.gamma_tilde.abs()
        && b.diagnostics.vp_defect_norm < a.diagnostics.vp_defect_norm;
    pass &= trend;
    let worst = sols
        .iter()
        .map(|t| t.diagnostics.residual)
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        8,
        pass,
        format!(
            "worst residual {worst:.2e}, |beta_e| {:.2e} -> {:.2e}, |gamma~| {:.2e} -> {:.2e}, defect {:.2e} -> {:.2e}",
            a.beta_e.abs(),
            b.beta_e.abs(),
            a.gamma_tilde.abs(),
            b.gamma_tilde.abs(),
            a.diagnostics.vp_defect_norm,
            b.diagnostics.vp_defect_norm
        ),
        json!({ "runs": rows, "trend": trend }),
    ))
}

/// Max error of the kernel mode 1e-3 sin(k0(k - ct)) on the linear chain.
pub fn linear_kernel_error(dt: f64) -> Result<f64> {
    let p = Params::new(0.9)?;
    let grid = Grid::new(64, 1)?;
    let f = CompositeField::from_analytic(grid, Analytic::KernelSin.scaled(1e-3), Parity::Odd);
    Ok(simulate(&f, &p, 64, 20.0, dt, ChainForce::Linear)?.max_error)
}

fn lattice() -> Result<Outcome> {
    let cfg = SolverConfig::default();
    let p = Params::new(0.9)?.with_epsilon(0.01)?;
    let g = Grid::new(64, 1024)?;
    let s = solve_stage1(&p, &g, &cfg)?;
    let sol = solve_stage2(&p, &g, &cfg, &s)?;
    let rep = simulate(
        &sol.u,
        &p,
        64,
        20.0,
        0.01,
        ChainForce::Mollified(Mollifier::new(0.01)?),
    )?;
    let e1 = linear_kernel_error(0.02)?;
    let e2 = linear_kernel_error(0.01)?;
    let ratio = e1 / e2;
    let (lo, hi) = tol::DT_RATIO;
    let pass = rep.max_error <= tol::LATTICE_ERROR && (lo..=hi).contains(&ratio);
    Ok(Outcome::new(
        9,
        pass,
        format!(
            "max translation error {:.2e} (tol 1e-3), dt-halving ratio {ratio:.3}",
            rep.max_error
        ),
        json!({
            "max_error": rep.max_error, "half_time_ratio": rep.half_time_ratio,
            "linear_error_dt": [e1, e2], "ratio": ratio
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_resolve() {
        assert_eq!(resolve_targets(&["all".into()]).unwrap().len(), 9);
        assert_eq!(
            resolve_targets(&["3".into(), "lattice".into()]).unwrap(),
            vec![3, 9]
        );
        assert!(resolve_targets(&["nope".into()]).is_err());
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 2] {
            let o = run_criterion(id, 0);
            assert!(o.pass, "{}", o.line());
        }
    }
}
