//! Subcommand implementations.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fkwave::dispersion::{inversion_constants, kernel_roots, symbol, Params};
use fkwave::fields::io::write_field;
use fkwave::fields::{CompositeField, Grid};
use fkwave::lattice::{simulate, ChainForce};
use fkwave::profiles::Mollifier;
use fkwave::twotrans::solve_two_transition;
use fkwave::waves::{
    log_log_slope, pointwise_residual, solve_stage1, solve_stage2, Force, Stage1Solution,
};
use fkwave::WaveError;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::checks::{self, tol};
use crate::config::RunConfig;
use crate::plot::{line_chart, Series};
use crate::report::{ErrorInfo, Report};
use crate::{Command, Common, SweepAxis, EXIT_CONFIG, EXIT_SOLVER};

/// Failure of a command, with the partial result gathered so far.
enum Failure {
    Wave(WaveError, Value),
    Io(io::Error),
    /// Some parts of a multi-run command failed.
    Partial(ErrorInfo, Value),
}

impl From<WaveError> for Failure {
    fn from(e: WaveError) -> Self {
        Failure::Wave(e, Value::Null)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<Value, Failure>;

pub(crate) fn execute(command: Command, argv: Vec<String>) -> i32 {
    let (name, common) = match &command {
        Command::Dispersion(c) => ("dispersion", c),
        Command::Stage1(c) => ("stage1", c),
        Command::Solve(c) => ("solve", c),
        Command::TwoTrans(c) => ("two-trans", c),
        Command::Validate { common, .. } => ("validate", common),
        Command::Sweep { axis, common, .. } => (
            if *axis == SweepAxis::X0 {
                "sweep-x0"
            } else {
                "sweep"
            },
            common,
        ),
        Command::Check { common, .. } => ("check", common),
    };
    let cfg = RunConfig::resolve(name, common);
    if let Err(e) = cfg.validate() {
        eprintln!("fkwave: {e}");
        let _ = Report::failed(cfg.clone(), argv, (&e).into(), Value::Null).write(&cfg.out);
        return EXIT_CONFIG;
    }
    let out = cfg.out.clone();
    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("fkwave: cannot create {}: {e}", out.display());
        return EXIT_SOLVER;
    }
    let outcome = match command {
        Command::Dispersion(ref c) => dispersion(&cfg, c),
        Command::Stage1(_) => stage1(&cfg),
        Command::Solve(_) => solve(&cfg),
        Command::TwoTrans(_) => two_trans(&cfg),
        Command::Validate {
            t_final, dt, sites, ..
        } => validate(&cfg, t_final.unwrap_or(20.0), dt.unwrap_or(0.01), sites),
        Command::Sweep {
            axis, ref values, ..
        } => sweep(&cfg, axis, values),
        Command::Check { ref targets, .. } => check(&cfg, targets),
    };
    let (report, code) = match outcome {
        Ok(result) => (Report::ok(cfg.clone(), argv, result), 0),
        Err(Failure::Wave(e, partial)) => {
            eprintln!("fkwave: {} ({})", e, e.name());
            let code = if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_SOLVER
            };
            (
                Report::failed(cfg.clone(), argv, (&e).into(), partial),
                code,
            )
        }
        Err(Failure::Io(e)) => {
            eprintln!("fkwave: {e}");
            let info = ErrorInfo {
                name: "Io".into(),
                message: e.to_string(),
            };
            (
                Report::failed(cfg.clone(), argv, info, Value::Null),
                EXIT_SOLVER,
            )
        }
        Err(Failure::Partial(info, result)) => {
            eprintln!("fkwave: {}", info.message);
            (Report::failed(cfg.clone(), argv, info, result), EXIT_SOLVER)
        }
    };
    if let Err(e) = report.write(&out) {
        eprintln!("fkwave: cannot write report: {e}");
        return EXIT_SOLVER;
    }
    code
}

fn plot(path: &Path, title: &str, series: &[Series]) -> io::Result<()> {
    line_chart(path, title, "x", series).map_err(io::Error::other)
}

/// fields.csv/json for `u`, corrector.csv/json for `r`, and the three plots.
fn dump_wave(
    out: &Path,
    u: &CompositeField,
    r: &CompositeField,
    residual: &[f64],
) -> io::Result<()> {
    write_field(u, out, "fields")?;
    write_field(r, out, "corrector")?;
    let xs = u.grid.xs();
    plot(
        &out.join("u.svg"),
        "profile u",
        &[Series::new("u", &xs, &u.total())],
    )?;
    plot(
        &out.join("r.svg"),
        "corrector r",
        &[Series::new("r", &xs, &r.grid_part)],
    )?;
    plot(
        &out.join("residual.svg"),
        "pointwise residual",
        &[Series::new("residual", &xs, residual)],
    )
}

fn dispersion(cfg: &RunConfig, c: &Common) -> Outcome {
    let c2_list: Vec<f64> = match c.c2 {
        Some(v) => vec![v],
        None => vec![0.83, 0.85, 0.9, 0.95, 1.0],
    };
    let mut rows = Vec::new();
    let zetas: Vec<f64> = (0..=1000)
        .map(|i| i as f64 * 2.0 * std::f64::consts::PI / 1000.0)
        .collect();
    let mut curves = Vec::new();
    for &c2 in &c2_list {
        let p = Params::new(c2)?;
        let roots = kernel_roots(&p)?;
        let constants = match inversion_constants(&p) {
            Ok(k) => json!(k),
            Err(e) => json!({ "error": ErrorInfo::from(&e) }),
        };
        rows.push(json!({
            "c2": c2, "alpha": p.alpha, "k0": p.k0,
            "d_at_k0": symbol(p.k0, c2, p.alpha), "roots": roots, "constants": constants
        }));
        curves.push((
            c2,
            zetas
                .iter()
                .map(|&z| symbol(z, c2, p.alpha))
                .collect::<Vec<_>>(),
        ));
    }
    let mut w = BufWriter::new(fs::File::create(cfg.out.join("dispersion.csv"))?);
    write!(w, "zeta")?;
    for (c2, _) in &curves {
        write!(w, ",D_c2_{c2}")?;
    }
    writeln!(w)?;
    for (i, z) in zetas.iter().enumerate() {
        write!(w, "{z:.16e}")?;
        for (_, d) in &curves {
            write!(w, ",{:.16e}", d[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    let labels: Vec<String> = curves.iter().map(|(c2, _)| format!("c2 = {c2}")).collect();
    let series: Vec<Series> = curves
        .iter()
        .zip(&labels)
        .take(4)
        .map(|((_, d), l)| Series::new(l, &zetas, d))
        .collect();
    line_chart(
        &cfg.out.join("dispersion.svg"),
        "dispersion symbol D",
        "zeta",
        &series,
    )
    .map_err(io::Error::other)?;
    Ok(json!({ "rows": rows }))
}

fn run_stage1(cfg: &RunConfig) -> Result<(Params, Grid, Stage1Solution), WaveError> {
    let p = cfg.params()?;
    let g = cfg.grid()?;
    let s = solve_stage1(&p, &g, &cfg.solver()?)?;
    Ok((p, g, s))
}

fn stage1_json(s: &Stage1Solution) -> Value {
    let mut v = json!({
        "params": s.params, "grid": s.grid, "profile": s.profile,
        "rho0": s.rho0, "x_margin": s.x_margin, "diagnostics": s.diagnostics
    });
    if let Some(&(c2, b0, b1)) = tol::STAGE1_BOUNDS
        .iter()
        .find(|(c2, _, _)| *c2 == s.params.c2)
    {
        v["bound_comparison"] = json!({
            "c2": c2,
            "bound_sup_r": b0,
            "sup_r_within": s.diagnostics.scaled_sup_r < b0,
            "bound_sup_r_prime": b1,
            "sup_r_prime_within": s.diagnostics.scaled_sup_r_prime < b1,
        });
    }
    v
}

fn stage1(cfg: &RunConfig) -> Outcome {
    let (p, _, s) = run_stage1(cfg)?;
    let res = pointwise_residual(&s.u_p, &p, Force::Sign)?;
    dump_wave(&cfg.out, &s.u_p, &s.r, &res)?;
    Ok(stage1_json(&s))
}

fn solve(cfg: &RunConfig) -> Outcome {
    let (p, g, s) = run_stage1(cfg)?;
    let partial = json!({ "stage1": stage1_json(&s) });
    let sol =
        solve_stage2(&p, &g, &cfg.solver()?, &s).map_err(|e| Failure::Wave(e, partial.clone()))?;
    let force = Force::Mollified(Mollifier::new(p.epsilon)?);
    let res = pointwise_residual(&sol.u, &p, force)?;
    dump_wave(&cfg.out, &sol.u, &sol.r, &res)?;
    Ok(json!({
        "stage1": partial["stage1"],
        "stage2": {
            "beta": sol.beta, "gamma": sol.gamma, "rho": sol.rho,
            "residual_within_tol": sol.diagnostics.residual_independent <= cfg.tol_residual,
            "diagnostics": sol.diagnostics, "conditions": sol.conditions
        }
    }))
}

fn two_trans(cfg: &RunConfig) -> Outcome {
    let (p, g, s) = run_stage1(cfg)?;
    let t = solve_two_transition(cfg.x0, &p, &g, &s, &cfg.solver()?)?;
    let res = pointwise_residual(&t.u, &p, Force::Sign)?;
    dump_wave(&cfg.out, &t.u, &t.r_tilde, &res)?;
    write_field(&t.v_p, &cfg.out, "vp")?;
    Ok(json!({
        "x0": t.x0, "beta_e": t.beta_e, "gamma_tilde": t.gamma_tilde,
        "stage1_residual": s.diagnostics.residual, "diagnostics": t.diagnostics
    }))
}

fn validate(cfg: &RunConfig, t_final: f64, dt: f64, sites: Option<usize>) -> Outcome {
    let (p, g, s) = run_stage1(cfg)?;
    let sol = solve_stage2(&p, &g, &cfg.solver()?, &s)?;
    let k = sites.unwrap_or(g.half_length());
    let rep = simulate(
        &sol.u,
        &p,
        k,
        t_final,
        dt,
        ChainForce::Mollified(Mollifier::new(p.epsilon)?),
    )?;
    let mut w = BufWriter::new(fs::File::create(cfg.out.join("trajectory.csv"))?);
    writeln!(w, "t,max_error,energy")?;
    for r in &rep.trajectory {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", r.t, r.max_error, r.energy)?;
    }
    w.flush()?;
    let ts: Vec<f64> = rep.trajectory.iter().map(|r| r.t).collect();
    let es: Vec<f64> = rep.trajectory.iter().map(|r| r.max_error).collect();
    line_chart(
        &cfg.out.join("trajectory.svg"),
        "translation error",
        "t",
        &[Series::new("max error", &ts, &es)],
    )
    .map_err(io::Error::other)?;
    let res = pointwise_residual(&sol.u, &p, Force::Mollified(Mollifier::new(p.epsilon)?))?;
    dump_wave(&cfg.out, &sol.u, &sol.r, &res)?;
    Ok(json!({
        "beta": sol.beta,
        "stage2_residual": sol.diagnostics.residual_independent,
        "simulation": {
            "max_error": rep.max_error, "sites": rep.sites, "steps": rep.steps,
            "dt": rep.dt, "t_final": rep.t_final, "half_time_ratio": rep.half_time_ratio,
            "within_tolerance": rep.max_error <= tol::LATTICE_ERROR
        }
    }))
}

fn sweep_entry(
    cfg: &RunConfig,
    axis: SweepAxis,
    value: f64,
    stage1: Option<&Stage1Solution>,
) -> Value {
    let run = || -> Result<Value, WaveError> {
        let solver = cfg.solver()?;
        match axis {
            SweepAxis::X0 => {
                let s = stage1.expect("shared stage-1 solution");
                let x0 = value.round() as usize;
                if (value - x0 as f64).abs() > 0.0 {
                    return Err(WaveError::InvalidParams(format!(
                        "x0 = {value} is not an integer"
                    )));
                }
                let t = solve_two_transition(x0, &s.params, &s.grid, s, &solver)?;
                Ok(json!({
                    "beta_e": t.beta_e, "gamma_tilde": t.gamma_tilde,
                    "vp_defect_norm": t.diagnostics.vp_defect_norm,
                    "vp_slope_at_x0": t.diagnostics.vp_slope_at_x0,
                    "residual": t.diagnostics.residual, "sign_changes": t.diagnostics.sign_changes
                }))
            }
            SweepAxis::C2 => {
                let p = Params::new(value)?
                    .with_epsilon(cfg.epsilon)?
                    .with_gamma(cfg.gamma)?;
                let g = cfg.grid()?;
                let s = solve_stage1(&p, &g, &solver)?;
                let sol = solve_stage2(&p, &g, &solver, &s)?;
                Ok(json!({ "beta": sol.beta, "rho0": s.rho0, "diagnostics": sol.diagnostics }))
            }
            SweepAxis::Eps | SweepAxis::Gamma => {
                let s = stage1.expect("shared stage-1 solution");
                let p = if axis == SweepAxis::Eps {
                    s.params.with_epsilon(value)?.with_gamma(cfg.gamma)?
                } else {
                    s.params.with_epsilon(cfg.epsilon)?.with_gamma(value)?
                };
                let sol = solve_stage2(&p, &s.grid, &solver, s)?;
                Ok(
                    json!({ "beta": sol.beta, "diagnostics": sol.diagnostics, "conditions": sol.conditions }),
                )
            }
        }
    };
    match run() {
        Ok(mut v) => {
            v["value"] = json!(value);
            v
        }
        Err(e) => json!({ "value": value, "error": ErrorInfo::from(&e) }),
    }
}

fn sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Outcome {
    let values: Vec<f64> = if values.is_empty() {
        match axis {
            SweepAxis::Eps => checks::SLOPE_EPS.to_vec(),
            SweepAxis::Gamma => vec![0.0, 0.01, 0.02, 0.05],
            SweepAxis::C2 => checks::MATRIX_C2.to_vec(),
            SweepAxis::X0 => checks::SWEEP_X0.iter().map(|&x| x as f64).collect(),
        }
    } else {
        values.to_vec()
    };
    let shared = match axis {
        SweepAxis::C2 => None,
        _ => Some(run_stage1(cfg)?.2),
    };
    let entries: Vec<Value> = values
        .par_iter()
        .map(|&v| sweep_entry(cfg, axis, v, shared.as_ref()))
        .collect();
    let key = if axis == SweepAxis::X0 {
        "beta_e"
    } else {
        "beta"
    };
    let ok: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| Some((e["value"].as_f64()?, e[key].as_f64()?)))
        .collect();
    let mut result = json!({
        "axis": format!("{axis:?}").to_lowercase(), "values": values, "entries": entries
    });
    if axis == SweepAxis::Eps && ok.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = ok.iter().copied().unzip();
        result["beta_slope"] = json!(log_log_slope(&xs, &ys));
    }
    if !ok.is_empty() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = ok.iter().copied().unzip();
        line_chart(
            &cfg.out.join("sweep.svg"),
            &format!("{key} over the sweep"),
            "value",
            &[Series::new(key, &xs, &ys)],
        )
        .map_err(io::Error::other)?;
    }
    if ok.len() < values.len() {
        let info = ErrorInfo {
            name: "SweepEntryFailed".into(),
            message: format!(
                "{} of {} sweep entries failed",
                values.len() - ok.len(),
                values.len()
            ),
        };
        return Err(Failure::Partial(info, result));
    }
    Ok(result)
}

fn check(cfg: &RunConfig, targets: &[String]) -> Outcome {
    let ids = checks::resolve_targets(targets).map_err(WaveError::InvalidParams)?;
    let outcomes: Vec<checks::Outcome> = ids
        .iter()
        .map(|&id| {
            let o = checks::run_criterion(id, cfg.seed);
            println!("{}", o.line());
            o
        })
        .collect();
    let all_pass = outcomes.iter().all(|o| o.pass);
    let result = json!({ "all_pass": all_pass, "criteria": outcomes });
    if all_pass {
        Ok(result)
    } else {
        let info = ErrorInfo {
            name: "ChecksFailed".into(),
            message: "one or more acceptance checks failed".into(),
        };
        Err(Failure::Partial(info, result))
    }
}
