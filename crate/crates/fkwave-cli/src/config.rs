//! Resolution of command-line flags into a validated run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fkwave::dispersion::{Params, DEFAULT_EPSILON};
use fkwave::fields::Grid;
use fkwave::waves::SolverConfig;
use fkwave::{Result, WaveError};
use serde::Serialize;

use crate::Common;

/// Grid half-length used unless --X is given.
pub const DEFAULT_HALF_LENGTH: usize = 64;
pub const DEFAULT_C2: f64 = 0.9;
pub const DEFAULT_X0: usize = 12;
pub const DEFAULT_SEED: u64 = 0;

/// Points per unit length by command: the stage-2 window needs the finest grid.
pub fn default_points_per_unit(command: &str) -> usize {
    match command {
        "dispersion" => 16,
        "stage1" => 64,
        "two-trans" | "sweep-x0" => 256,
        _ => 1024,
    }
}

/// Effective configuration of one run, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub c2: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub x0: usize,
    pub half_length: usize,
    pub points_per_unit: usize,
    pub omega: f64,
    pub tol_residual: f64,
    pub tol_outer: f64,
    pub out: PathBuf,
    pub seed: u64,
    /// "flag" or "default" for each field above.
    pub provenance: BTreeMap<String, String>,
}

impl RunConfig {
    /// Fills unset flags with defaults for `command` and records where each value came from.
    pub fn resolve(command: &str, c: &Common) -> Self {
        let solver = SolverConfig::default();
        let mut provenance = BTreeMap::new();
        let mut pick = |name: &str, set: bool| {
            provenance.insert(
                name.to_string(),
                if set { "flag" } else { "default" }.to_string(),
            );
        };
        pick("c2", c.c2.is_some());
        pick("epsilon", c.eps.is_some());
        pick("gamma", c.gamma.is_some());
        pick("x0", c.x0.is_some());
        pick("half_length", c.half_length.is_some());
        pick("points_per_unit", c.m.is_some());
        pick("omega", c.omega.is_some());
        pick("tol_residual", c.tol_residual.is_some());
        pick("tol_outer", c.tol_outer.is_some());
        pick("out", c.out.is_some());
        pick("seed", c.seed.is_some());
        Self {
            command: command.to_string(),
            c2: c.c2.unwrap_or(DEFAULT_C2),
            epsilon: c.eps.unwrap_or(DEFAULT_EPSILON),
            gamma: c.gamma.unwrap_or(0.0),
            x0: c.x0.unwrap_or(DEFAULT_X0),
            half_length: c.half_length.unwrap_or(DEFAULT_HALF_LENGTH),
            points_per_unit: c.m.unwrap_or_else(|| default_points_per_unit(command)),
            omega: c.omega.unwrap_or(solver.omega),
            tol_residual: c.tol_residual.unwrap_or(solver.residual_tol),
            tol_outer: c.tol_outer.unwrap_or(solver.outer_tol),
            out: c.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            seed: c.seed.unwrap_or(DEFAULT_SEED),
            provenance,
        }
    }

    pub fn params(&self) -> Result<Params> {
        Params::new(self.c2)?
            .with_epsilon(self.epsilon)?
            .with_gamma(self.gamma)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.points_per_unit)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            omega: self.omega,
            residual_tol: self.tol_residual,
            outer_tol: self.tol_outer,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant before any computation.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.grid()?;
        self.solver()?;
        if !self.x0.is_multiple_of(2) {
            return Err(WaveError::InvalidParams(format!(
                "x0 = {} must be even",
                self.x0
            )));
        }
        Ok(())
    }
}
