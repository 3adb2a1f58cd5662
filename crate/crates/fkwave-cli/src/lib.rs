//! Command-line front end for the fkwave solvers: single runs, parameter
//! sweeps, time-domain validation and the acceptance checks. Every command
//! writes a deterministic `report.json` into the output directory.

pub mod checks;
mod commands;
pub mod config;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;

/// Exit code for solver failures.
pub const EXIT_SOLVER: i32 = 1;
/// Exit code for rejected configuration.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fkwave",
    version,
    about = "Traveling waves of the Frenkel-Kontorova advance-delay equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dispersion relation, kernel roots and inversion constants over c^2.
    Dispersion(Common),
    /// Degenerate problem with force sgn(u).
    Stage1(Common),
    /// Mollified wave by the stage-2 iteration.
    Solve(Common),
    /// Two-transition wave with transitions at +-x0.
    TwoTrans(Common),
    /// Stage-2 wave propagated on the discrete chain.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Final time.
        #[arg(long)]
        t_final: Option<f64>,
        /// Verlet time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Chain half-length K (sites -K..=K).
        #[arg(long)]
        sites: Option<usize>,
    },
    /// Independent runs over one parameter.
    Sweep {
        #[arg(value_enum)]
        axis: SweepAxis,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Acceptance checks by number (1-9), name, or `all`.
    Check {
        #[arg(value_delimiter = ',', default_value = "all")]
        targets: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Eps,
    Gamma,
    C2,
    X0,
}

/// Flags shared by every subcommand. Unset flags fall back to per-command defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Squared wave speed, in [0.83, 1].
    #[arg(long)]
    pub c2: Option<f64>,
    /// Mollification width.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Coefficient of sin(k0 x) in the stage-2 ansatz.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Transition location of two-transition waves (even integer).
    #[arg(long)]
    pub x0: Option<usize>,
    /// Grid half-length.
    #[arg(long = "X")]
    pub half_length: Option<usize>,
    /// Grid points per unit length.
    #[arg(long)]
    pub m: Option<usize>,
    /// Picard damping.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub tol_residual: Option<f64>,
    #[arg(long)]
    pub tol_outer: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Caps the rayon pool at FKWAVE_THREADS when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("FKWAVE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    init_threads();
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    commands::execute(cli.command, args)
}
