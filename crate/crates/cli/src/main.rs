//! `sysweyl`: Weyl coefficients, identity checks, Hamiltonian flows and
//! Galerkin spectra for first-order systems given as JSON configurations.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sysweyl_core::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "sysweyl", version, about = "Two-term Weyl asymptotics for first-order elliptic systems")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Operator configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; stdout when absent. A `<out>.manifest.json` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Weyl densities a(x), b(x) and their integrals (JSON).
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Torus grid points per dimension (default 16 for n=2, 8 for n=3).
        #[arg(long)]
        grid: Option<usize>,
        /// Quadrature order on the unit sphere (default 256 for n=2, 64 for n=3).
        #[arg(long)]
        sphere_order: Option<usize>,
        #[arg(long, hide = true)]
        drop_curvature: bool,
    },
    /// Pointwise identity suite at random points (JSON); exit 1 on any failure.
    Identities {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replaces every per-check tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        sphere_order: Option<usize>,
        #[arg(long, hide = true)]
        drop_curvature: bool,
    },
    /// One Hamiltonian trajectory with its transported eigenvector phase (CSV).
    Flow {
        #[command(flatten)]
        common: Common,
        /// Branch index (positive or negative, never 0).
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        j: i32,
        /// Starting point `x1,..,xn,xi1,..,xin`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        point: Vec<f64>,
        /// Final time; negative integrates backwards.
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        t_end: f64,
        /// Local error tolerance of the integrator.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Loops (or periodic trajectories) through a base point (JSON).
    Loops {
        #[command(flatten)]
        common: Common,
        /// Base point `x1,..,xn` (default: origin).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        /// Branch index; all positive branches when absent.
        #[arg(long, allow_hyphen_values = true)]
        j: Option<i32>,
        /// Cosphere direction resolution.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Longest return time searched.
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        /// Return distance counted as a loop.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Require return in the covector too.
        #[arg(long)]
        periodic: bool,
    },
    /// Galerkin spectrum against the mollified two-term prediction (CSV).
    Verify {
        #[command(flatten)]
        common: Common,
        /// Fourier cutoff: modes with |k|_inf <= K.
        #[arg(long = "K", default_value_t = 12)]
        k: usize,
        #[arg(long, default_value_t = 5.0)]
        lambda_max: f64,
        /// Support half-width of the mollifier transform (default 0.9 of the shortest loop).
        #[arg(long)]
        mollifier_width: Option<f64>,
        /// Accept a mollifier width at or beyond the shortest loop.
        #[arg(long)]
        force: bool,
        /// Torus grid for the coefficients.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        sphere_order: Option<usize>,
        /// Bootstrap seed of the fit.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Spectral asymmetry: coefficients of A and -A; exit 1 on failure.
    Asym {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        sphere_order: Option<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Also compare Galerkin spectra of A and -A at this cutoff (planar torus operators).
        #[arg(long = "K")]
        k: Option<usize>,
    },
}

/// Process outcome of a command that ran to completion.
pub enum Outcome {
    Passed,
    Failed,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Math => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: invalid threads: must be positive");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(t);
    }
    if let Err(e) = pool.build_global() {
        log::warn!("thread pool: {e}");
    }
    match commands::run(cli.command) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
