//! Batch front end for the nonlocal minimal graph library.
//!
//! `nlmg` reads a flat key = value configuration (see `configs/` for
//! annotated samples), runs a solver or a study, and writes CSV and VTK
//! artifacts whose names encode (problem, s, h, solver).  Exit codes:
//! 0 success, 2 solver non-convergence, 3 configuration error; anything
//! else (I/O, internal) exits 1.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

static FORCE_DETERMINISTIC: AtomicBool = AtomicBool::new(false);

/// True when `--deterministic` was passed; folded into every loaded
/// configuration on top of the file's own `[quadrature] deterministic`.
pub fn force_deterministic() -> bool {
    FORCE_DETERMINISTIC.load(Ordering::Relaxed)
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration (file, flags, or environment): exit 3.
    Config(String),
    /// A solver finished without reaching its tolerance: exit 2.
    NonConvergence(String),
    /// I/O or internal failure: exit 1.
    Other(String),
}

impl CliError {
    pub fn config(msg: String) -> CliError {
        CliError::Config(msg)
    }

    pub fn non_convergence(msg: String) -> CliError {
        CliError::NonConvergence(msg)
    }

    pub fn other(msg: String) -> CliError {
        CliError::Other(msg)
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::NonConvergence(_) => 2,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::NonConvergence(m) => write!(f, "non-convergence: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "nlmg",
    version,
    about = "Nonlocal minimal graph solver",
    long_about = "Computes graphs of zero fractional mean curvature over a bounded domain by \
                  minimizing the nonlocal area energy with piecewise linear finite elements."
)]
struct Cli {
    /// Worker threads (default: all cores); the NLMG_THREADS environment
    /// variable overrides this flag
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Serial fixed-order reductions: reruns produce byte-identical CSVs
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a configuration, echo it with defaults resolved, and report
    /// dry-run mesh statistics
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fractional order, overriding the config file
        #[arg(long)]
        s: Option<f64>,
    },
    /// Build the configured mesh and export it (plain text and VTK)
    Mesh {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Minimize the energy with the damped Newton iteration
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Minimize the energy with the semi-implicit gradient flow
    Flow {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Evaluate the energy of the datum extension or of a saved solution
    Energy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
        /// Solution CSV written by a previous solve/flow run
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Geometric error between two saved solutions on the configured mesh
    Metrics {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
        /// First solution CSV (the computed one)
        #[arg(long)]
        u: PathBuf,
        /// Second solution CSV (the reference)
        #[arg(long)]
        v: PathBuf,
    },
    /// Parameter studies producing one CSV table each
    Study {
        #[command(subcommand)]
        what: Study,
    },
    /// Cross-check assembled numbers against the brute-force integrator
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        s: Option<f64>,
        /// Largest acceptable relative gap before a nonzero exit; the gap
        /// includes the configured quadrature rule's truncation error, so
        /// tightening [quadrature] shrinks it
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum Study {
    /// L1 errors against the catenary reference over mesh levels h = 2^-k
    Rate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fractional order (near 1/2 for the catenary comparison)
        #[arg(long)]
        s: Option<f64>,
        /// Refinement levels k, meshed at h = 2^-k
        #[arg(long, num_args = 1.., required = true)]
        levels: Vec<u32>,
    },
    /// Geometric errors and forms against their classical limits
    Limit {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ladder of fractional orders approaching 1/2
        #[arg(long = "s-list", num_args = 1.., required = true)]
        s_list: Vec<f64>,
    },
    /// Nonlocal normal vectors against the scaled classical gradient
    Normals {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "s-list", num_args = 1.., required = true)]
        s_list: Vec<f64>,
        /// Sample abscissae inside the domain (defaults to five spread points)
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        points: Vec<f64>,
    },
}

/// NLMG_THREADS wins over --threads; absent both, rayon's default (all
/// available cores) stands.
fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("NLMG_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                CliError::config(format!("NLMG_THREADS must be a positive integer, got `{v}`"))
            })?;
            if n == 0 {
                return Err(CliError::config("NLMG_THREADS must be at least 1".into()));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(flag),
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Validate { config, s } => commands::validate(config.as_deref(), s),
        Cmd::Mesh { config, s } => commands::mesh_cmd(config.as_deref(), s),
        Cmd::Solve { config, s } => commands::solve(config.as_deref(), s),
        Cmd::Flow { config, s } => commands::flow(config.as_deref(), s),
        Cmd::Energy { config, s, solution } => {
            commands::energy(config.as_deref(), s, solution.as_deref())
        }
        Cmd::Metrics { config, s, u, v } => commands::metrics(config.as_deref(), s, &u, &v),
        Cmd::Study { what } => match what {
            Study::Rate { config, s, levels } => {
                commands::study_rate(config.as_deref(), s, &levels)
            }
            Study::Limit { config, s_list } => commands::study_limit(config.as_deref(), &s_list),
            Study::Normals { config, s_list, points } => {
                commands::study_normals(config.as_deref(), &s_list, &points)
            }
        },
        Cmd::Oracle { config, s, tol } => commands::oracle(config.as_deref(), s, tol),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if cli.deterministic {
        FORCE_DETERMINISTIC.store(true, Ordering::Relaxed);
    }
    match resolve_threads(cli.threads) {
        Ok(Some(n)) => {
            // a failure here means a pool already exists, which is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
    if let Err(e) = dispatch(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
