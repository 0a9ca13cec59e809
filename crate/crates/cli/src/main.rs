//! `iso-stab`: command-line front end for the ε-isometry laboratory.
//!
//! ```bash
//! iso-stab gallery list
//! iso-stab gallery eval --map sqrt.toml --x 1
//! iso-stab certify --map sqrt.toml --samples 10000 --radius 100 --seed 7
//! iso-stab extract --map sqrt.toml --tol 1e-6 --nmax 60
//! iso-stab bounds --map sqrt.toml --samples 1000 --radius 100 --csv samples.csv
//! iso-stab prooftrace --map sqrt.toml --x 1 --k 4
//! iso-stab search --eps 0.1 --knots 8 --tmax 1e4 --iters 4 --restarts 4 --seed 0
//! ```
//!
//! Exit codes: 0 pass, 1 checked property failed, 2 usage or precondition
//! error. Reports are JSON documents written to stdout or `--out FILE`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "ISO_STAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "iso-stab", version, about = "Numerical laboratory for epsilon-isometries")]
pub struct Cli {
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed; each stage draws from its own named substream
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Record wall_time_ms as 0 so reruns are byte-identical
    #[arg(long, global = true)]
    no_timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inspect the built-in map families
    #[command(subcommand)]
    Gallery(GalleryCommand),

    /// Sample pairs and check the epsilon-isometry inequality
    Certify {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 100.0)]
        radius: f64,
    },

    /// Extract the limiting isometry U and its frame (P, T)
    Extract {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 60)]
        nmax: u32,
    },

    /// Check the residual bounds on sampled points
    Bounds {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 100.0)]
        radius: f64,
        /// Extraction tolerance for the frame
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 60)]
        nmax: u32,
        /// Also dump every sample as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },

    /// Trace the ball-intersection step of the proof at one point
    Prooftrace {
        #[arg(long)]
        map: PathBuf,
        /// Point x as comma-separated coordinates
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        k: u64,
    },

    /// Search graph maps for the largest orthogonal-residual growth rate
    Search {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 8)]
        knots: usize,
        #[arg(long, default_value_t = 1e4)]
        tmax: f64,
        #[arg(long, default_value_t = 4)]
        iters: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum GalleryCommand {
    /// List families and their parameter layouts
    List,
    /// Evaluate f(x) and print its coordinates
    Eval {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(commands::EXIT_USAGE);
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_USAGE)
        }
    }
}
