//! Batch front end: forward modelling, inversion, basis-function dumps and
//! gradient verification driven by key=value config files.

mod commands;
mod setup;

use clap::{Parser, Subcommand};
use commands::CommonArgs;
use csemwave::config::Config;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "csemwave", version, about = "3D CSEM modelling and inversion in the fictitious wave domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (key = value lines, include supported).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (overrides out.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bound on concurrent per-source simulations (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-model the survey and write receiver spectra as CSV.
    Forward {
        #[command(flatten)]
        common: Common,
        /// Relative Gaussian noise fraction added to the spectra.
        #[arg(long)]
        noise: Option<f64>,
        /// RNG seed for the noise.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Invert observed data for resistivity.
    Invert {
        #[command(flatten)]
        common: Common,
    },
    /// Compute the adjoint-source basis functions and their convergence.
    Basis {
        #[command(flatten)]
        common: Common,
    },
    /// Compare adjoint, finite-difference and time-domain gradients.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn run() -> csemwave::Result<()> {
    let cli = Cli::parse();
    let (common, noise, seed, f): (
        &Common,
        Option<f64>,
        Option<u64>,
        fn(&Config, &CommonArgs) -> csemwave::Result<()>,
    ) = match &cli.command {
        Command::Forward {
            common,
            noise,
            seed,
        } => (common, *noise, *seed, commands::cmd_forward),
        Command::Invert { common } => (common, None, None, commands::cmd_invert),
        Command::Basis { common } => (common, None, None, commands::cmd_basis),
        Command::Gradcheck { common } => (common, None, None, commands::cmd_gradcheck),
    };
    let cfg = Config::from_file(&common.config)?;
    let args = CommonArgs {
        out: common.out.clone(),
        noise,
        seed,
    };
    if common.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(common.jobs)
            .build()
            .map_err(|e| csemwave::Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(|| f(&cfg, &args))
    } else {
        f(&cfg, &args)
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
