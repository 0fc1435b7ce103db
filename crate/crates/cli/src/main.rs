// `!(x > 0.0)` checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "catsim", version, about = "Photon-subtracted squeezed vacuum: predict, simulate, reconstruct, analyze")]
struct Cli {
    /// Experiment configuration (JSON); missing fields take the default constants.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Efficiency: detection efficiency for `simulate`, correction for `reconstruct`, η_hd for `predict`.
    #[arg(long, global = true, value_name = "X")]
    eta: Option<f64>,
    /// Fock truncation.
    #[arg(long, global = true, value_name = "N")]
    nmax: Option<usize>,
    /// Samples per phase bin.
    #[arg(long = "bin-size", global = true, value_name = "N")]
    bin_size: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predicted cat figures of merit per pump power, uncorrected and loss-corrected.
    Predict {
        /// Pump powers in mW, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        powers: Option<Vec<f64>>,
    },
    /// Synthetic homodyne dataset.
    Simulate {
        #[arg(value_enum)]
        kind: SimKind,
        /// Pump power in mW.
        #[arg(long, default_value_t = 8.0)]
        power: f64,
        /// Modal purity Ξ (subtraction only); defaults to the configured value.
        #[arg(long)]
        xi: Option<f64>,
        /// Number of quadrature samples.
        #[arg(long)]
        segments: Option<usize>,
    },
    /// Maximum-likelihood reconstruction of a dataset CSV.
    Reconstruct { dataset: PathBuf },
    /// Figures of merit and a Wigner grid for a density matrix (or reconstruction report) JSON.
    Analyze {
        rho: PathBuf,
        /// Pump power in mW; enables the modal purity fit.
        #[arg(long)]
        power: Option<f64>,
    },
    /// Calibration curve fit.
    Fit {
        #[arg(value_enum)]
        kind: FitKind,
        csv: PathBuf,
    },
    /// Wigner grid of a density matrix JSON, or of the predicted state when no file is given.
    Wigner {
        rho: Option<PathBuf>,
        #[arg(long, default_value_t = 8.0)]
        power: f64,
        #[arg(long)]
        xi: Option<f64>,
        /// Half width of the square grid.
        #[arg(long, default_value_t = commands::GRID_EXTENT)]
        extent: f64,
        #[arg(long, default_value_t = commands::GRID_STEP)]
        step: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimKind {
    Squeezing,
    Subtraction,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitKind {
    Shg,
    Gain,
    Squeezing,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
