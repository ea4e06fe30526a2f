//! `stimclone` command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 numerical/truncation, 4 input parse,
//! 5 degenerate fit.

mod commands;
mod format;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "stimclone",
    version,
    about = "Polarization cloning by stimulated emission"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the main output (CSV or JSON report) to this path instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Machine-readable JSON summaries at full precision.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal N -> M cloning fidelity and its outcome weights.
    Fidelity {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
    },
    /// Evolve an input state through the amplifier.
    Simulate(SimulateArgs),
    /// Estimate G and Q from measurement records.
    Fit(FitArgs),
    /// Convert between optical power and photons per mode.
    Convert(ConvertArgs),
    /// Generate a synthetic measurement dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["fock", "poisson", "thermal"])))]
#[command(group(ArgGroup::new("amplifier").required(true).args(["g", "spontaneous"])))]
pub struct SimulateArgs {
    /// Gain G.
    #[arg(long)]
    pub g: Option<f64>,
    /// Merit figure Q in (0, 1].
    #[arg(long, default_value_t = 1.0, conflicts_with = "spontaneous")]
    pub q: f64,
    /// Balanced amplifier (G = 1, Q = 0) adding this many spontaneous photons per mode.
    #[arg(long)]
    pub spontaneous: Option<f64>,
    /// Fock input with this many photons.
    #[arg(long)]
    pub fock: Option<u32>,
    /// Poissonian input with this mean.
    #[arg(long)]
    pub poisson: Option<f64>,
    /// Thermal input with this mean.
    #[arg(long)]
    pub thermal: Option<f64>,
    /// Condition on this total output photon number (Fock input only).
    #[arg(long)]
    pub postselect: Option<u32>,
    /// Also run this many Monte Carlo trajectories.
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Fock-space truncation (default: automatic).
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitsArg {
    Photons,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Linear,
    Fidelity,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Records CSV.
    pub data: PathBuf,
    /// Calibration file (required for raw powers).
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = UnitsArg::Photons)]
    pub units: UnitsArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Linear)]
    pub method: MethodArg,
    /// Write `<PREFIX>_fidelity.svg` and `<PREFIX>_inset.svg`.
    #[arg(long, value_name = "PREFIX")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("quantity").required(true).args(["watts", "mu"])))]
pub struct ConvertArgs {
    #[arg(long)]
    pub watts: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 1550.0)]
    pub lambda_nm: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dlambda_nm: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1.2686)]
    pub gain: f64,
    #[arg(long, default_value_t = 0.8)]
    pub merit: f64,
    /// Comma-separated input levels in photons per mode.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.5,0.75,1,1.5,2,3,4,5"
    )]
    pub grid: Vec<f64>,
    /// Relative standard deviation of the output noise.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Preparation polarizer extinction ratio (default: perfect polarizer).
    #[arg(long)]
    pub extinction_db: Option<f64>,
}

pub struct Globals {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals {
        seed: cli.seed,
        output: cli.output,
        json: cli.json,
    };
    let result = match cli.command {
        Command::Fidelity { n, m } => commands::fidelity(&globals, n, m),
        Command::Simulate(args) => commands::simulate(&globals, &args),
        Command::Fit(args) => commands::fit(&globals, &args),
        Command::Convert(args) => commands::convert(&globals, &args),
        Command::Synth(args) => commands::synth(&globals, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
