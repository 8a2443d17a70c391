mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bsdpc", version, about = "Backstepping direct power control of a PWM rectifier")]
struct Cli {
    /// Reserved. The simulator has no random inputs, so this is rejected.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerArg {
    Bsc,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Derived,
    Code,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Configuration file; the bundled canonical scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override `controller.kind`.
    #[arg(long, value_enum)]
    pub controller: Option<ControllerArg>,
    /// Override `gains.adaptation_variant`.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Settling band in percent.
    #[arg(long, default_value_t = bsdpc_core::metrics::DEFAULT_BAND_PCT)]
    pub band_pct: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace as CSV.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run BSC against both adaptation variants and tabulate the metrics.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Output directory for traces, the metrics table and the plot script.
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a run over a list of values of one numeric parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter name, e.g. `gains.gamma` or `scenario.step_size`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        /// Output summary CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute step and Lyapunov metrics of an existing trace CSV.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// Trace CSV produced by `run`.
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.seedless {
        eprintln!("error: --seedless is reserved; the simulator is already deterministic");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run { common, out } => commands::run(&common, &out),
        Command::Compare { common, out } => commands::compare(&common, &out),
        Command::Sweep { common, param, values, out } => commands::sweep(&common, &param, &values, &out),
        Command::Metrics { common, trace } => commands::metrics(&common, &trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
