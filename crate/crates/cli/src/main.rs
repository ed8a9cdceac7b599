use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wpc_cli::app::{run, Command, Invocation};

#[derive(Parser)]
#[command(name = "wpc", version, about = "Coupled Westervelt / Pennes-Cattaneo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Full coupled run; writes timeseries.csv and snapshots.
    Simulate(Common),
    /// Relaxation-time sweep against the Fourier reference; writes sweep.csv.
    LimitSweep(Common),
    /// Operator, manufactured-solution and energy-balance checks; writes verify.csv.
    Verify(Common),
    /// Single-mode heat run against the telegraph solution; writes modes.csv.
    Modes(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated relaxation times.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::LimitSweep(c) => (Command::LimitSweep, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Modes(c) => (Command::Modes, c),
    };
    let inv = Invocation { command, config: common.config, out: common.out, tau: common.tau, quiet: common.quiet };
    match run(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
