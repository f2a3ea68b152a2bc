//! Command-line front door: `impspps <command> --config <file>` runs one
//! experiment per invocation and writes deterministic CSV/JSON artifacts.
//!
//! Exit codes: 0 success; 2 invalid configuration or impedance; 3 eigenvalue
//! scan shortfall; 4 kernel errors; 5 approximation errors; 6 series/solve
//! errors. A failing `check` verdict is recorded in the report, not the exit
//! code.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::CheckStage;
use config::{Overrides, RunConfig};
use impspps_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "impspps",
    about = "Formal powers, series solutions, spectra, and transmutation kernels \
             for Sturm-Liouville equations in impedance form",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run-configuration JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Impedance id (overrides the config's impedance).
    #[arg(long)]
    impedance: Option<String>,
    /// Grid size (overrides the config's grid_n).
    #[arg(long)]
    grid_n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the formal-power table and report the differentiation relations.
    FormalPowers(Common),
    /// Evaluate one series solution against the reference oracle.
    Solve(Common),
    /// Solve the Dirichlet eigenvalue problem.
    Eigen(Common),
    /// Project targets onto formal-power spans and tabulate the errors.
    Approx(Common),
    /// Build the transmutation kernel (pair) and its residual report.
    Kernel(Common),
    /// Run every invariant suite and write one verdict JSON.
    Check(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::FormalPowers(c)
            | Command::Solve(c)
            | Command::Eigen(c)
            | Command::Approx(c)
            | Command::Kernel(c)
            | Command::Check(c) => c,
        }
    }
}

/// Invalid impedances map to 2 everywhere; any other error raised inside a
/// command takes that module's code (config-file problems are caught before
/// dispatch and map to 2 on their own).
fn exit_code(err: &Error, module_code: u8) -> u8 {
    match err {
        Error::InvalidImpedance(_) => 2,
        _ => module_code,
    }
}

fn run(cli: Cli) -> Result<(), (u8, Error)> {
    let common = cli.command.common();
    let config = RunConfig::load(
        &common.config,
        Overrides {
            out: common.out.clone(),
            impedance: common.impedance.clone(),
            grid_n: common.grid_n,
        },
    )
    .map_err(|e| (2, e))?;
    match &cli.command {
        Command::FormalPowers(_) => {
            commands::cmd_formal_powers(&config).map_err(|e| (2, e))
        }
        Command::Solve(_) => commands::cmd_solve(&config).map_err(|e| (exit_code(&e, 6), e)),
        Command::Eigen(_) => commands::cmd_eigen(&config).map_err(|e| (exit_code(&e, 3), e)),
        Command::Approx(_) => commands::cmd_approx(&config).map_err(|e| (exit_code(&e, 5), e)),
        Command::Kernel(_) => commands::cmd_kernel(&config).map_err(|e| (exit_code(&e, 4), e)),
        Command::Check(_) => commands::cmd_check(&config).map_err(|(stage, e)| {
            let code = match stage {
                CheckStage::Config => 2,
                CheckStage::Eigen => 3,
                CheckStage::Kernel => 4,
                CheckStage::Approx => 5,
                CheckStage::Solve => 6,
            };
            (exit_code(&e, code), e)
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("impspps: {err}");
            ExitCode::from(code)
        }
    }
}
