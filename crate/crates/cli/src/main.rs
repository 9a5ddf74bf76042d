//! `egp`: experiment runner for the polarization of Gaussian bosonic lattice
//! states. Every subcommand writes CSV (standard output or `--output`) and a
//! short summary on standard error.
//!
//! Exit codes: 0 success, 2 config validation, 3 numerical failure,
//! 4 theorem-violation alarm, 5 oracle mismatch.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use config::{Command, Options, RunConfig};
use report::Summary;
use std::io::IsTerminal;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "egp", version, about = "Polarization of Gaussian bosonic lattice states")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand)]
enum Sub {
    /// Particle flux of the Rice-Mele pump against the cycle time AT.
    FluxSweep,
    /// |<T>| and the determinant phase of thermal Rice-Mele chains against L.
    Scaling,
    /// Polarization winding along a built-in parameter loop.
    Winding,
    /// Closed-form, truncated-Fock and circulant oracles against the dense path.
    OracleCheck,
    /// Dense against block-circulant determinant timings.
    Bench,
    /// Chern number of the polarization of a thermal two-band family.
    Chern,
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Sub::FluxSweep => Command::FluxSweep,
            Sub::Scaling => Command::Scaling,
            Sub::Winding => Command::Winding,
            Sub::OracleCheck => Command::OracleCheck,
            Sub::Bench => Command::Bench,
            Sub::Chern => Command::Chern,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let color = std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stderr().is_terminal();
    let run = RunConfig::resolve(cli.command.command(), cli.options, color).and_then(|cfg| {
        let out = Summary::new(cfg.color);
        match cfg.command {
            Command::FluxSweep => commands::flux_sweep(&cfg, &out),
            Command::Scaling => commands::scaling(&cfg, &out),
            Command::Winding => commands::winding_cmd(&cfg, &out),
            Command::OracleCheck => commands::oracle_check(&cfg, &out),
            Command::Bench => commands::bench(&cfg, &out),
            Command::Chern => commands::chern(&cfg, &out),
        }
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("egp: {}", f.message());
            f.exit_code()
        }
    }
}
