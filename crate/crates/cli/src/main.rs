//! `hwisec` command-line front end.
//!
//! `hwisec run <experiment.json> --out <dir>` evaluates one experiment and
//! writes CSV tables plus `manifest.json`. `hwisec list` prints the figure
//! registry. Set `HWISEC_THREADS` to cap the worker count.

mod registry;
mod run;
mod spec;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hwisec::Backend;

#[derive(Parser)]
#[command(
    name = "hwisec",
    version,
    about = "Secrecy bounds and simulations for impaired massive MIMO downlinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment file.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run Monte Carlo trials and sweeps on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// List the registered figure experiments.
    List,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HWISEC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("HWISEC_THREADS={v} is not a positive integer"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", registry::listing());
            ExitCode::SUCCESS
        }
        Command::Run {
            spec,
            out,
            sequential,
        } => {
            if let Err(e) = init_threads() {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
            let backend = if sequential {
                Backend::Sequential
            } else {
                Backend::default()
            };
            match run::run(&spec, &out, backend) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
