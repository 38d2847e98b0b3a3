//! `qdot`: reproducible pipelines over the qdot-core toolkit.

mod config;
mod correlate;
mod error;
mod fit;
mod manifest;
mod optics;
mod simulate;
mod spectra;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "qdot", version, about = "Charged quantum-dot source simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the charge trajectory and the detected HBT streams.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Build a coincidence histogram and normalized g² from two channels.
    Correlate(correlate::CorrelateArgs),
    /// Fit the bunching envelope of a g² CSV.
    Fit(fit::FitArgs),
    /// Transfer-matrix optics of the configured cavity.
    Tmm {
        #[command(subcommand)]
        action: optics::TmmAction,
    },
    /// Zeeman spectra: synthesize or classify.
    Zeeman {
        #[command(subcommand)]
        action: spectra::ZeemanAction,
    },
}

/// The directory outputs go to: the flag, else the config's, else an error.
pub fn output_dir(flag: &Option<PathBuf>, config: Option<&Path>) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.map(Path::to_path_buf))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Renders a CSV table with a header row.
pub fn csv_table<I>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let fail = |e: csv::Error| CliError::Data(e.to_string());
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).map_err(fail)?;
    for row in rows {
        wtr.write_record(&row).map_err(fail)?;
    }
    wtr.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Simulate { config, out } => simulate::run(&config, &out.out),
        Command::Correlate(args) => correlate::run(&args),
        Command::Fit(args) => fit::run(&args),
        Command::Tmm { action } => optics::run(&action),
        Command::Zeeman { action } => spectra::run(&action),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
