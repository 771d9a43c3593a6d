//! Argument parsing, config loading, and exit-code mapping. All data goes
//! to files in the output directory; standard error carries diagnostics
//! only. Exit codes: 0 success, 1 i/o failure, 2 bad configuration,
//! 3 solver non-convergence or model violation, 64 usage error.

mod config;
mod run;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use config::ConfigDoc;
use run::{Format, Task};
use shearfront::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "shearfront",
    version,
    about = "Front speeds in shear flows: asymptotics, variational bounds, direct runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file; omitted sections use reference defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed, overriding the config document.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory (default: $SHEARFRONT_OUT, else the working directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Format of the bulk data tables; summary reports stay JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Caps the worker thread count (0 picks one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the flat front and write its profile.
    Front,
    /// Draw one shear profile on the cross-section grid.
    SampleField,
    /// Solve the cross-section potential and the speed coefficients.
    Cell,
    /// Solve the corrector modes; report decay, residual, solvability.
    Corrector,
    /// Bracket the front speed with the variational functional.
    Bounds,
    /// Integrate the full equation and fit the front speed.
    Direct,
    /// Sweep the shear strength and fit the quadratic speed law.
    Sweep,
    /// Monte Carlo over random shears with the deviation-event tally.
    Ensemble,
    /// Probe the strong-shear growth rate of the speed.
    LargeDelta,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("shearfront: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) => 2,
        Error::NonConvergence(_) | Error::Model(_) => 3,
        Error::Io(_) => 1,
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    }
    let doc = load_doc(cli.config.as_deref())?;
    let seed = cli.seed.or(doc.seed).unwrap_or(0);
    let out = match &cli.out {
        Some(dir) => dir.clone(),
        None => std::env::var_os("SHEARFRONT_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&out)?;
    let task = Task { doc: &doc, seed, out: &out, format: cli.format };
    match cli.command {
        Command::Front => run::front(&task),
        Command::SampleField => run::sample_field(&task),
        Command::Cell => run::cell(&task),
        Command::Corrector => run::corrector(&task),
        Command::Bounds => run::bounds(&task),
        Command::Direct => run::direct(&task),
        Command::Sweep => run::sweep(&task),
        Command::Ensemble => run::ensemble(&task),
        Command::LargeDelta => run::large_delta(&task),
    }
}

fn load_doc(path: Option<&Path>) -> Result<ConfigDoc, Error> {
    let Some(path) = path else { return Ok(ConfigDoc::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parameter(format!("config {}: {e}", path.display())))?;
    config::parse_doc(&text, &path.display().to_string())
}
