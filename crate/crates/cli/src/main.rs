//! `arealaw run <config>`, `arealaw check <run-dir>` and
//! `arealaw export <run-dir> --format csv`.
//!
//! Exit codes: 0 on success, 1 when an invariant fails or a computation
//! errors, 2 for configuration errors.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arealaw::error::Error;
use arealaw::experiment::{self, ExperimentConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "arealaw", version, about = "Area-law experiments on small spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweeps of a TOML config into a run directory.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify every invariant from the files of a run directory.
    Check { run_dir: PathBuf },
    /// Print all tables of a run directory as one long-format table.
    Export {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

const CONFIG_ERROR: u8 = 2;
const INVARIANT_FAILURE: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Check { run_dir } => check(&run_dir),
        Command::Export { run_dir, format: Format::Csv, out } => export(&run_dir, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => CONFIG_ERROR,
        _ => INVARIANT_FAILURE,
    }
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<u8, Error> {
    let text = std::fs::read_to_string(config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(&experiment::sha256_hex(text.as_bytes())[..12]));
    let summary = experiment::run(&cfg, &text, &dir)?;
    println!("run directory: {}", dir.display());
    println!(
        "{} points, {} exact checks, {} failures, {} skipped, {} errors",
        summary.points,
        summary.exact_checks,
        summary.failures.len(),
        summary.skipped.len(),
        summary.errors.len()
    );
    for f in &summary.failures {
        println!("FAIL {f}");
    }
    for s in &summary.skipped {
        println!("skipped {s}");
    }
    for e in &summary.errors {
        println!("error {e}");
    }
    Ok(if summary.failures.is_empty() { 0 } else { INVARIANT_FAILURE })
}

fn check(dir: &Path) -> Result<u8, Error> {
    require_dir(dir)?;
    let rep = experiment::check_run_dir(dir)?;
    println!("{} files, {} checks, {} failures", rep.files, rep.checked, rep.failures.len());
    for f in &rep.failures {
        println!("FAIL {f}");
    }
    Ok(if rep.ok() { 0 } else { INVARIANT_FAILURE })
}

fn export(dir: &Path, out: Option<PathBuf>) -> Result<u8, Error> {
    require_dir(dir)?;
    match out {
        Some(path) => experiment::export_long_csv(dir, io::BufWriter::new(std::fs::File::create(path)?))?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            experiment::export_long_csv(dir, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(0)
}

fn require_dir(dir: &Path) -> Result<(), Error> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} is not a run directory", dir.display())))
    }
}
