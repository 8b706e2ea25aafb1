//! `invmerton`: run recovery, consistency and Monte-Carlo jobs from JSON
//! configs.
//!
//! Exit codes: 0 success, 1 failed domain check, 2 bad configuration or
//! input, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use inverse_merton_cli::commands::{self, Outcome};
use inverse_merton_cli::config::LoadedJob;
use inverse_merton_cli::error::CliError;
use inverse_merton_cli::examples;

#[derive(Parser)]
#[command(name = "invmerton", version, about = "Recover utilities from consumption and investment rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Job config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Proceed with recovery even if the consistency check fails.
    #[arg(long, global = true)]
    force: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Deterministic recovery from a consumption rule and a wealth weighting.
    DetRecover,
    /// Check a consumption/investment pair against Black's equation.
    BlackCheck,
    /// Recover marginal utility, risk aversion and plot data.
    Recover,
    /// Simulate wealth and state-price paths.
    Simulate,
    /// Monte-Carlo check of the budget constraint.
    Budget,
    /// Write the built-in fixture configs.
    Examples,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TOOL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("TOOL_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn write_examples(out: &Path) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out)?;
    for job in examples::all()? {
        let path = out.join(format!("{}.json", job.name));
        std::fs::write(&path, job.to_json())?;
        println!("{}", path.display());
    }
    Ok(Outcome::Pass)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    init_threads()?;
    if let Command::Examples = cli.command {
        return write_examples(&cli.out);
    }
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    let job = LoadedJob::load(path)?;
    match cli.command {
        Command::DetRecover => commands::det_recover(&job, &cli.out),
        Command::BlackCheck => commands::black_check(&job, &cli.out),
        Command::Recover => commands::recover(&job, &cli.out, cli.force),
        Command::Simulate => commands::simulate_cmd(&job, &cli.out),
        Command::Budget => commands::budget(&job, &cli.out),
        Command::Examples => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("invmerton: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
