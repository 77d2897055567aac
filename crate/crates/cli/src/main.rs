//! Command-line front end: certify, locate, and exhibit homoclinic
//! bifurcations for circle-parametrized nonautonomous systems.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Emitter;
use config::{load_config, RunConfig};

#[derive(Parser)]
#[command(
    name = "hombif",
    about = "Certifies and locates homoclinic bifurcations of discrete \
             nonautonomous systems parametrized by the circle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to a JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for reports and CSV artifacts (overrides config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Loop sample count K (overrides config).
    #[arg(long, global = true, value_name = "K")]
    samples: Option<usize>,

    /// Amplitude list for solve, comma-separated (overrides config).
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    eps: Option<Vec<f64>>,

    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate assumptions and compute the topological invariants.
    Detect,
    /// Detect, then scan the circle and isolate crossing intervals.
    Scan,
    /// Detect, scan, and Newton-solve orbit branches at each amplitude.
    Solve,
    /// Run the built-in worked example and compare with golden values.
    VerifyExample,
    /// Print the effective configuration as JSON.
    DumpConfig,
}

/// Exit-code contract: 0 = success (including criterion-not-met),
/// 1 = golden mismatch, 2 = assumption failure, 3 = non-convergence,
/// 4 = I/O or schema error.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    use hombif_core::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::NoConvergence { .. }) => 3,
        Some(Error::InvalidInput(_))
        | Some(Error::DimensionMismatch(_))
        | Some(Error::OutOfRegime { .. }) => 4,
        Some(_) => 2,
        None => 4,
    }
}

fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match (&cli.config, &cli.command) {
        // The worked example fixes the system; a config may still adjust
        // sampling and output.
        (None, Command::VerifyExample) | (None, Command::DumpConfig) => {
            RunConfig::for_system("paper_example_s7")
        }
        (None, _) => anyhow::bail!("--config is required for this command"),
        (Some(path), _) => load_config(path)?,
    };
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    if let Some(k) = cli.samples {
        config.k = k;
    }
    if let Some(eps) = &cli.eps {
        config.eps = eps.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let config = effective_config(cli)?;
    let emit = Emitter { quiet: cli.quiet };
    match cli.command {
        Command::Detect => commands::run_detect(&config, &emit),
        Command::Scan => commands::run_scan(&config, &emit),
        Command::Solve => commands::run_solve(&config, &emit),
        Command::VerifyExample => commands::run_verify_example(&config, &emit),
        Command::DumpConfig => commands::run_dump_config(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
