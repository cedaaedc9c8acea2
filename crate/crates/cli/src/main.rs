//! `lwi`: build feature frames from MBO events, screen features, evaluate
//! forecasters and run stationarity diagnostics.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "lwi", version, about = "Liquidity withdrawal forecasting pipeline")]
struct Cli {
    /// TOML run description; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Parse events, rebuild books, resample and write feature frames.
    Build,
    /// Rank features per symbol and write the cross-symbol consensus.
    Screen,
    /// Walk-forward evaluation of the configured models.
    Eval,
    /// ADF and ACF/PACF of each symbol's LWI series.
    Diag,
    /// Write seeded synthetic event files for every configured symbol.
    Synth,
    /// Print the default configuration.
    Defaults,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.command == Command::Defaults {
        print!("{}", RunConfig::default().to_toml());
        return Ok(());
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::internal(e.to_string()))?;
    }
    cfg.validate(cli.command == Command::Build)?;
    match cli.command {
        Command::Build => commands::build(&cfg),
        Command::Screen => commands::screen(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Diag => commands::diag(&cfg),
        Command::Synth => commands::synth(&cfg),
        Command::Defaults => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LWI_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    // Panics are invariant breaches; report them with their own exit code.
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}
