use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use evlearn_cli::{emit, Cmd, Config, UsageError};

#[derive(Parser, Debug)]
#[command(
    name = "evlearn",
    version,
    about = "Learning on the angles of extreme observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra key=value settings, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every random choice; overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; companions such as `<name>.summary.csv` go next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let keys = cli.command.keys();
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p, &keys).map_err(|e| Failure::Usage(e.0))?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        cfg.set(o, &keys).map_err(|e| Failure::Usage(e.0))?;
    }
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg
            .parse_or("seed", 0u64)
            .map_err(|e| Failure::Usage(e.0))?,
    };
    if let Some(t) = cli.threads {
        set_threads(t)?;
    }
    let output = cli.command.run(&cfg, seed).map_err(classify)?;
    emit(&output, cli.out.as_deref()).map_err(Failure::Runtime)
}

fn classify(e: anyhow::Error) -> Failure {
    match e.downcast::<UsageError>() {
        Ok(u) => Failure::Usage(u.0),
        Err(e) => Failure::Runtime(e),
    }
}

#[cfg(feature = "parallel")]
fn set_threads(t: usize) -> Result<(), Failure> {
    if t == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(t)
        .build_global()
        .map_err(|e| Failure::Runtime(e.into()))
}

#[cfg(not(feature = "parallel"))]
fn set_threads(t: usize) -> Result<(), Failure> {
    if t == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
