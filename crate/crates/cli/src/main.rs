use std::path::PathBuf;
use std::process::ExitCode;

use budgetmech_cli::{parse_config, run_experiment, Action, EXIT_ERROR};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Run,
    Audit,
    Oracle,
    Compare,
}

impl From<Command> for Action {
    fn from(c: Command) -> Self {
        match c {
            Command::Run => Action::Run,
            Command::Audit => Action::Audit,
            Command::Oracle => Action::Oracle,
            Command::Compare => Action::Compare,
        }
    }
}

/// Run budget-constrained auction experiments from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "budgetmech", version)]
struct Cli {
    /// Overrides the config's action.
    #[arg(value_enum)]
    command: Option<Command>,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output`, then `results`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    if let Some(c) = cli.command {
        cfg.action = c.into();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    let out = cli
        .out
        .or_else(|| cfg.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    ExitCode::from(run_experiment(&cfg, &out) as u8)
}
