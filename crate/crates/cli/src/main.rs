// `!(x > 0)` is how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use commands::Ctx;
use config::Config;
use error::CliError;

/// Slow-loading rate-independent systems: runs, sweeps, jump costs and verdicts.
#[derive(Parser)]
#[command(name = "slowload", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for the randomized optimizer starts (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps and cost solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run of the incremental scheme.
    Run,
    /// Runs over the configured list of epsilons.
    Sweep,
    /// Jump cost between two states.
    Cost,
    /// Limit path, jumps, stability and energy balance of a sweep.
    Verdict,
    /// Tidy long-format CSV from a CSV artifact or a directory of them.
    Plotdata { artifact: PathBuf },
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config {
                field: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config {
                field: "--threads".into(),
                message: e.to_string(),
            })?;
    }
    if let Command::Plotdata { artifact } = &cli.command {
        return commands::plotdata(&cli.out, artifact);
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config {
        field: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let config = Config::load(path)?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let ctx = Ctx {
        config,
        out: cli.out.clone(),
        seed,
    };
    match cli.command {
        Command::Run => commands::run(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Cost => commands::cost(&ctx),
        Command::Verdict => commands::verdict(&ctx),
        Command::Plotdata { .. } => unreachable!(),
    }
}

fn report(err: &CliError) {
    let (kind, field) = match err {
        CliError::Config { field, .. } => ("config", Some(field.as_str())),
        CliError::Solver(_) => ("solver", None),
        CliError::Io { .. } => ("io", None),
        CliError::VerdictFail => ("verdict", None),
    };
    let msg = serde_json::json!({
        "error": kind,
        "field": field,
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    });
    eprintln!("{msg}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    std::panic::set_hook(Box::new(|_| {}));
    let result = std::panic::catch_unwind(|| execute(&cli)).unwrap_or_else(|p| {
        let what = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "internal error".into());
        Err(CliError::Solver(slowload::Error::Other(what)))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
