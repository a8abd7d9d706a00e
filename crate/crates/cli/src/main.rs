use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hardcore::glauber::parse_seed;
use hardcore_cli::{render, run, CliError, Command, Format};

#[derive(Debug, Parser)]
#[command(name = "hardcore", version, about = "Hardcore-model experiments")]
struct Cli {
    /// 64-bit seed, decimal or 0x-hex; required by randomised commands.
    #[arg(long, global = true, value_parser = seed_arg)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

fn seed_arg(s: &str) -> Result<u64, String> {
    parse_seed(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let outcome = run(&cli.command, cli.seed)?;
    let text = render(&outcome, cli.format)?;
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{text}"),
    }
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    let failures = outcome.record.result["failures"]
        .as_array()
        .map_or(0, Vec::len);
    eprintln!(
        "{}: {}",
        outcome.record.command,
        if outcome.passed {
            "PASS".to_string()
        } else {
            format!("FAIL ({failures} failures)")
        }
    );
    Ok(outcome.passed)
}
