//! `qergo`: batch front end for the numerical experiments.

mod commands;
mod config;
mod output;

use clap::{CommandFactory, FromArgMatches, Parser};
use commands::{Command, NAMES};
use output::RunInfo;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Environment variable holding the default thread cap.
const THREADS_ENV: &str = "QERGO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qergo", version, about = "Numerical experiments on mushroom billiards, KAM systems and eigenvalue flows")]
struct Cli {
    /// key = value file with defaults for the subcommand flags; flags on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for <subcommand>.csv and <subcommand>.meta.json.
    #[arg(long, global = true, default_value = "qergo-out")]
    out: PathBuf,
    /// Validate parameters and exit without computing.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Thread cap for all parallel work (default: $QERGO_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also print the result table to stdout.
    #[arg(long, global = true)]
    print: bool,
    #[command(subcommand)]
    command: Command,
}

fn thread_cap(flag: Option<usize>) -> Result<Option<usize>, String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|e| format!("{THREADS_ENV}={v:?}: {e}"))?),
            Err(_) => None,
        },
    };
    match n {
        Some(0) => Err("thread cap must be at least 1".into()),
        n => Ok(n),
    }
}

fn run(cli: Cli) -> Result<(), String> {
    let cap = thread_cap(cli.threads)?;
    if let Some(n) = cap {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let name = cli.command.name();
    let job = cli.command.prepare().map_err(|e| format!("{name}: {e}"))?;
    if cli.dry_run {
        println!("{name}: parameters valid (dry run, nothing computed)");
        return Ok(());
    }
    let start = Instant::now();
    let outcome = job().map_err(|e| format!("{name}: {e}"))?;
    let info = RunInfo {
        subcommand: name,
        params: cli.command.params(),
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let (table, meta) = output::write_outputs(&cli.out, &info, &outcome)?;
    if cli.print {
        let csv = outcome.table.to_csv()?;
        print!("{}", String::from_utf8_lossy(&csv));
    }
    eprintln!("wrote {} and {}", table.display(), meta.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = match config::splice_config(std::env::args().collect(), &NAMES) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let matches = match cmd.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
