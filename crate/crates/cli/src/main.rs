use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use loopres_cli::{parse_config_with, run, Command, ConfigError, Options, RunError};

/// Coupled-mode and FDTD analysis of three loop-coupled microresonators.
///
/// Usage: `loopres [COMMAND] CONFIG`. A command given here overrides the
/// config's `command` key. Commands: spectrum, phase-sweep, average, eigen,
/// periodicity, taylor, sense-particle, sense-slab, fdtd-run, fdtd-sweep.
///
/// Exit codes: 0 ok, 1 I/O error, 2 config error, 3 numerical error,
/// 4 unconverged FDTD run.
#[derive(Parser, Debug)]
#[command(name = "loopres", version)]
struct Cli {
    /// `[COMMAND] CONFIG`
    #[arg(num_args = 1..=2, required = true, value_name = "ARGS")]
    args: Vec<String>,

    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Worker threads for sweeps and FDTD.
    #[arg(long)]
    threads: Option<usize>,

    /// One thread, serial FDTD updates.
    #[arg(long)]
    serial: bool,

    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn fail(e: &RunError) -> ExitCode {
    let line = e.line().map(|l| l.to_string()).unwrap_or_else(|| "-".into());
    eprintln!(
        "loopres: error kind={} code={} line={} message={:?}",
        e.kind(),
        e.exit_code(),
        line,
        e.message()
    );
    ExitCode::from(e.exit_code() as u8)
}

fn config_error(message: String) -> RunError {
    RunError::Config(ConfigError { line: None, message })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, path) = match cli.args.as_slice() {
        [path] => (None, path),
        [cmd, path] => match cmd.parse::<Command>() {
            Ok(c) => (Some(c), path),
            Err(m) => return fail(&config_error(m)),
        },
        _ => unreachable!("clap enforces one or two arguments"),
    };

    let threads = if cli.serial { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        if n == 0 {
            return fail(&config_error("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&RunError::Io(e.to_string()));
        }
    }

    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(&config_error(format!("cannot read {path}: {e}"))),
    };
    let config = match parse_config_with(&text, command) {
        Ok(c) => c,
        Err(e) => return fail(&RunError::Config(e)),
    };
    let opts = Options {
        output: cli.output,
        serial: cli.serial,
    };
    match run(&config, &opts) {
        Ok(report) => {
            if !cli.quiet {
                for line in &report.lines {
                    println!("{line}");
                }
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
            }
            if report.unconverged.is_empty() {
                ExitCode::SUCCESS
            } else {
                let list: Vec<String> = report.unconverged.iter().map(|w| w.to_string()).collect();
                eprintln!(
                    "loopres: error kind=unconverged code=4 line=- message={:?}",
                    format!("flux not stationary at {} nm", list.join(", "))
                );
                ExitCode::from(4)
            }
        }
        Err(e) => fail(&e),
    }
}
