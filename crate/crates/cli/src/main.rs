use std::panic;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};

mod args;
mod commands;

use args::{Cli, Command};

pub(crate) enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<persyn::Error> for Failure {
    fn from(e: persyn::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    panic::set_hook(Box::new(|_| {}));
    let outcome = panic::catch_unwind(|| match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Scalemap(a) => commands::scalemap(a),
        Command::Bench(a) => commands::bench(a),
    });
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(msg))) => {
            eprintln!("error: {msg}\n");
            let name = match &cli.command {
                Command::Synth(_) => "synth",
                Command::Scalemap(_) => "scalemap",
                Command::Bench(_) => "bench",
            };
            let mut cmd = Cli::command();
            cmd.build();
            if let Some(sub) = cmd.find_subcommand_mut(name) {
                eprintln!("{}", sub.render_usage());
            }
            ExitCode::from(2)
        }
        Ok(Err(Failure::Runtime(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("unknown failure");
            eprintln!("error: internal failure: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PERSYN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PERSYN_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot size worker pool: {e}"))
}
