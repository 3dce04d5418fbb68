mod args;
mod bench;
mod generate;
mod output;
mod score;
mod tune;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use decorr::Error;

use args::{Cli, Command, ReplayArgs};

/// Exit codes: 0 success, 1 other failure, 2 invalid flags, 3 parse error,
/// 4 divergence, 5 no usable validation subset.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_)) => 2,
        Some(Error::Parse(_)) | Some(Error::NonFiniteInput { .. }) => 3,
        Some(Error::Divergence { .. }) | Some(Error::SelectionFailure(_)) => 4,
        Some(Error::NoValidSubset) | Some(Error::SingleClass { .. }) => 5,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate::run(a),
        Command::Score(a) => score::run(a),
        Command::Tune(a) => tune::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Replay(a) => replay(a),
    }
}

/// Re-runs the resolved command stored in a manifest.
fn replay(args: ReplayArgs) -> Result<()> {
    let manifest = output::read_manifest(&args.manifest)?;
    if manifest.version != output::VERSION {
        log::warn!(
            "manifest written by version {}, replaying with {}",
            manifest.version,
            output::VERSION
        );
    }
    let mut command = manifest.command;
    if let Some(out) = args.output {
        match &mut command {
            Command::Generate(a) => a.output = Some(out),
            Command::Score(a) => a.output = Some(out),
            Command::Tune(a) => a.output = Some(out),
            Command::Bench(a) => a.output = Some(out),
            Command::Replay(_) => {
                return Err(Error::Parse("manifest holds a replay command".into()).into())
            }
        }
    }
    dispatch(command)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
