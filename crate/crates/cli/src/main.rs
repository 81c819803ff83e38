mod bound;
mod config;
mod input;
mod kcore;
mod manifest;
mod ncp;
mod output;
mod probe;
mod synth;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use manifest::RunStatus;

/// Certified lower bounds and empirical profiles of graph conductance.
#[derive(Parser, Debug)]
#[command(name = "mucond", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lower bounds on mu-conductance over a (mu, k) grid
    Bound(bound::BoundArgs),
    /// Sampled community profile from PageRank sweeps
    Ncp(ncp::NcpArgs),
    /// Bound and profile runs on k-cores
    Kcore(kcore::KcoreArgs),
    /// Generate a core-periphery nearest-neighbour graph
    Synth(synth::SynthArgs),
    /// Exact mu-conductance by enumeration (small graphs)
    Brute(probe::BruteArgs),
    /// Spectral gap and the Cheeger lower bound
    Lambda2(probe::Lambda2Args),
}

fn threads(cmd: &Command) -> Option<usize> {
    match cmd {
        Command::Bound(a) => a.common.threads,
        Command::Ncp(a) => a.common.threads,
        Command::Kcore(a) => a.common.threads,
        _ => None,
    }
}

fn dispatch(cmd: &Command) -> Result<RunStatus> {
    match cmd {
        Command::Bound(a) => bound::run(a),
        Command::Ncp(a) => ncp::run(a),
        Command::Kcore(a) => kcore::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Brute(a) => probe::run_brute(a).map(|_| RunStatus::Success),
        Command::Lambda2(a) => probe::run_lambda2(a).map(|_| RunStatus::Success),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = threads(&cli.command) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match dispatch(&cli.command) {
        Ok(status) => {
            if status != RunStatus::Success {
                log::warn!("run status: {status:?}");
            }
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
