//! `mucond brute` and `mucond lambda2`: small-graph reference values,
//! printed as JSON on stdout.

use std::io::Write;

use anyhow::Result;
use clap::Args;
use mucond::eig::{lambda2, EigConfig};
use mucond::oracle::{brute_min_conductance, brute_mu_conductance};
use serde::Serialize;

use crate::input::GraphArgs;
use crate::output::to_json_bytes;

#[derive(Args, Debug)]
pub struct BruteArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    /// Volume fraction; without it the unrestricted minimum is computed
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Args, Debug)]
pub struct Lambda2Args {
    #[command(flatten)]
    pub graph: GraphArgs,

    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Serialize)]
struct BruteOutput {
    mu: Option<f64>,
    phi: f64,
    /// Vertex labels as they appear in the input.
    argmin_set: Vec<u64>,
    volume: f64,
    feasible_count: u64,
    visited: u64,
}

#[derive(Serialize)]
struct Lambda2Output {
    lambda2: f64,
    /// `lambda2 / 2`, a lower bound on the minimum conductance.
    bound_point: f64,
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(&to_json_bytes(value)?)?;
    out.flush()?;
    Ok(())
}

pub fn run_brute(args: &BruteArgs) -> Result<()> {
    let input = args.graph.load(args.graph.lcc)?;
    let g = &input.loaded.graph;
    let r = match args.mu {
        Some(mu) => brute_mu_conductance(g, mu)?,
        None => brute_min_conductance(g)?,
    };
    let mut argmin_set: Vec<u64> = r.argmin_set.members().iter().map(|&v| input.loaded.labels[v]).collect();
    argmin_set.sort_unstable();
    emit(&BruteOutput {
        mu: args.mu,
        phi: r.phi_mu,
        argmin_set,
        volume: r.argmin_set.volume(),
        feasible_count: r.feasible_count,
        visited: r.visited,
    })
}

pub fn run_lambda2(args: &Lambda2Args) -> Result<()> {
    let input = args.graph.load(args.graph.lcc)?;
    let cfg = EigConfig {
        tol: args.tol,
        ..EigConfig::default()
    };
    let l2 = lambda2(&input.loaded.graph, &cfg)?;
    emit(&Lambda2Output {
        lambda2: l2,
        bound_point: l2 / 2.0,
    })
}
