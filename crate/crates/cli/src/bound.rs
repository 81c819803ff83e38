//! `mucond bound`: certified lower bounds over a (mu, k) grid.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use mucond::certify::{certify_mu, profile_from_bounds, write_envelope_csv, CertifiedBound};
use mucond::graph::Graph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BoundFlags, BoundSettings, CommonFlags, FileConfig};
use crate::input::GraphArgs;
use crate::manifest::{GraphInfo, ItemStatus, Manifest, ManifestItem, ManifestWriter, RunStatus, MANIFEST_FILE};
use crate::output::{write_csv, write_json};

pub const BOUND_SCHEMA: &str = "mucond-bound/1";
pub const ENVELOPE_FILE: &str = "envelope.csv";
pub const ENVELOPE_SCHEMA: &str = "mucond-envelope/1";

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    #[command(flatten)]
    pub bound: BoundFlags,

    #[command(flatten)]
    pub common: CommonFlags,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,

    /// Skip (mu, k) items already finished by an earlier run with the same
    /// input and settings
    #[arg(long)]
    pub resume: bool,
}

/// Graph identity recorded in every result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub m: usize,
    pub volume: f64,
    pub edges_sha256: String,
}

impl From<&GraphInfo> for GraphSummary {
    fn from(info: &GraphInfo) -> Self {
        Self {
            n: info.n,
            m: info.m,
            volume: info.volume,
            edges_sha256: info.edges_sha256.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundFile {
    pub schema: String,
    pub graph: GraphSummary,
    pub bound: CertifiedBound,
}

pub fn bound_file_name(mu: f64, k: usize) -> String {
    format!("bound_mu{mu:e}_k{k}.json")
}

fn item_id(mu: f64, k: usize) -> String {
    format!("mu={mu:e},k={k}")
}

pub fn run(args: &BoundArgs) -> Result<RunStatus> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let settings = args.bound.apply(file.bound)?;
    let input = args.graph.load(args.graph.lcc || file.lcc.unwrap_or(false))?;
    run_on(&input.loaded.graph, input.info, &settings, &args.out_dir, args.resume)
}

/// Items of an earlier manifest that can be reused as they are.
fn reusable(dir: &Path, info: &GraphInfo, config: &serde_json::Value) -> Vec<String> {
    let Some(old) = Manifest::load(&dir.join(MANIFEST_FILE)) else {
        return Vec::new();
    };
    if old.command != "bound" || old.graph.as_ref() != Some(info) || &old.config != config {
        log::info!("earlier manifest does not match this run; recomputing everything");
        return Vec::new();
    }
    old.items
        .into_iter()
        .filter(|i| matches!(i.status, ItemStatus::Certified | ItemStatus::Heuristic))
        .map(|i| i.id)
        .collect()
}

fn load_bound(path: &Path, info: &GraphInfo) -> Option<CertifiedBound> {
    let text = std::fs::read_to_string(path).ok()?;
    let f: BoundFile = serde_json::from_str(&text).ok()?;
    (f.schema == BOUND_SCHEMA && f.graph == GraphSummary::from(info)).then_some(f.bound)
}

/// Runs the grid on `graph` and writes results into `dir`.
pub fn run_on(
    graph: &Graph,
    info: GraphInfo,
    settings: &BoundSettings,
    dir: &Path,
    resume: bool,
) -> Result<RunStatus> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let config = serde_json::to_value(settings)?;
    let done = if resume { reusable(dir, &info, &config) } else { Vec::new() };

    let jobs: Vec<(f64, usize)> = settings
        .mu_list
        .iter()
        .flat_map(|&mu| settings.ks.iter().map(move |&k| (mu, k)))
        .collect();
    let mut manifest = Manifest::new("bound", Some(info.clone()), config);
    manifest.items = jobs.iter().map(|&(mu, k)| ManifestItem::pending(item_id(mu, k))).collect();
    manifest.csv_schemas.insert(ENVELOPE_FILE.into(), ENVELOPE_SCHEMA.into());
    let writer = ManifestWriter::create(dir, manifest)?;
    let summary = GraphSummary::from(&info);
    let certify = settings.certify_config();

    let results: Vec<Option<CertifiedBound>> = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(mu, k))| {
            let id = item_id(mu, k);
            let name = bound_file_name(mu, k);
            let path = dir.join(&name);
            if done.contains(&id) {
                if let Some(b) = load_bound(&path, &info) {
                    log::info!("{id}: reusing {name}");
                    let status = if b.certified { ItemStatus::Certified } else { ItemStatus::Heuristic };
                    let _ = writer.update(|m| {
                        let item = &mut m.items[idx];
                        item.status = status;
                        item.outputs = vec![name.clone()];
                        item.timings.insert("reused".into(), 1.0);
                        Ok(())
                    });
                    return Some(b);
                }
            }
            let t0 = Instant::now();
            let outcome = certify_mu(graph, mu, k, &certify);
            let elapsed = t0.elapsed().as_secs_f64();
            let saved = writer.update(|m| {
                let item = &mut m.items[idx];
                item.timings.insert("wall_seconds".into(), elapsed);
                match &outcome {
                    Ok((_, b)) => {
                        write_json(
                            &path,
                            &BoundFile {
                                schema: BOUND_SCHEMA.into(),
                                graph: summary.clone(),
                                bound: b.clone(),
                            },
                        )?;
                        item.status = if b.certified { ItemStatus::Certified } else { ItemStatus::Heuristic };
                        item.error = None;
                        item.outputs = vec![name.clone()];
                        item.timings.insert("alm_seconds".into(), b.timings.alm_seconds);
                        item.timings.insert("eig_seconds".into(), b.timings.eig_seconds);
                    }
                    Err(e) => {
                        item.status = ItemStatus::Failed;
                        item.error = Some(e.to_string());
                    }
                }
                Ok(())
            });
            match (outcome, saved) {
                (Ok((_, b)), Ok(())) => {
                    log::info!(
                        "{id}: bound {:.6e} theta {:.2e} certified {} ({elapsed:.2} s)",
                        b.bound,
                        b.theta,
                        b.certified
                    );
                    Some(b)
                }
                (Err(e), _) => {
                    log::error!("{id}: {e}");
                    None
                }
                (_, Err(e)) => {
                    log::error!("{id}: could not save result: {e:#}");
                    None
                }
            }
        })
        .collect();

    let bounds: Vec<CertifiedBound> = results.into_iter().flatten().collect();
    let envelope = profile_from_bounds(&bounds, settings.include_heuristic)?;
    writer.update(|m| {
        write_csv(&dir.join(ENVELOPE_FILE), |w| write_envelope_csv(&envelope, w))?;
        m.outputs = vec![ENVELOPE_FILE.into()];
        Ok(())
    })?;
    Ok(writer.finish()?.status)
}
