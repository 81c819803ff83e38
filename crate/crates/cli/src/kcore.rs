//! `mucond kcore`: bound and profile runs on k-cores of the input.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use mucond::graph::largest_connected_component;
use mucond::graphgen::{core_numbers, k_core_subgraph};
use mucond::Error;

use crate::config::{BoundFlags, CommonFlags, FileConfig, NcpFlags};
use crate::input::{graph_sha256, GraphArgs};
use crate::manifest::{GraphInfo, ItemStatus, Manifest, ManifestItem, ManifestWriter, RunStatus};

#[derive(Args, Debug)]
pub struct KcoreArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    /// Comma-separated core orders
    #[arg(long, value_delimiter = ',', required = true)]
    pub k_list: Vec<usize>,

    #[command(flatten)]
    pub bound: BoundFlags,

    #[command(flatten)]
    pub ncp: NcpFlags,

    #[command(flatten)]
    pub common: CommonFlags,

    #[arg(long)]
    pub skip_bound: bool,

    #[arg(long)]
    pub skip_ncp: bool,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

fn merge(a: RunStatus, b: RunStatus) -> ItemStatus {
    match (a, b) {
        (RunStatus::Failed, _) | (_, RunStatus::Failed) => ItemStatus::Failed,
        _ => ItemStatus::Done,
    }
}

pub fn run(args: &KcoreArgs) -> Result<RunStatus> {
    if args.k_list.contains(&0) {
        bail!("core orders must be at least 1");
    }
    let file = FileConfig::load(args.common.config.as_deref())?;
    let bound_settings = args.bound.apply(file.bound.clone())?;
    let input = args.graph.load(args.graph.lcc || file.lcc.unwrap_or(false))?;
    let graph = &input.loaded.graph;
    let labels = &input.loaded.labels;
    let cores = core_numbers(graph);
    log::info!("max core order {}", cores.max_core);

    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut manifest = Manifest::new(
        "kcore",
        Some(input.info.clone()),
        serde_json::json!({ "k_list": args.k_list, "max_core": cores.max_core }),
    );
    manifest.items = args.k_list.iter().map(|k| ManifestItem::pending(format!("core{k}"))).collect();
    let writer = ManifestWriter::create(&args.out_dir, manifest)?;

    for (idx, &k) in args.k_list.iter().enumerate() {
        let outcome = (|| -> Result<Option<ItemStatus>> {
            let (core, map) = match k_core_subgraph(graph, k) {
                Ok(c) => c,
                Err(Error::EmptyCore { .. }) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            let (core, inner) = largest_connected_component(&core)?;
            let core_labels: Vec<u64> = inner.iter().map(|&i| labels[map[i]]).collect();
            log::info!(
                "core {k}: n = {}, m = {} (largest component)",
                core.num_vertices(),
                core.num_edges()
            );
            let info = GraphInfo {
                n: core.num_vertices(),
                m: core.num_edges(),
                volume: core.volume(),
                edges_sha256: graph_sha256(&core),
                core: Some(k),
                ..input.info.clone()
            };
            let dir = args.out_dir.join(format!("core{k}"));
            let b = if args.skip_bound {
                RunStatus::Success
            } else {
                crate::bound::run_on(&core, info.clone(), &bound_settings, &dir.join("bound"), false)?
            };
            let n = if args.skip_ncp {
                RunStatus::Success
            } else {
                let ncp_settings = args.ncp.apply(file.ncp.clone(), &core_labels)?;
                let envelope = dir.join("bound").join(crate::bound::ENVELOPE_FILE);
                let bounds = (!args.skip_bound).then_some(envelope);
                crate::ncp::run_on(&core, &core_labels, info, &ncp_settings, bounds.as_deref(), &dir.join("ncp"))?
            };
            Ok(Some(merge(b, n)))
        })();
        writer.update(|m| {
            let item = &mut m.items[idx];
            match outcome {
                Ok(None) => {
                    log::warn!("core {k} is empty (max core {})", cores.max_core);
                    item.status = ItemStatus::Empty;
                }
                Ok(Some(s)) => {
                    item.status = s;
                    item.outputs = vec![format!("core{k}")];
                }
                Err(e) => {
                    log::error!("core {k}: {e:#}");
                    item.status = ItemStatus::Failed;
                    item.error = Some(format!("{e:#}"));
                }
            }
            Ok(())
        })?;
    }
    Ok(writer.finish()?.status)
}
