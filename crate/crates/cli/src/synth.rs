//! `mucond synth`: core-periphery test graphs.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use mucond::graph::write_edge_list;
use mucond::graphgen::{generate_core_periphery, write_coords_csv, SynthConfig};

use crate::input::{graph_sha256, sha256_hex};
use crate::manifest::{GraphInfo, ItemStatus, Manifest, ManifestItem, ManifestWriter, RunStatus};
use crate::output::{write_atomic, write_csv};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 537)]
    pub n: usize,

    #[arg(long, default_value_t = 2)]
    pub dim: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Edge list to write
    #[arg(long)]
    pub out: PathBuf,

    /// Also write point coordinates and core membership as CSV
    #[arg(long)]
    pub coords: Option<PathBuf>,

    /// Count each point among its own nearest neighbours
    #[arg(long)]
    pub self_in_neighborhood: bool,
}

pub fn run(args: &SynthArgs) -> Result<RunStatus> {
    let config = SynthConfig {
        n: args.n,
        dim: args.dim,
        seed: args.seed,
        self_in_neighborhood: args.self_in_neighborhood,
        ..SynthConfig::default()
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut manifest = Manifest::new("synth", None, serde_json::to_value(&config)?);
    manifest.items.push(ManifestItem::pending("generate"));
    if args.coords.is_some() {
        manifest.csv_schemas.insert("coords".into(), "mucond-coords/1".into());
    }
    let mut path = args.out.clone().into_os_string();
    path.push(".manifest.json");
    let writer = ManifestWriter::create_at(path.into(), manifest)?;

    let synth = generate_core_periphery(&config);
    writer.update(|m| {
        let synth = match &synth {
            Ok(s) => s,
            Err(e) => {
                m.items[0].status = ItemStatus::Failed;
                m.items[0].error = Some(e.to_string());
                return Ok(());
            }
        };
        let g = &synth.graph;
        let mut edges = Vec::new();
        write_edge_list(g, &mut edges)?;
        write_atomic(&args.out, &edges)?;
        let mut outputs = vec![args.out.display().to_string()];
        if let Some(c) = &args.coords {
            write_csv(c, |w| write_coords_csv(synth, w))?;
            outputs.push(c.display().to_string());
        }
        log::info!("wrote {}: n = {}, m = {}", args.out.display(), g.num_vertices(), g.num_edges());
        m.graph = Some(GraphInfo {
            path: args.out.clone(),
            sha256: sha256_hex(&edges),
            n: g.num_vertices(),
            m: g.num_edges(),
            volume: g.volume(),
            n_input: g.num_vertices(),
            lcc: false,
            edges_sha256: graph_sha256(g),
            core: None,
        });
        m.items[0].status = ItemStatus::Done;
        m.outputs = outputs;
        Ok(())
    })?;
    Ok(writer.finish()?.status)
}
