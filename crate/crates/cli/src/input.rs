//! Graph loading shared by every command.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mucond::graph::{load_edge_list, write_edge_list, EdgeListOptions, EdgeSemantics, Graph, LoadedGraph};
use sha2::{Digest, Sha256};

use crate::manifest::GraphInfo;

#[derive(Args, Clone, Debug)]
pub struct GraphArgs {
    /// Edge list: one `u v [w]` per line, `#` and `%` comments
    pub graph: PathBuf,

    /// Restrict to the largest connected component
    #[arg(long)]
    pub lcc: bool,

    /// Read a third column as the edge weight
    #[arg(long)]
    pub weighted: bool,

    /// Vertex ids in the file start at 1
    #[arg(long)]
    pub one_indexed: bool,

    /// The file lists every edge in both directions
    #[arg(long)]
    pub symmetric_arcs: bool,
}

/// A loaded graph with its provenance.
pub struct Input {
    pub loaded: LoadedGraph,
    pub info: GraphInfo,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the graph written by `write_edge_list`, independent of how the
/// input file was laid out.
pub fn graph_sha256(graph: &Graph) -> String {
    let mut buf = Vec::new();
    write_edge_list(graph, &mut buf).expect("writing to memory");
    sha256_hex(&buf)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl GraphArgs {
    fn options(&self) -> EdgeListOptions {
        EdgeListOptions {
            zero_indexed: !self.one_indexed,
            weighted: self.weighted,
            semantics: if self.symmetric_arcs {
                EdgeSemantics::SymmetricArcs
            } else {
                EdgeSemantics::Undirected
            },
            ..Default::default()
        }
    }

    /// Loads the graph; without `--lcc` a disconnected graph is an error.
    pub fn load(&self, lcc: bool) -> Result<Input> {
        let sha256 = file_sha256(&self.graph)?;
        let loaded = load_edge_list(&self.graph, &self.options())?;
        let n_input = loaded.graph.num_vertices();
        let loaded = if lcc {
            loaded.largest_component()?
        } else {
            if !loaded.graph.is_connected() {
                bail!(
                    "{} is disconnected ({} components); rerun with --lcc to use the largest connected component",
                    self.graph.display(),
                    loaded.graph.connected_components().len()
                );
            }
            loaded
        };
        let g = &loaded.graph;
        log::info!(
            "loaded {}: n = {}, m = {}, Vol = {}",
            self.graph.display(),
            g.num_vertices(),
            g.num_edges(),
            g.volume()
        );
        let info = GraphInfo {
            path: self.graph.clone(),
            sha256,
            n: g.num_vertices(),
            m: g.num_edges(),
            volume: g.volume(),
            n_input,
            lcc,
            edges_sha256: graph_sha256(g),
            core: None,
        };
        Ok(Input { loaded, info })
    }
}
