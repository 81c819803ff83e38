//! Run manifests: what was run, on which input, with which settings, and how
//! each work item ended. Written before any heavy work and rewritten after
//! every item, so an interrupted run leaves a valid partial manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::output::write_json;

pub const MANIFEST_SCHEMA: &str = "mucond-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Success,
    Partial,
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success | RunStatus::Running => 0,
            RunStatus::Partial => 2,
            RunStatus::Failed => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemStatus {
    Pending,
    /// Finished with a certified result.
    Certified,
    /// Finished, but some component did not converge.
    Heuristic,
    /// Finished; the item has no certification notion.
    Done,
    /// Nothing to do (for example an empty k-core).
    Empty,
    Failed,
}

impl ItemStatus {
    fn failed(self) -> bool {
        self == ItemStatus::Failed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub path: PathBuf,
    pub sha256: String,
    pub n: usize,
    pub m: usize,
    pub volume: f64,
    /// Vertices in the file before any component extraction.
    pub n_input: usize,
    pub lcc: bool,
    /// Hash of the analysed graph written as a canonical edge list.
    pub edges_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub core: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    pub status: ItemStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(default)]
    pub timings: BTreeMap<String, f64>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl ManifestItem {
    pub fn pending(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            status: ItemStatus::Pending,
            error: None,
            timings: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub graph: Option<GraphInfo>,
    pub config: serde_json::Value,
    pub status: RunStatus,
    pub items: Vec<ManifestItem>,
    /// Files produced by the run as a whole, relative to the output directory.
    pub outputs: Vec<String>,
    /// Schema tag of every CSV output, keyed by file name.
    pub csv_schemas: BTreeMap<String, String>,
    pub wall_seconds: f64,
}

impl Manifest {
    pub fn new(command: &str, graph: Option<GraphInfo>, config: serde_json::Value) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: std::env::args().collect(),
            graph,
            config,
            status: RunStatus::Running,
            items: Vec::new(),
            outputs: Vec::new(),
            csv_schemas: BTreeMap::new(),
            wall_seconds: 0.0,
        }
    }

    pub fn load(path: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Success when nothing failed, failure when every non-empty item
    /// failed, partial otherwise.
    pub fn summarize(&mut self) -> RunStatus {
        let relevant: Vec<&ManifestItem> =
            self.items.iter().filter(|i| i.status != ItemStatus::Empty).collect();
        let failed = relevant.iter().filter(|i| i.status.failed() || i.status == ItemStatus::Pending).count();
        self.status = if failed == 0 {
            RunStatus::Success
        } else if failed == relevant.len() {
            RunStatus::Failed
        } else {
            RunStatus::Partial
        };
        self.status
    }
}

/// A manifest on disk, shared between workers; every update rewrites it.
pub struct ManifestWriter {
    path: PathBuf,
    inner: Mutex<Manifest>,
    started: Instant,
}

impl ManifestWriter {
    pub fn create(dir: &Path, manifest: Manifest) -> Result<Self> {
        Self::create_at(dir.join(MANIFEST_FILE), manifest)
    }

    pub fn create_at(path: PathBuf, manifest: Manifest) -> Result<Self> {
        let w = Self {
            path,
            inner: Mutex::new(manifest),
            started: Instant::now(),
        };
        w.update(|_| Ok(()))?;
        Ok(w)
    }

    /// Applies `f` and persists the result while holding the lock, so file
    /// writes done inside `f` never interleave.
    pub fn update<T>(&self, f: impl FnOnce(&mut Manifest) -> Result<T>) -> Result<T> {
        let mut m = self.inner.lock().expect("manifest lock poisoned");
        let out = f(&mut m)?;
        m.wall_seconds = self.started.elapsed().as_secs_f64();
        write_json(&self.path, &*m)?;
        Ok(out)
    }

    pub fn finish(self) -> Result<Manifest> {
        let status = self.update(|m| Ok(m.summarize()))?;
        log::info!("run finished: {status:?}");
        Ok(self.inner.into_inner().expect("manifest lock poisoned"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(status: ItemStatus) -> ManifestItem {
        ManifestItem {
            status,
            ..ManifestItem::pending("x")
        }
    }

    #[test]
    fn status_rules() {
        let mut m = Manifest::new("t", None, serde_json::Value::Null);
        m.items = vec![item(ItemStatus::Certified), item(ItemStatus::Heuristic)];
        assert_eq!(m.summarize(), RunStatus::Success);
        m.items.push(item(ItemStatus::Failed));
        assert_eq!(m.summarize(), RunStatus::Partial);
        m.items = vec![item(ItemStatus::Failed), item(ItemStatus::Empty)];
        assert_eq!(m.summarize(), RunStatus::Failed);
        assert_eq!(RunStatus::Partial.exit_code(), 2);
    }

    #[test]
    fn round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("bound", None, serde_json::json!({"a": 1}));
        m.items.push(ManifestItem::pending("mu=1e-2,k=5"));
        let w = ManifestWriter::create(dir.path(), m).unwrap();
        w.update(|m| {
            m.items[0].status = ItemStatus::Certified;
            Ok(())
        })
        .unwrap();
        let on_disk = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(on_disk.items[0].status, ItemStatus::Certified);
        assert_eq!(on_disk.status, RunStatus::Running);
        let done = w.finish().unwrap();
        assert_eq!(done.status, RunStatus::Success);
    }
}
