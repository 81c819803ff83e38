//! Undirected weighted graphs in compressed sparse row form, together with the
//! set functions (volume, boundary, conductance) and Laplacian products that
//! everything else is built on.
//!
//! The Laplacian is never stored: `L x = D x - A x` is applied row by row in
//! vertex order, so every product has a fixed summation order and is
//! reproducible bit for bit.

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Immutable symmetric sparse graph with cached degrees and total volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    volume: f64,
}

impl Graph {
    /// Builds a graph on `n` vertices from undirected edges.
    ///
    /// Both arcs are stored for every edge, repeated edges have their weights
    /// summed, self-loops and zero-weight edges are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut arcs = Vec::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            if u == v || w == 0.0 {
                continue;
            }
            arcs.push((u, v, w));
            arcs.push((v, u, w));
        }
        Ok(Self::from_sorted_arcs(n, merge_arcs(arcs)))
    }

    /// Unweighted convenience constructor.
    pub fn from_unweighted<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_edges(n, edges.into_iter().map(|(u, v)| (u, v, 1.0)))
    }

    /// `arcs` must be symmetric, sorted by (source, target) and free of duplicates.
    fn from_sorted_arcs(n: usize, arcs: Vec<(usize, usize, f64)>) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(u, _, _) in &arcs {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<usize> = arcs.iter().map(|a| a.1).collect();
        let weights: Vec<f64> = arcs.iter().map(|a| a.2).collect();
        let degrees: Vec<f64> = (0..n)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        let volume = degrees.iter().sum();
        Self {
            offsets,
            targets,
            weights,
            degrees,
            volume,
        }
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges (half the stored arcs).
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// Weighted degree vector `d = A 1`.
    #[inline]
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    #[inline]
    pub fn degree(&self, v: usize) -> f64 {
        self.degrees[v]
    }

    /// Number of neighbours, ignoring weights.
    #[inline]
    pub fn neighbor_count(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// `Vol(G)`, the sum of all degrees.
    #[inline]
    pub fn volume(&self) -> f64 {
        self.volume
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    /// Weight of edge `{u, v}`, zero when absent.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let r = self.offsets[u]..self.offsets[u + 1];
        match self.targets[r.clone()].binary_search(&v) {
            Ok(p) => self.weights[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_vertices()).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, w)| (u, v, w))
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_vertices() {
            return Err(Error::Dimension {
                expected: self.num_vertices(),
                got: len,
            });
        }
        Ok(())
    }

    /// `out = L x`, no allocation, no dimension check.
    pub fn laplacian_apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.degrees[i] * x[i];
            for (j, w) in self.neighbors(i) {
                acc -= w * x[j];
            }
            *o = acc;
        }
    }

    /// `out = L Y` for a row-major `n x k` block.
    pub fn laplacian_apply_block(&self, y: &DenseMatrix, out: &mut DenseMatrix) {
        let k = y.cols();
        for i in 0..self.num_vertices() {
            let row = out.row_mut(i);
            let di = self.degrees[i];
            for (o, &yi) in row.iter_mut().zip(y.row(i)) {
                *o = di * yi;
            }
            for (j, w) in self.neighbors(i) {
                let yj = y.row(j);
                for c in 0..k {
                    row[c] -= w * yj[c];
                }
            }
        }
    }

    pub fn laplacian_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.laplacian_apply(x, &mut out);
        Ok(out)
    }

    /// `x^T L x`, evaluated as a sum over undirected edges so it is exactly
    /// nonnegative.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        Ok(self
            .edges()
            .map(|(u, v, w)| {
                let diff = x[u] - x[v];
                w * diff * diff
            })
            .sum())
    }

    /// Induced subgraph on `keep` (any order, no duplicates). Returns the
    /// subgraph and the new-to-old id map, which is `keep` sorted.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<(Graph, Vec<usize>)> {
        let n = self.num_vertices();
        let mut map: Vec<usize> = keep.to_vec();
        map.sort_unstable();
        if map.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate vertex in subgraph".into()));
        }
        if map.last().is_some_and(|&v| v >= n) {
            return Err(Error::Validation("subgraph vertex out of range".into()));
        }
        let mut new_id = vec![usize::MAX; n];
        for (new, &old) in map.iter().enumerate() {
            new_id[old] = new;
        }
        let mut arcs = Vec::new();
        for (new, &old) in map.iter().enumerate() {
            for (j, w) in self.neighbors(old) {
                if new_id[j] != usize::MAX {
                    arcs.push((new, new_id[j], w));
                }
            }
        }
        // arcs are already sorted by source; targets keep their relative order
        // because the relabelling is monotone.
        Ok((Graph::from_sorted_arcs(map.len(), arcs), map))
    }

    /// Connected components as sorted vertex lists, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for (v, _) in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.num_vertices() > 0 && self.connected_components().len() == 1
    }
}

fn merge_arcs(mut arcs: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    arcs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(arcs.len());
    for (u, v, w) in arcs {
        match merged.last_mut() {
            Some(last) if last.0 == u && last.1 == v => last.2 += w,
            _ => merged.push((u, v, w)),
        }
    }
    merged
}

/// Largest connected component. Ties go to the component holding the
/// smallest vertex id. The map sends new ids to ids of `graph`.
pub fn largest_connected_component(graph: &Graph) -> Result<(Graph, Vec<usize>)> {
    if graph.num_vertices() == 0 {
        return Err(Error::EmptyGraph);
    }
    let comps = graph.connected_components();
    let mut best = 0;
    for (i, c) in comps.iter().enumerate() {
        if c.len() > comps[best].len() {
            best = i;
        }
    }
    graph.induced_subgraph(&comps[best])
}

/// A validated set of vertices with its volume cached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSet {
    members: Vec<usize>,
    volume: f64,
}

impl VertexSet {
    pub fn new(graph: &Graph, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate vertex in set".into()));
        }
        if members.last().is_some_and(|&v| v >= graph.num_vertices()) {
            return Err(Error::Validation("set member out of range".into()));
        }
        let volume = members.iter().map(|&v| graph.degree(v)).sum();
        Ok(Self { members, volume })
    }

    pub fn from_mask(graph: &Graph, mask: &[bool]) -> Result<Self> {
        graph.check_len(mask.len())?;
        let members = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        Self::new(graph, members)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn indicator(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &v in &self.members {
            mask[v] = true;
        }
        mask
    }
}

fn check_proper(graph: &Graph, set: &VertexSet) -> Result<()> {
    if set.is_empty() || set.len() >= graph.num_vertices() {
        return Err(Error::TrivialSet);
    }
    Ok(())
}

/// Total weight of edges with exactly one endpoint in `set`.
pub fn boundary(graph: &Graph, set: &VertexSet) -> f64 {
    let n = graph.num_vertices();
    let mask = set.indicator(n);
    let inside_smaller = set.len() * 2 <= n;
    let mut cut = 0.0;
    for u in 0..n {
        if mask[u] != inside_smaller {
            continue;
        }
        for (v, w) in graph.neighbors(u) {
            if mask[v] != mask[u] {
                cut += w;
            }
        }
    }
    cut
}

/// `phi(S) = boundary(S) / min(Vol(S), Vol(V \ S))`.
pub fn conductance(graph: &Graph, set: &VertexSet) -> Result<f64> {
    check_proper(graph, set)?;
    let vol = set.volume();
    // summed directly: Vol(G) - Vol(S) cancels badly when the complement is light
    let mask = set.indicator(graph.num_vertices());
    let vol_c: f64 = (0..graph.num_vertices()).filter(|&v| !mask[v]).map(|v| graph.degree(v)).sum();
    Ok(boundary(graph, set) / vol.min(vol_c))
}

/// Shifted, scaled indicator of `set`: orthogonal to `d` with unit `D`-norm.
pub fn psi_vector(graph: &Graph, set: &VertexSet) -> Result<Vec<f64>> {
    check_proper(graph, set)?;
    let total = graph.volume();
    let vol = set.volume();
    let vol_c = total - vol;
    let scale = (total / (vol * vol_c)).sqrt();
    let shift = vol / total;
    let mut psi = vec![-scale * shift; graph.num_vertices()];
    for &v in set.members() {
        psi[v] = scale * (1.0 - shift);
    }
    Ok(psi)
}

/// How repeated lines for the same vertex pair are interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeSemantics {
    /// Each line is one undirected edge; repeats are summed.
    #[default]
    Undirected,
    /// The file lists every edge in both directions. Arcs are summed per
    /// direction and the edge weight is the larger of the two directions.
    SymmetricArcs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeListOptions {
    pub zero_indexed: bool,
    pub weighted: bool,
    pub comment_prefixes: Vec<String>,
    pub semantics: EdgeSemantics,
}

impl Default for EdgeListOptions {
    fn default() -> Self {
        Self {
            zero_indexed: true,
            weighted: false,
            comment_prefixes: vec!["#".into(), "%".into()],
            semantics: EdgeSemantics::Undirected,
        }
    }
}

/// A graph read from a file, with the original label of every vertex.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub labels: Vec<u64>,
}

impl LoadedGraph {
    /// Restricts to the largest connected component, carrying labels along.
    pub fn largest_component(self) -> Result<LoadedGraph> {
        let (graph, map) = largest_connected_component(&self.graph)?;
        let labels = map.iter().map(|&i| self.labels[i]).collect();
        Ok(LoadedGraph { graph, labels })
    }
}

pub fn load_edge_list(path: impl AsRef<Path>, options: &EdgeListOptions) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_edge_list(BufReader::new(file), options).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses whitespace-separated `u v [w]` lines. Vertices are relabelled
/// densely in order of first appearance.
pub fn parse_edge_list<R: Read>(reader: R, options: &EdgeListOptions) -> Result<LoadedGraph> {
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut raw = Vec::new();
    let mut intern = |label: u64| -> usize {
        *ids.entry(label).or_insert_with(|| {
            labels.push(label);
            labels.len() - 1
        })
    };

    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: Default::default(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty()
            || options
                .comment_prefixes
                .iter()
                .any(|p| trimmed.starts_with(p.as_str()))
        {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut vertex = |what: &str| -> Result<u64> {
            let tok = tokens.next().ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("missing {what} vertex"),
            })?;
            let id: u64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad vertex id {tok:?}"),
            })?;
            if !options.zero_indexed && id == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "vertex id 0 in a one-indexed file".into(),
                });
            }
            Ok(id)
        };
        let u = vertex("source")?;
        let v = vertex("target")?;
        let w = if options.weighted {
            match tokens.next() {
                None => 1.0,
                Some(tok) => tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad weight {tok:?}"),
                })?,
            }
        } else {
            1.0
        };
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Validation(format!(
                "line {lineno}: edge weight must be nonnegative, got {w}"
            )));
        }
        let (a, b) = (intern(u), intern(v));
        raw.push((a, b, w));
    }

    let n = labels.len();
    let graph = match options.semantics {
        EdgeSemantics::Undirected => Graph::from_edges(n, raw)?,
        EdgeSemantics::SymmetricArcs => {
            let arcs = merge_arcs(raw.into_iter().filter(|a| a.0 != a.1).collect());
            let lookup: HashMap<(usize, usize), f64> =
                arcs.iter().map(|&(u, v, w)| ((u, v), w)).collect();
            let edges = arcs.iter().filter_map(|&(u, v, w)| {
                let back = lookup.get(&(v, u)).copied().unwrap_or(0.0);
                if u < v || back == 0.0 {
                    Some((u.min(v), u.max(v), w.max(back)))
                } else {
                    None
                }
            });
            Graph::from_edges(n, edges.collect::<Vec<_>>())?
        }
    };
    Ok(LoadedGraph { graph, labels })
}

/// Writes `u v` lines (or `u v w` when any weight differs from one), each
/// undirected edge once.
pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W) -> std::io::Result<()> {
    let weighted = graph.edges().any(|(_, _, w)| w != 1.0);
    for (u, v, w) in graph.edges() {
        if weighted {
            writeln!(out, "{u} {v} {w:?}")?;
        } else {
            writeln!(out, "{u} {v}")?;
        }
    }
    Ok(())
}
