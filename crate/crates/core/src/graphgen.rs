//! k-core decomposition and the core-periphery point-cloud generator.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreDecomposition {
    pub core: Vec<usize>,
    pub max_core: usize,
}

/// Core numbers by bucket peeling in `O(n + m)`. Degrees are neighbour
/// counts; edge weights are ignored.
pub fn core_numbers(graph: &Graph) -> CoreDecomposition {
    let n = graph.num_vertices();
    let mut deg: Vec<usize> = (0..n).map(|v| graph.neighbor_count(v)).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);

    // vertices sorted by degree, with bucket starts
    let mut bin = vec![0usize; max_deg + 2];
    for &d in &deg {
        bin[d + 1] += 1;
    }
    for i in 1..bin.len() {
        bin[i] += bin[i - 1];
    }
    let mut pos = vec![0usize; n];
    let mut order = vec![0usize; n];
    let mut next = bin.clone();
    for v in 0..n {
        pos[v] = next[deg[v]];
        order[pos[v]] = v;
        next[deg[v]] += 1;
    }

    for i in 0..n {
        let v = order[i];
        for (u, _) in graph.neighbors(v) {
            if deg[u] > deg[v] {
                // swap u to the front of its bucket, then shrink the bucket
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = order[pw];
                if u != w {
                    order.swap(pu, pw);
                    pos[u] = pw;
                    pos[w] = pu;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    let max_core = deg.iter().copied().max().unwrap_or(0);
    CoreDecomposition { core: deg, max_core }
}

/// Subgraph induced by the vertices of core number at least `k`, with the
/// map from new to original ids. The result may be disconnected.
pub fn k_core_subgraph(graph: &Graph, k: usize) -> Result<(Graph, Vec<usize>)> {
    if k == 0 {
        return Err(Error::Validation("core order k must be at least 1".into()));
    }
    let cores = core_numbers(graph);
    let keep: Vec<usize> = (0..graph.num_vertices()).filter(|&v| cores.core[v] >= k).collect();
    if keep.is_empty() {
        return Err(Error::EmptyCore {
            k,
            max_core: cores.max_core,
        });
    }
    graph.induced_subgraph(&keep)
}

/// Parameters of the core-periphery generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    pub core_fraction: f64,
    pub core_scale: f64,
    pub periphery_scale: f64,
    pub neighbors: usize,
    /// Count each point as one of its own `neighbors` closest points, so it
    /// links to `neighbors - 1` others.
    pub self_in_neighborhood: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 537,
            dim: 2,
            core_fraction: 0.1,
            core_scale: 0.1,
            periphery_scale: 1.5,
            neighbors: 5,
            self_in_neighborhood: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn links_per_point(&self) -> usize {
        if self.self_in_neighborhood {
            self.neighbors - 1
        } else {
            self.neighbors
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.core_fraction > 0.0 && self.core_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "core_fraction {} must lie in (0, 1)",
                self.core_fraction
            )));
        }
        if self.dim == 0 {
            return Err(Error::Validation("dim must be at least 1".into()));
        }
        if self.neighbors == 0 || self.links_per_point() == 0 {
            return Err(Error::Validation("need at least one neighbour per point".into()));
        }
        if self.n < self.neighbors + 1 {
            return Err(Error::Validation(format!(
                "n = {} must exceed neighbors = {}",
                self.n, self.neighbors
            )));
        }
        Ok(())
    }
}

/// A generated graph with the point cloud behind it.
#[derive(Clone, Debug)]
pub struct SyntheticGraph {
    pub graph: Graph,
    /// Row-major `n x dim`.
    pub coords: Vec<f64>,
    pub dim: usize,
    pub is_core: Vec<bool>,
}

const MAX_REDRAWS: u64 = 16;

/// Normal points, a random `core_fraction` of them shrunk by `core_scale`
/// and the rest stretched by `periphery_scale`, each linked to its nearest
/// neighbours (ties by index). Edges are symmetrised and unweighted.
pub fn generate_core_periphery(config: &SynthConfig) -> Result<SyntheticGraph> {
    config.validate()?;
    for attempt in 0..MAX_REDRAWS {
        let seed = config.seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let (coords, is_core) = draw_points(config, seed);
        if has_duplicates(&coords, config.dim) {
            log::warn!("duplicate points drawn with seed {seed}; redrawing");
            continue;
        }
        let graph = knn_graph(&coords, config.dim, config.links_per_point())?;
        return Ok(SyntheticGraph {
            graph,
            coords,
            dim: config.dim,
            is_core,
        });
    }
    Err(Error::Validation("could not draw distinct points".into()))
}

fn draw_points(config: &SynthConfig, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n;
    let mut coords: Vec<f64> = (0..n * config.dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let n_core = ((config.core_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut is_core = vec![false; n];
    for v in sample(&mut rng, n, n_core) {
        is_core[v] = true;
    }
    for v in 0..n {
        let scale = if is_core[v] {
            config.core_scale
        } else {
            config.periphery_scale
        };
        for x in &mut coords[v * config.dim..(v + 1) * config.dim] {
            *x *= scale;
        }
    }
    (coords, is_core)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn has_duplicates(coords: &[f64], dim: usize) -> bool {
    let mut rows: Vec<&[f64]> = coords.chunks(dim).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.windows(2).any(|w| w[0] == w[1])
}

fn knn_graph(coords: &[f64], dim: usize, links: usize) -> Result<Graph> {
    let n = coords.len() / dim;
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = &coords[i * dim..(i + 1) * dim];
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(p, &coords[j * dim..(j + 1) * dim]), j))
                .collect();
            cand.select_nth_unstable_by(links - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand[..links].iter().map(|&(_, j)| j).collect()
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().map(move |&j| (i.min(j), i.max(j))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Graph::from_unweighted(n, edges)
}

pub const COORDS_CSV_HEADER_PREFIX: &str = "vertex,is_core";

/// Writes `vertex,is_core,x0,x1,...` rows.
pub fn write_coords_csv<W: Write>(synth: &SyntheticGraph, mut out: W) -> std::io::Result<()> {
    write!(out, "{COORDS_CSV_HEADER_PREFIX}")?;
    for c in 0..synth.dim {
        write!(out, ",x{c}")?;
    }
    writeln!(out)?;
    for (v, row) in synth.coords.chunks(synth.dim).enumerate() {
        write!(out, "{v},{}", u8::from(synth.is_core[v]))?;
        for x in row {
            write!(out, ",{x:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use proptest::prelude::*;

    /// Repeated deletion of every vertex with degree below `k`.
    fn naive_cores(graph: &Graph) -> Vec<usize> {
        let n = graph.num_vertices();
        let mut core = vec![0; n];
        for k in 1..=n {
            let mut alive = vec![true; n];
            loop {
                let doomed: Vec<usize> = (0..n)
                    .filter(|&v| alive[v] && graph.neighbors(v).filter(|&(u, _)| alive[u]).count() < k)
                    .collect();
                if doomed.is_empty() {
                    break;
                }
                for v in doomed {
                    alive[v] = false;
                }
            }
            if !alive.iter().any(|&a| a) {
                break;
            }
            for v in 0..n {
                if alive[v] {
                    core[v] = k;
                }
            }
        }
        core
    }

    #[test]
    fn closed_form_cores() {
        assert!(core_numbers(&path(7)).core.iter().all(|&c| c == 1));
        assert!(core_numbers(&star(5)).core.iter().all(|&c| c == 1));
        assert!(core_numbers(&cycle(5)).core.iter().all(|&c| c == 2));
        let c = core_numbers(&k4_pendant());
        assert_eq!(c.core, vec![3, 3, 3, 3, 1]);
        assert_eq!(c.max_core, 3);
    }

    #[test]
    fn core_subgraphs() {
        let g = k4_pendant();
        let (one, map) = k_core_subgraph(&g, 1).unwrap();
        assert_eq!(one, g);
        assert_eq!(map, vec![0, 1, 2, 3, 4]);
        let (two, map) = k_core_subgraph(&g, 2).unwrap();
        assert_eq!(two, complete(4));
        assert_eq!(map, vec![0, 1, 2, 3]);
        assert!(matches!(
            k_core_subgraph(&g, 4),
            Err(Error::EmptyCore { k: 4, max_core: 3 })
        ));
        assert!(k_core_subgraph(&g, 0).is_err());
    }

    proptest! {
        #[test]
        fn bucket_matches_naive(n in 2usize..60, p in 0.02f64..0.5, seed in 0u64..1000) {
            let g = random_connected(n, p, seed, seed % 2 == 0);
            let c = core_numbers(&g);
            prop_assert_eq!(&c.core, &naive_cores(&g));
            // nested cores and induced degrees
            let mut prev: Option<Vec<usize>> = None;
            for k in 1..=c.max_core {
                let (sub, map) = k_core_subgraph(&g, k).unwrap();
                for v in 0..sub.num_vertices() {
                    prop_assert!(sub.neighbor_count(v) >= k);
                }
                if let Some(p) = &prev {
                    prop_assert!(map.iter().all(|v| p.contains(v)));
                }
                prev = Some(map);
            }
        }
    }

    #[test]
    fn generator_basic_properties() {
        let cfg = SynthConfig { n: 85, seed: 3, ..Default::default() };
        let s = generate_core_periphery(&cfg).unwrap();
        assert_eq!(s.graph.num_vertices(), 85);
        assert_eq!(s.is_core.iter().filter(|&&c| c).count(), 9);
        assert!((0..85).all(|v| s.graph.neighbor_count(v) >= 5));
        let again = generate_core_periphery(&cfg).unwrap();
        assert_eq!(s.graph, again.graph);
        assert_eq!(s.coords, again.coords);
        let other = generate_core_periphery(&SynthConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(s.coords, other.coords);
    }

    #[test]
    fn self_inclusive_neighbourhood() {
        let cfg = SynthConfig {
            self_in_neighborhood: true,
            seed: 1,
            ..Default::default()
        };
        let s = generate_core_periphery(&cfg).unwrap();
        assert!((0..cfg.n).all(|v| s.graph.neighbor_count(v) >= 4));
        let m = s.graph.num_edges() as f64;
        assert!((m - 1327.0).abs() <= 0.15 * 1327.0, "{m} edges");
    }

    #[test]
    fn neighbour_lists_are_nearest() {
        let cfg = SynthConfig { n: 40, seed: 9, ..Default::default() };
        let s = generate_core_periphery(&cfg).unwrap();
        let pt = |v: usize| &s.coords[2 * v..2 * v + 2];
        for v in 0..40 {
            let mut d: Vec<(f64, usize)> = (0..40)
                .filter(|&u| u != v)
                .map(|u| (sq_dist(pt(v), pt(u)), u))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, u) in &d[..5] {
                assert!(s.graph.weight(v, u) > 0.0);
            }
        }
    }

    #[test]
    fn core_is_denser_than_periphery() {
        // kNN unions have near-constant degree, so compare induced edge
        // density 2m / (n (n - 1)) rather than average degree
        for seed in 0..10 {
            let cfg = SynthConfig { seed, ..Default::default() };
            let s = generate_core_periphery(&cfg).unwrap();
            let density = |flag: bool| {
                let keep: Vec<usize> = (0..cfg.n).filter(|&v| s.is_core[v] == flag).collect();
                let (sub, _) = s.graph.induced_subgraph(&keep).unwrap();
                let k = keep.len() as f64;
                2.0 * sub.num_edges() as f64 / (k * (k - 1.0))
            };
            assert!(density(true) > 4.0 * density(false), "seed {seed}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            SynthConfig { core_fraction: 0.0, ..Default::default() },
            SynthConfig { core_fraction: 1.0, ..Default::default() },
            SynthConfig { neighbors: 0, ..Default::default() },
            SynthConfig { n: 5, ..Default::default() },
            SynthConfig { dim: 0, ..Default::default() },
            SynthConfig { neighbors: 1, self_in_neighborhood: true, ..Default::default() },
        ] {
            assert!(generate_core_periphery(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn coords_csv_layout() {
        let s = generate_core_periphery(&SynthConfig { n: 10, seed: 2, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_coords_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "vertex,is_core,x0,x1");
        assert_eq!(lines.len(), 11);
        let x: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(x, s.coords[0]);
    }
}
