//! Empirical network community profile from seeded PageRank sweeps.
//!
//! Each `(seed, epsilon)` pair runs the push procedure for an approximate
//! personalized PageRank vector, sweeps over its degree-normalised order and
//! records every prefix as a `(volume, conductance)` sample. Samples are then
//! binned by volume for the profile and heatmap, or reduced to an upper
//! envelope of `phi_mu` for comparison with the certified lower bounds.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::ProfileLowerBound;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Push state for the approximate personalized PageRank of one seed.
///
/// A push at `u` moves `(1 - alpha) r_u` into `p_u` and spreads `alpha r_u`
/// over the neighbours of `u` in proportion to edge weight. It stops once
/// `r_u < epsilon d_u` everywhere.
#[derive(Clone, Debug)]
pub struct PushState<'g> {
    graph: &'g Graph,
    alpha: f64,
    epsilon: f64,
    p: HashMap<usize, f64>,
    r: HashMap<usize, f64>,
    queue: VecDeque<usize>,
    pushes: usize,
}

impl<'g> PushState<'g> {
    pub fn new(graph: &'g Graph, seed: usize, alpha: f64, epsilon: f64) -> Result<Self> {
        if seed >= graph.num_vertices() {
            return Err(Error::Validation(format!(
                "seed {seed} out of range for {} vertices",
                graph.num_vertices()
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Validation(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Validation(format!("epsilon = {epsilon} must be positive")));
        }
        let mut queue = VecDeque::new();
        if 1.0 >= epsilon * graph.degree(seed) {
            queue.push_back(seed);
        }
        Ok(Self {
            graph,
            alpha,
            epsilon,
            p: HashMap::new(),
            r: HashMap::from([(seed, 1.0)]),
            queue,
            pushes: 0,
        })
    }

    fn active(&self, u: usize) -> bool {
        self.r.get(&u).copied().unwrap_or(0.0) >= self.epsilon * self.graph.degree(u)
    }

    /// Performs one push; returns `false` once no vertex is active.
    pub fn step(&mut self) -> bool {
        let Some(u) = self.queue.pop_front() else {
            return false;
        };
        let ru = self.r.insert(u, 0.0).unwrap_or(0.0);
        *self.p.entry(u).or_insert(0.0) += (1.0 - self.alpha) * ru;
        let spread = self.alpha * ru / self.graph.degree(u);
        for (v, w) in self.graph.neighbors(u) {
            let was = self.active(v);
            *self.r.entry(v).or_insert(0.0) += spread * w;
            if !was && self.active(v) {
                self.queue.push_back(v);
            }
        }
        self.pushes += 1;
        true
    }

    pub fn p(&self) -> &HashMap<usize, f64> {
        &self.p
    }

    pub fn r(&self) -> &HashMap<usize, f64> {
        &self.r
    }

    pub fn pushes(&self) -> usize {
        self.pushes
    }

    pub fn finish(mut self) -> PushResult {
        while self.step() {}
        let sorted = |m: HashMap<usize, f64>| {
            let mut v: Vec<(usize, f64)> = m.into_iter().filter(|&(_, x)| x > 0.0).collect();
            v.sort_unstable_by_key(|&(i, _)| i);
            v
        };
        PushResult {
            p: sorted(self.p),
            r: sorted(self.r),
            pushes: self.pushes,
        }
    }
}

/// Sparse vectors sorted by vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct PushResult {
    pub p: Vec<(usize, f64)>,
    pub r: Vec<(usize, f64)>,
    pub pushes: usize,
}

/// Approximate personalized PageRank from `seed`.
pub fn ppr_push(graph: &Graph, seed: usize, alpha: f64, epsilon: f64) -> Result<PushResult> {
    Ok(PushState::new(graph, seed, alpha, epsilon)?.finish())
}

/// One prefix of a sweep, measured on its smaller-volume side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPrefix {
    /// Number of vertices of the swept order in the prefix.
    pub prefix_len: usize,
    /// Vertices on the smaller-volume side.
    pub size: usize,
    pub volume: f64,
    pub cut: f64,
    pub conductance: f64,
}

/// A sweep: the vertex order and each prefix's measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub order: Vec<usize>,
    pub prefixes: Vec<SweepPrefix>,
}

/// Sweeps the support of `vector` ordered by `x_i / d_i` descending, ties by
/// vertex id. Cut and volume are updated incrementally. With `half_volume`
/// set the sweep stops before any prefix whose volume exceeds `Vol / 2`;
/// otherwise such prefixes are measured on their complement.
pub fn sweep_cut(graph: &Graph, vector: &[(usize, f64)], half_volume: bool) -> Result<Sweep> {
    let n = graph.num_vertices();
    let d = graph.degrees();
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(vector.len());
    for &(v, x) in vector {
        if v >= n {
            return Err(Error::Validation(format!("vertex {v} out of range")));
        }
        if !(x >= 0.0) {
            return Err(Error::Validation(format!("negative entry {x} at vertex {v}")));
        }
        if x > 0.0 {
            order.push((v, x / d[v]));
        }
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for w in order.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Validation(format!("vertex {} listed twice", w[0].0)));
        }
    }

    let total = graph.volume();
    let mut inside = vec![false; n];
    let mut vol = 0.0;
    let mut cut = 0.0;
    let mut prefixes = Vec::with_capacity(order.len());
    let mut kept = Vec::with_capacity(order.len());
    for (i, &(v, _)) in order.iter().enumerate() {
        if half_volume && vol + d[v] > total / 2.0 {
            break;
        }
        let w_in: f64 = graph.neighbors(v).filter(|&(u, _)| inside[u]).map(|(_, w)| w).sum();
        inside[v] = true;
        kept.push(v);
        vol += d[v];
        cut += d[v] - 2.0 * w_in;
        let len = i + 1;
        if len == n {
            break;
        }
        let (side_vol, size) = if vol <= total - vol {
            (vol, len)
        } else {
            (total - vol, n - len)
        };
        prefixes.push(SweepPrefix {
            prefix_len: len,
            size,
            volume: side_vol,
            cut,
            conductance: cut / side_vol,
        });
    }
    Ok(Sweep {
        order: kept,
        prefixes,
    })
}

/// Where diffusions start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSpec {
    List(Vec<usize>),
    /// `count` distinct vertices drawn uniformly with `rng_seed`.
    Random { count: usize, rng_seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Probability of continuing the walk at each step.
    pub alpha: f64,
    pub epsilons: Vec<f64>,
    pub seeds: SeedSpec,
    /// Stop each sweep at half the total volume.
    pub half_volume: bool,
}

/// `count` log-spaced values from `hi` down to `lo`.
pub fn log_grid_desc(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.log10(), lo.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            epsilons: log_grid_desc(1e-2, 1e-8, 7),
            seeds: SeedSpec::Random {
                count: 100,
                rng_seed: 0,
            },
            half_volume: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Validation(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Validation("epsilons must be positive and nonempty".into()));
        }
        if self.epsilons.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Validation("epsilons must be strictly descending".into()));
        }
        Ok(())
    }

    pub fn seed_vertices(&self, graph: &Graph) -> Result<Vec<usize>> {
        let n = graph.num_vertices();
        match &self.seeds {
            SeedSpec::List(v) => {
                if let Some(&bad) = v.iter().find(|&&s| s >= n) {
                    return Err(Error::Validation(format!("seed vertex {bad} out of range")));
                }
                Ok(v.clone())
            }
            SeedSpec::Random { count, rng_seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
                Ok(sample(&mut rng, n, (*count).min(n)).into_vec())
            }
        }
    }
}

/// A sweep prefix labelled with the diffusion that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub seed: usize,
    pub epsilon: f64,
    pub volume: f64,
    pub size: usize,
    pub conductance: f64,
}

/// All sweep samples for every `(seed, epsilon)`, ordered by seed position
/// then epsilon position regardless of thread count.
pub fn run_sweeps(graph: &Graph, config: &SweepConfig) -> Result<Vec<SweepSample>> {
    config.validate()?;
    let seeds = config.seed_vertices(graph)?;
    let jobs: Vec<(usize, f64)> = seeds
        .iter()
        .flat_map(|&s| config.epsilons.iter().map(move |&e| (s, e)))
        .collect();
    let chunks: Vec<Vec<SweepSample>> = jobs
        .par_iter()
        .map(|&(seed, epsilon)| -> Result<Vec<SweepSample>> {
            let push = ppr_push(graph, seed, config.alpha, epsilon)?;
            let sweep = sweep_cut(graph, &push.p, config.half_volume)?;
            Ok(sweep
                .prefixes
                .iter()
                .map(|p| SweepSample {
                    seed,
                    epsilon,
                    volume: p.volume,
                    size: p.size,
                    conductance: p.conductance,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Log-spaced edges `lo = e_0 < ... < e_bins = hi`.
pub fn log_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut e: Vec<f64> = (0..=bins)
        .map(|i| (a + (b - a) * i as f64 / bins as f64).exp())
        .collect();
    e[0] = lo;
    e[bins] = hi;
    e
}

/// Bin index of `x` among `edges`; values outside go to the end bins.
fn bin_of(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    match edges.partition_point(|&e| e <= x) {
        0 => 0,
        i => (i - 1).min(bins - 1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub volume_lo: f64,
    pub volume_hi: f64,
    /// `None` for a bin with no samples.
    pub min_conductance: Option<f64>,
    pub count: u64,
}

/// Minimum conductance per log-spaced volume bin over `[1, total_volume / 2]`.
/// With `cumulative`, each bin takes the minimum over itself and all larger
/// volumes instead.
pub fn build_profile(
    samples: &[SweepSample],
    bins: usize,
    total_volume: f64,
    cumulative: bool,
) -> Vec<ProfileBin> {
    if samples.is_empty() || bins == 0 {
        return Vec::new();
    }
    let edges = log_edges(1.0, (total_volume / 2.0).max(1.0 + 1e-9), bins);
    let mut out: Vec<ProfileBin> = (0..bins)
        .map(|i| ProfileBin {
            volume_lo: edges[i],
            volume_hi: edges[i + 1],
            min_conductance: None,
            count: 0,
        })
        .collect();
    for s in samples {
        let b = &mut out[bin_of(&edges, s.volume)];
        b.count += 1;
        b.min_conductance = Some(b.min_conductance.map_or(s.conductance, |m| m.min(s.conductance)));
    }
    if cumulative {
        let mut run: Option<f64> = None;
        for b in out.iter_mut().rev() {
            run = match (run, b.min_conductance) {
                (Some(a), Some(c)) => Some(a.min(c)),
                (a, c) => a.or(c),
            };
            b.min_conductance = run;
        }
    }
    out
}

/// 2-D histogram over log volume and log conductance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub volume_edges: Vec<f64>,
    pub conductance_edges: Vec<f64>,
    /// `counts[volume_bin][conductance_bin]`
    pub counts: Vec<Vec<u64>>,
}

/// Volume bins span `[1, total_volume / 2]`; conductance bins span from the
/// smallest sampled conductance to 1.
pub fn heatmap(samples: &[SweepSample], vol_bins: usize, cond_bins: usize, total_volume: f64) -> Heatmap {
    let volume_edges = log_edges(1.0, (total_volume / 2.0).max(1.0 + 1e-9), vol_bins.max(1));
    let lo = samples
        .iter()
        .map(|s| s.conductance)
        .filter(|&c| c > 0.0)
        .fold(1.0_f64, f64::min);
    let lo = if lo >= 1.0 { 0.5 } else { lo };
    let conductance_edges = log_edges(lo, 1.0, cond_bins.max(1));
    let mut counts = vec![vec![0u64; cond_bins.max(1)]; vol_bins.max(1)];
    for s in samples {
        counts[bin_of(&volume_edges, s.volume)][bin_of(&conductance_edges, s.conductance)] += 1;
    }
    Heatmap {
        volume_edges,
        conductance_edges,
        counts,
    }
}

/// Upper bound on `phi_mu` from samples: the least conductance among samples
/// of volume at least `mu Vol`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperEnvelope {
    total_volume: f64,
    /// Sample volumes, ascending.
    volumes: Vec<f64>,
    /// `suffix_min[i]` = min conductance over samples `i..`.
    suffix_min: Vec<f64>,
}

impl UpperEnvelope {
    pub fn new(samples: &[SweepSample], total_volume: f64) -> Self {
        let mut pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.volume, s.conductance)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut suffix_min = vec![0.0; pts.len()];
        let mut run = f64::INFINITY;
        for i in (0..pts.len()).rev() {
            run = run.min(pts[i].1);
            suffix_min[i] = run;
        }
        Self {
            total_volume,
            volumes: pts.into_iter().map(|p| p.0).collect(),
            suffix_min,
        }
    }

    /// `None` when no sample reaches volume `mu Vol`.
    pub fn at_mu(&self, mu: f64) -> Option<f64> {
        let threshold = mu * self.total_volume;
        let i = self.volumes.partition_point(|&v| v < threshold);
        self.suffix_min.get(i).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub mu: f64,
    /// `mu Vol`
    pub volume: f64,
    pub upper: Option<f64>,
    pub lower: f64,
    pub certified: bool,
    /// `upper / lower` when both are positive.
    pub ratio: Option<f64>,
}

/// Slack allowed when checking `upper >= lower`.
pub const GAP_TOLERANCE: f64 = 1e-9;

/// Compares sampled upper bounds with the lower-bound profile per `mu`.
///
/// Fails with `RangeMismatch` when no `mu` has any sample at or above its
/// volume threshold, and with `Inconsistent` when a certified lower bound
/// exceeds the sampled upper value.
pub fn gap_report(upper: &UpperEnvelope, lower: &ProfileLowerBound) -> Result<Vec<GapRow>> {
    let rows: Vec<GapRow> = lower
        .points
        .iter()
        .map(|p| {
            let up = upper.at_mu(p.mu);
            GapRow {
                mu: p.mu,
                volume: p.mu * upper.total_volume,
                upper: up,
                lower: p.bound,
                certified: p.certified,
                ratio: up.filter(|_| p.bound > 0.0).map(|u| u / p.bound),
            }
        })
        .collect();
    if !rows.iter().any(|r| r.upper.is_some()) {
        return Err(Error::RangeMismatch);
    }
    for r in &rows {
        if let (true, Some(u)) = (r.certified, r.upper) {
            if r.lower > u + GAP_TOLERANCE {
                return Err(Error::Inconsistent {
                    mu: r.mu,
                    upper: u,
                    lower: r.lower,
                });
            }
        }
    }
    Ok(rows)
}

pub const SAMPLES_CSV_HEADER: &str = "seed,epsilon,volume,size,conductance";
pub const PROFILE_CSV_HEADER: &str = "volume_lo,volume_hi,min_conductance,count";
pub const HEATMAP_CSV_HEADER: &str = "volume_lo,volume_hi,conductance_lo,conductance_hi,count";
pub const GAP_CSV_HEADER: &str = "mu,volume,upper,lower,certified,ratio";

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn write_samples_csv<W: Write>(samples: &[SweepSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SAMPLES_CSV_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{},{:e},{:e},{},{:e}",
            s.seed, s.epsilon, s.volume, s.size, s.conductance
        )?;
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(bins: &[ProfileBin], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PROFILE_CSV_HEADER}")?;
    for b in bins {
        writeln!(
            out,
            "{:e},{:e},{},{}",
            b.volume_lo,
            b.volume_hi,
            opt(b.min_conductance),
            b.count
        )?;
    }
    Ok(())
}

/// Long format, one row per cell.
pub fn write_heatmap_csv<W: Write>(h: &Heatmap, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HEATMAP_CSV_HEADER}")?;
    for (i, row) in h.counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{}",
                h.volume_edges[i],
                h.volume_edges[i + 1],
                h.conductance_edges[j],
                h.conductance_edges[j + 1],
                c
            )?;
        }
    }
    Ok(())
}

pub fn write_gap_csv<W: Write>(rows: &[GapRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{GAP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{},{:e},{},{}",
            r.mu,
            r.volume,
            opt(r.upper),
            r.lower,
            r.certified,
            opt(r.ratio)
        )?;
    }
    Ok(())
}
