//! Settings: defaults, overridden by a JSON config file, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mucond::certify::CertifyConfig;
use mucond::lrsdp::AlmConfig;
use mucond::eig::EigConfig;
use mucond::ncp::{SeedSpec, SweepConfig};
use serde::{Deserialize, Serialize};

/// Default mu grid: 1e-6 up to 0.4, plus 0.5.
pub const DEFAULT_MU_LIST: [f64; 8] = [1e-6, 1e-4, 1e-2, 0.03, 0.1, 0.2, 0.4, 0.5];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub lcc: Option<bool>,
    pub bound: BoundSettings,
    pub ncp: NcpSettings,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSettings {
    pub mu_list: Vec<f64>,
    pub ks: Vec<usize>,
    /// Let bounds from non-converged runs into the envelope.
    pub include_heuristic: bool,
    pub alm: AlmConfig,
    pub eig: EigConfig,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            mu_list: DEFAULT_MU_LIST.to_vec(),
            ks: vec![5],
            include_heuristic: false,
            alm: AlmConfig::default(),
            eig: EigConfig::default(),
        }
    }
}

impl BoundSettings {
    pub fn certify_config(&self) -> CertifyConfig {
        CertifyConfig {
            alm: self.alm.clone(),
            eig: self.eig.clone(),
        }
    }

    /// Sorts the mu grid and rejects values outside `(0, 1/2]` or repeats.
    pub fn normalize(&mut self) -> Result<()> {
        if self.mu_list.is_empty() || self.ks.is_empty() {
            bail!("need at least one mu and one k");
        }
        if let Some(mu) = self.mu_list.iter().find(|&&m| !(m > 0.0 && m <= 0.5)) {
            bail!("mu = {mu} must lie in (0, 0.5]");
        }
        if self.ks.contains(&0) {
            bail!("rank k must be at least 1");
        }
        self.mu_list.sort_by(f64::total_cmp);
        if self.mu_list.windows(2).any(|w| w[0] == w[1]) {
            bail!("mu list contains duplicates");
        }
        self.ks.sort_unstable();
        self.ks.dedup();
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NcpSettings {
    pub sweep: SweepConfig,
    pub vol_bins: usize,
    pub cond_bins: usize,
    /// Profile takes the running minimum from the large-volume end.
    pub cumulative: bool,
}

impl Default for NcpSettings {
    fn default() -> Self {
        Self {
            sweep: SweepConfig::default(),
            vol_bins: 60,
            cond_bins: 40,
            cumulative: false,
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct BoundFlags {
    /// Comma-separated mu values in (0, 0.5]
    #[arg(long, value_delimiter = ',')]
    pub mu_list: Option<Vec<f64>>,

    /// Comma-separated ranks
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,

    /// Stationarity and feasibility tolerance
    #[arg(long)]
    pub tol: Option<f64>,

    #[arg(long)]
    pub max_outer: Option<usize>,

    /// Seed of the eigensolver start vectors
    #[arg(long)]
    pub seed: Option<u64>,

    /// Include non-converged bounds in the envelope
    #[arg(long)]
    pub include_heuristic: bool,
}

impl BoundFlags {
    pub fn apply(&self, mut s: BoundSettings) -> Result<BoundSettings> {
        if let Some(v) = &self.mu_list {
            s.mu_list = v.clone();
        }
        if let Some(v) = &self.k {
            s.ks = v.clone();
        }
        if let Some(t) = self.tol {
            s.alm.tol_stat = t;
            s.alm.tol_feas = t;
        }
        if let Some(m) = self.max_outer {
            s.alm.max_outer = m;
        }
        if let Some(seed) = self.seed {
            s.alm.seed = seed;
            s.eig.seed = seed;
        }
        s.include_heuristic |= self.include_heuristic;
        s.normalize()?;
        Ok(s)
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct NcpFlags {
    /// Number of random seed vertices
    #[arg(long)]
    pub seeds: Option<usize>,

    /// Explicit seed vertices (input labels), comma-separated
    #[arg(long, value_delimiter = ',', conflicts_with = "seeds")]
    pub seed_list: Option<Vec<u64>>,

    /// RNG seed for drawing seed vertices
    #[arg(long)]
    pub rng_seed: Option<u64>,

    /// Walk continuation probability of the PageRank push
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Comma-separated push tolerances, descending
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,

    #[arg(long)]
    pub vol_bins: Option<usize>,

    #[arg(long)]
    pub cond_bins: Option<usize>,

    /// Cumulative (suffix-minimum) profile instead of per-bin minima
    #[arg(long)]
    pub cumulative: bool,
}

impl NcpFlags {
    /// `labels` maps internal ids to input labels, for `--seed-list`.
    pub fn apply(&self, mut s: NcpSettings, labels: &[u64]) -> Result<NcpSettings> {
        if let Some(count) = self.seeds {
            let rng_seed = match s.sweep.seeds {
                SeedSpec::Random { rng_seed, .. } => rng_seed,
                SeedSpec::List(_) => 0,
            };
            s.sweep.seeds = SeedSpec::Random { count, rng_seed };
        }
        if let Some(r) = self.rng_seed {
            if let SeedSpec::Random { rng_seed, .. } = &mut s.sweep.seeds {
                *rng_seed = r;
            }
        }
        if let Some(list) = &self.seed_list {
            let ids = list
                .iter()
                .map(|l| {
                    labels
                        .iter()
                        .position(|x| x == l)
                        .with_context(|| format!("seed vertex {l} not in the graph"))
                })
                .collect::<Result<Vec<_>>>()?;
            s.sweep.seeds = SeedSpec::List(ids);
        }
        if let Some(a) = self.alpha {
            s.sweep.alpha = a;
        }
        if let Some(e) = &self.eps_list {
            s.sweep.epsilons = e.clone();
        }
        if let Some(b) = self.vol_bins {
            s.vol_bins = b;
        }
        if let Some(b) = self.cond_bins {
            s.cond_bins = b;
        }
        s.cumulative |= self.cumulative;
        s.sweep.validate()?;
        if s.vol_bins == 0 || s.cond_bins == 0 {
            bail!("bin counts must be positive");
        }
        Ok(s)
    }
}

#[derive(Args, Clone, Debug)]
pub struct CommonFlags {
    /// JSON config file; explicit flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Worker threads (defaults to all cores)
    #[arg(long, env = "MUCOND_THREADS")]
    pub threads: Option<usize>,
}
