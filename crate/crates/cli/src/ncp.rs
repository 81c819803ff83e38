//! `mucond ncp`: empirical community profile from seeded PageRank sweeps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use mucond::certify::{monotone_envelope, BoundPoint, ProfileLowerBound, ENVELOPE_CSV_HEADER};
use mucond::graph::Graph;
use mucond::ncp::{
    build_profile, gap_report, heatmap, run_sweeps, write_gap_csv, write_heatmap_csv, write_profile_csv,
    write_samples_csv, SweepSample, UpperEnvelope,
};

use crate::config::{CommonFlags, FileConfig, NcpFlags, NcpSettings};
use crate::input::GraphArgs;
use crate::manifest::{GraphInfo, ItemStatus, Manifest, ManifestItem, ManifestWriter, RunStatus};
use crate::output::write_csv;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const PROFILE_FILE: &str = "profile.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const GAP_FILE: &str = "gap.csv";

#[derive(Args, Debug)]
pub struct NcpArgs {
    #[command(flatten)]
    pub graph: GraphArgs,

    #[command(flatten)]
    pub ncp: NcpFlags,

    #[command(flatten)]
    pub common: CommonFlags,

    /// Envelope CSV from `mucond bound`; adds gap.csv comparing both profiles
    #[arg(long)]
    pub bounds: Option<PathBuf>,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

pub fn run(args: &NcpArgs) -> Result<RunStatus> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let input = args.graph.load(args.graph.lcc || file.lcc.unwrap_or(false))?;
    let settings = args.ncp.apply(file.ncp, &input.loaded.labels)?;
    run_on(
        &input.loaded.graph,
        &input.loaded.labels,
        input.info,
        &settings,
        args.bounds.as_deref(),
        &args.out_dir,
    )
}

/// Reads an envelope CSV written by `mucond bound`.
pub fn read_envelope(path: &Path) -> Result<ProfileLowerBound> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(ENVELOPE_CSV_HEADER) {
        bail!("{} does not start with `{ENVELOPE_CSV_HEADER}`", path.display());
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let parsed = match f.as_slice() {
            [mu, bound, cert] => (|| Some(BoundPoint {
                mu: mu.parse().ok()?,
                bound: bound.parse().ok()?,
                certified: cert.parse().ok()?,
            }))(),
            _ => None,
        };
        points.push(parsed.with_context(|| format!("{}: bad row {}", path.display(), i + 2))?);
    }
    Ok(monotone_envelope(&points)?)
}

/// Runs the sweeps on `graph`; `labels` name vertices in the samples file.
pub fn run_on(
    graph: &Graph,
    labels: &[u64],
    info: GraphInfo,
    settings: &NcpSettings,
    bounds: Option<&Path>,
    dir: &Path,
) -> Result<RunStatus> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let lower = bounds.map(read_envelope).transpose()?;
    let volume = graph.volume();

    let mut manifest = Manifest::new("ncp", Some(info), serde_json::to_value(settings)?);
    manifest.items.push(ManifestItem::pending("sweeps"));
    if lower.is_some() {
        manifest.items.push(ManifestItem::pending("gap"));
    }
    for (file, schema) in [
        (SAMPLES_FILE, "mucond-samples/1"),
        (PROFILE_FILE, "mucond-profile/1"),
        (HEATMAP_FILE, "mucond-heatmap/1"),
        (GAP_FILE, "mucond-gap/1"),
    ] {
        if file != GAP_FILE || lower.is_some() {
            manifest.csv_schemas.insert(file.into(), schema.into());
        }
    }
    let writer = ManifestWriter::create(dir, manifest)?;

    let t0 = Instant::now();
    let samples = match run_sweeps(graph, &settings.sweep) {
        Ok(s) => s,
        Err(e) => {
            log::error!("sweeps failed: {e}");
            writer.update(|m| {
                m.items[0].status = ItemStatus::Failed;
                m.items[0].error = Some(e.to_string());
                Ok(())
            })?;
            return Ok(writer.finish()?.status);
        }
    };
    let elapsed = t0.elapsed().as_secs_f64();
    log::info!("{} sweep samples in {elapsed:.2} s", samples.len());

    let labelled: Vec<SweepSample> = samples
        .iter()
        .map(|s| SweepSample {
            seed: labels[s.seed] as usize,
            ..*s
        })
        .collect();
    let profile = build_profile(&samples, settings.vol_bins, volume, settings.cumulative);
    let heat = heatmap(&samples, settings.vol_bins, settings.cond_bins, volume);
    writer.update(|m| {
        write_csv(&dir.join(SAMPLES_FILE), |w| write_samples_csv(&labelled, w))?;
        write_csv(&dir.join(PROFILE_FILE), |w| write_profile_csv(&profile, w))?;
        write_csv(&dir.join(HEATMAP_FILE), |w| write_heatmap_csv(&heat, w))?;
        let item = &mut m.items[0];
        item.status = ItemStatus::Done;
        item.timings.insert("wall_seconds".into(), elapsed);
        item.outputs = vec![SAMPLES_FILE.into(), PROFILE_FILE.into(), HEATMAP_FILE.into()];
        Ok(())
    })?;

    if let Some(lower) = lower {
        let upper = UpperEnvelope::new(&samples, volume);
        let outcome = gap_report(&upper, &lower);
        writer.update(|m| {
            let item = &mut m.items[1];
            match &outcome {
                Ok(rows) => {
                    write_csv(&dir.join(GAP_FILE), |w| write_gap_csv(rows, w))?;
                    item.status = ItemStatus::Done;
                    item.outputs = vec![GAP_FILE.into()];
                }
                Err(e) => {
                    log::error!("gap report: {e}");
                    item.status = ItemStatus::Failed;
                    item.error = Some(e.to_string());
                }
            }
            Ok(())
        })?;
    }
    Ok(writer.finish()?.status)
}
