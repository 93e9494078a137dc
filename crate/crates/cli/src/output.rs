use std::path::Path;

use serde::{Deserialize, Serialize};
use sofri_core::delta::DeltaEstimate;
use sofri_core::io::{write_json, CsvSink};
use sofri_core::posterior::{
    cluster_contrast, extract_clusters, summarize_beta, summarize_scalars, Contrast, PosteriorError,
};
use sofri_core::{BasisSystem, PosteriorDraws};

use crate::config::{RunConfig, SummarySection, Transform};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARIZE_MANIFEST_FILE: &str = "summarize_manifest.json";
pub const BETA_FILE: &str = "beta_summary.csv";
pub const SCALARS_FILE: &str = "scalars.csv";
pub const CLUSTERS_FILE: &str = "clusters.csv";
pub const CLUSTER_MEANS_FILE: &str = "cluster_means.csv";
pub const CONTRAST_FILE: &str = "contrast.json";
pub const DELTA_FILE: &str = "delta.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaInfo {
    pub bandwidth: f64,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisInfo {
    pub grid: Vec<f64>,
    pub n_basis: usize,
    pub degree: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub prepare_secs: f64,
    pub sampling_secs: f64,
    pub summary_secs: f64,
    pub total_secs: f64,
}

/// What a `fit` run did, enough to rebuild every summary from its draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub build: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub delta: DeltaInfo,
    pub basis: BasisInfo,
    pub ids: Vec<String>,
    pub covariates: Vec<String>,
    pub n_draws: usize,
    pub timing: Timing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_clusters: usize,
    pub sizes: Vec<usize>,
    /// Sizes padded with empty components up to the mixture truncation.
    pub padded_sizes: Vec<usize>,
    pub pair: Option<[usize; 2]>,
    pub contrast: Option<Contrast>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn num(x: f64) -> String {
    x.to_string()
}

/// `5%` style label of a quantile.
fn percent(p: f64) -> String {
    format!("{}%", (p * 100.0 * 1e6).round() / 1e6)
}

pub fn write_delta_csv(path: &Path, delta: &DeltaEstimate) -> Result<(), CliError> {
    let mut sink = CsvSink::create(path, &["s", "raw", "smoothed"])?;
    for (j, s) in delta.grid.points().iter().enumerate() {
        sink.record([num(*s), num(delta.raw[j]), num(delta.smoothed[j])])?;
    }
    Ok(sink.finish()?)
}

/// Writes β(s) bands, scalar summaries, clusters and the cluster contrast.
/// Cluster outputs are skipped when the draws carry no allocations.
pub fn write_summaries(
    dir: &Path,
    draws: &PosteriorDraws,
    basis: &BasisSystem,
    covariates: &[String],
    ids: &[String],
    summary: &SummarySection,
) -> Result<(), CliError> {
    let level = summary.level;
    let beta = summarize_beta(draws, basis, level)?;
    let mut sink = CsvSink::create(&dir.join(BETA_FILE), &["s", "mean", "lower", "upper"])?;
    for (j, s) in beta.grid.points().iter().enumerate() {
        sink.record([num(*s), num(beta.mean[j]), num(beta.lower[j]), num(beta.upper[j])])?;
    }
    sink.finish()?;

    let scalars = summarize_scalars(draws, level)?;
    let names = scalars.iter().map(|s| match s.name.strip_prefix("beta_z_") {
        Some(j) => j
            .parse::<usize>()
            .ok()
            .and_then(|j| covariates.get(j - 1))
            .map_or_else(|| s.name.clone(), |c| format!("beta_{c}")),
        None => s.name.clone(),
    });
    let header: Vec<String> = std::iter::once("stat".to_string()).chain(names).collect();
    let mut sink = CsvSink::create(&dir.join(SCALARS_FILE), &header)?;
    let tail = (1.0 - level) / 2.0;
    type Pick = fn(&sofri_core::posterior::ScalarSummary) -> f64;
    let rows: [(String, Pick); 3] = [
        ("mean".into(), |s| s.mean),
        (percent(tail), |s| s.lower),
        (percent(1.0 - tail), |s| s.upper),
    ];
    for (label, pick) in rows {
        sink.record(std::iter::once(label).chain(scalars.iter().map(|s| num(pick(s)))))?;
    }
    sink.finish()?;

    let clusters = match extract_clusters(draws, basis) {
        Ok(c) => c,
        Err(PosteriorError::NoAllocationSnapshots) => return Ok(()),
        Err(e) => return Err(e.into()),
    };
    let mut sink = CsvSink::create(&dir.join(CLUSTERS_FILE), &["id", "label"])?;
    for (id, label) in ids.iter().zip(&clusters.labels) {
        sink.record([id.clone(), label.to_string()])?;
    }
    sink.finish()?;

    let header: Vec<String> = std::iter::once("s".to_string())
        .chain((1..=clusters.n_clusters).map(|c| format!("cluster_{c}")))
        .collect();
    let mut sink = CsvSink::create(&dir.join(CLUSTER_MEANS_FILE), &header)?;
    for (j, s) in basis.grid().points().iter().enumerate() {
        let row = clusters.cluster_mean_curves.column(j);
        sink.record(std::iter::once(num(*s)).chain(row.iter().map(|v| num(*v))))?;
    }
    sink.finish()?;

    let pair = summary.contrast.or((clusters.n_clusters >= 2).then_some([1, 2]));
    // The cluster count is only known after sampling, so a requested pair that
    // does not exist is reported rather than failing the whole run.
    let (contrast, note) = match pair.map(|[a, b]| cluster_contrast(draws, &clusters, a, b, level)) {
        None => (None, None),
        Some(Ok(c)) => (Some(c), None),
        Some(Err(e @ PosteriorError::EmptyCluster(_))) => {
            let note = format!("contrast skipped: {e} ({} clusters found)", clusters.n_clusters);
            eprintln!("warning: {note}");
            (None, Some(note))
        }
        Some(Err(e)) => return Err(e.into()),
    };
    let report = ClusterReport {
        n_clusters: clusters.n_clusters,
        sizes: clusters.sizes.clone(),
        padded_sizes: clusters.padded_sizes(),
        pair,
        contrast,
        note,
    };
    write_json(&dir.join(CONTRAST_FILE), &report)?;
    Ok(())
}
