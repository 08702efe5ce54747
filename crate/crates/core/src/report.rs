//! End-to-end analysis of a snapshot manifest and report rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, IngestStats, Manifest, Observation};
use crate::metrics::{
    self, DomainMetrics, FrequencyReport, MetricSummary, UniformityReport, VersionCount,
};
use crate::sequences::{self, CorpusSummary, VersionSequence};
use crate::version::{VersionPattern, DEFAULT_PATTERN};

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_TOP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width bins over [0, 1]. The last bin is closed so 1.0 lands in it;
/// values outside the interval are clamped into the end bins.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    assert!(bins >= 1, "histogram needs at least one bin");
    let mut counts = vec![0usize; bins];
    for &x in values {
        let idx = ((x.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: i as f64 / bins as f64,
            upper: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub pattern: String,
    pub ignore_case: bool,
    pub bins: usize,
    pub top: usize,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Free-form run timestamp copied into the report metadata.
    pub timestamp: Option<String>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            pattern: DEFAULT_PATTERN.to_string(),
            ignore_case: false,
            bins: DEFAULT_BINS,
            top: DEFAULT_TOP,
            threads: None,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub index: usize,
    pub label: String,
    pub skipped: bool,
    pub stats: Option<IngestStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub pattern: String,
    pub ignore_case: bool,
    pub manifest_sha256: String,
    pub bins: usize,
    pub snapshots: Vec<SnapshotRecord>,
    pub skipped_snapshots: usize,
    pub observations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTables<T> {
    pub delta: T,
    pub phi: T,
    pub gamma: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub metadata: RunMetadata,
    pub corpus: CorpusSummary,
    pub metric_summary: MetricTables<MetricSummary>,
    pub uniformity: UniformityReport,
    pub frequencies: FrequencyReport,
    pub top_versions: Vec<VersionCount>,
    pub histograms: MetricTables<Vec<HistogramBin>>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_text(&self) -> String {
        render_text(self)
    }
}

/// Everything an analysis run produced.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub observations: Vec<Observation>,
    pub sequences: Vec<VersionSequence>,
    pub metrics: Vec<DomainMetrics>,
}

/// Ingests the manifest's snapshots and computes the full report.
pub fn run_analysis(manifest_path: &Path, options: &AnalysisOptions) -> Result<Analysis> {
    let manifest = Manifest::load(manifest_path)?;
    analyze_manifest(&manifest, options)
}

pub fn analyze_manifest(manifest: &Manifest, options: &AnalysisOptions) -> Result<Analysis> {
    if manifest.entries.len() < 2 {
        return Err(Error::TooFewSnapshots {
            needed: 2,
            found: manifest.entries.len(),
        });
    }
    let pattern = VersionPattern::with_case(&options.pattern, options.ignore_case)?;
    if options.bins == 0 {
        return Err(Error::InvalidLayout(
            "histograms need at least one bin".into(),
        ));
    }
    match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?
            .install(|| analyze_inner(manifest, &pattern, options)),
        None => analyze_inner(manifest, &pattern, options),
    }
}

fn analyze_inner(
    manifest: &Manifest,
    pattern: &VersionPattern,
    options: &AnalysisOptions,
) -> Result<Analysis> {
    let ingested = ingest::ingest_manifest(manifest, pattern)?;
    let usable = ingested.stats.len();
    if usable < 2 {
        return Err(Error::TooFewSnapshots {
            needed: 2,
            found: usable,
        });
    }

    let mut snapshots: Vec<SnapshotRecord> = ingested
        .stats
        .iter()
        .map(|(d, s)| SnapshotRecord {
            index: d.index,
            label: d.label.clone(),
            skipped: false,
            stats: Some(*s),
        })
        .chain(ingested.skipped.iter().map(|d| SnapshotRecord {
            index: d.index,
            label: d.label.clone(),
            skipped: true,
            stats: None,
        }))
        .collect();
    snapshots.sort_by_key(|s| s.index);

    let observations = ingested.observations;
    let sequences = sequences::pool(&observations, manifest.entries.len());
    let corpus = sequences::summarize(&sequences)?;
    let metrics = metrics::corpus_metrics(&sequences)?;
    let uniformity = metrics::uniformity(&sequences)?;
    let frequencies = metrics::frequencies(&observations, &sequences);

    let column = |f: fn(&DomainMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
    let (delta, phi, gamma) = (column(|m| m.delta), column(|m| m.phi), column(|m| m.gamma));

    let report = AnalysisReport {
        metadata: RunMetadata {
            pattern: options.pattern.clone(),
            ignore_case: options.ignore_case,
            manifest_sha256: manifest.digest.clone(),
            bins: options.bins,
            skipped_snapshots: ingested.skipped.len(),
            snapshots,
            observations: observations.len(),
            generated_at: options.timestamp.clone(),
        },
        corpus,
        metric_summary: MetricTables {
            delta: MetricSummary::of(&delta),
            phi: MetricSummary::of(&phi),
            gamma: MetricSummary::of(&gamma),
        },
        uniformity,
        top_versions: frequencies.top(options.top),
        frequencies,
        histograms: MetricTables {
            delta: histogram(&delta, options.bins),
            phi: histogram(&phi, options.bins),
            gamma: histogram(&gamma, options.bins),
        },
    };
    Ok(Analysis {
        report,
        observations,
        sequences,
        metrics,
    })
}

fn render_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let md = &r.metadata;
    let _ = writeln!(out, "pattern            {}", md.pattern);
    let _ = writeln!(out, "manifest sha256    {}", md.manifest_sha256);
    if let Some(ts) = &md.generated_at {
        let _ = writeln!(out, "generated at       {ts}");
    }
    let _ = writeln!(
        out,
        "snapshots          {} ({} skipped)",
        md.snapshots.len(),
        md.skipped_snapshots
    );
    for s in &md.snapshots {
        match &s.stats {
            Some(st) => {
                let _ = writeln!(
                    out,
                    "  [{:>2}] {:<16} rows {:>8}  matched {:>8}  duplicates {:>8}  malformed {:>6}",
                    s.index,
                    s.label,
                    st.rows_read,
                    st.domains_matched,
                    st.duplicates_skipped,
                    st.rows_malformed
                );
            }
            None => {
                let _ = writeln!(out, "  [{:>2}] {:<16} skipped (empty)", s.index, s.label);
            }
        }
    }
    let _ = writeln!(out, "observations       {}", md.observations);
    let _ = writeln!(out);

    let c = &r.corpus;
    let _ = writeln!(out, "domains (m)        {}", c.domain_count);
    let _ = writeln!(
        out,
        "sequence length    mean {:.2}  std {:.2}",
        c.mean_length, c.std_length
    );
    let _ = writeln!(
        out,
        "state space size   mean {:.2}  std {:.2}",
        c.mean_states, c.std_states
    );
    let _ = writeln!(out);

    let _ = writeln!(out, "metric   mean      std");
    for (name, s) in [
        ("delta", &r.metric_summary.delta),
        ("phi", &r.metric_summary.phi),
        ("gamma", &r.metric_summary.gamma),
    ] {
        let _ = writeln!(out, "{name:<8} {:<9.4} {:.4}", s.mean, s.std);
    }
    let _ = writeln!(out);

    let u = &r.uniformity;
    let _ = writeln!(out, "subset   domains   unique   share of m");
    for (name, s) in [("|S|=1", &u.single_state), ("|S|>1", &u.multi_state)] {
        let _ = writeln!(
            out,
            "{name:<8} {:<9} {:<8} {:.2}%",
            s.domains, s.unique_sequences, s.share_of_m
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "final version major branch");
    for b in &r.frequencies.final_major_share {
        let _ = writeln!(out, "  {:<4} {:>8} {:>7.2}%", b.major, b.domains, b.share);
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "most frequent versions");
    for vc in &r.top_versions {
        let _ = writeln!(out, "  {:<12} {:>8}", vc.version.to_string(), vc.count);
    }
    out
}
