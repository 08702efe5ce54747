use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use adoption_collector::{CollectOptions, DEFAULT_USER_AGENT};
use adoption_core::ingest::{self, ColumnLayout, SnapshotDescriptor};
use adoption_core::metrics::{self, MetricSummary};
use adoption_core::report::{self, AnalysisOptions, DEFAULT_BINS, DEFAULT_TOP};
use adoption_core::sequences;
use adoption_core::{VersionPattern, DEFAULT_PATTERN};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

const PATTERN_ENV: &str = "ADOPTION_TRACE_PATTERN";

#[derive(Parser, Debug)]
#[command(
    name = "adoption-trace",
    version,
    about = "Trace software release adoption across web domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest a snapshot manifest and report adoption metrics.
    Analyze(AnalyzeArgs),
    /// Extract one snapshot into `snapshot_index,domain,version` rows.
    Extract(ExtractArgs),
    /// Summarize a `domain,snapshot_index,version` sequence export.
    Summarize(SummarizeArgs),
    /// Request `http://<domain>/` for each listed domain and save the headers.
    Fetch(FetchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Text,
}

#[derive(clap::Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Version expression (first match per header text wins).
    #[arg(long, env = PATTERN_ENV)]
    pattern: Option<String>,
    #[arg(long)]
    ignore_case: bool,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    per_domain_csv: Option<PathBuf>,
    #[arg(long)]
    sequences_csv: Option<PathBuf>,
    /// Dump every fitted transition model as a JSON array.
    #[arg(long)]
    models_json: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    top: Option<usize>,
    /// Record the current time in the report metadata.
    #[arg(long)]
    timestamp: bool,
    /// TOML file with defaults for pattern, ignore_case, bins, top, threads and format.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct Config {
    pattern: Option<String>,
    ignore_case: Option<bool>,
    bins: Option<usize>,
    top: Option<usize>,
    threads: Option<usize>,
    format: Option<Format>,
}

#[derive(clap::Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// `url=<column>,header=<column>` or `url=<column>,raw=<column>`.
    #[arg(long)]
    layout: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = PATTERN_ENV)]
    pattern: Option<String>,
    #[arg(long)]
    ignore_case: bool,
    /// Snapshot index written to every row.
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(clap::Args, Debug)]
struct SummarizeArgs {
    #[arg(long)]
    sequences: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args, Debug)]
struct FetchArgs {
    /// One domain per line; `#` starts a comment.
    #[arg(long)]
    domains: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long, default_value_t = 8)]
    max_parallel: usize,
    #[arg(long, default_value = DEFAULT_USER_AGENT)]
    user_agent: String,
    /// Pause in milliseconds before each request.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let config: Config = match &args.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str(&text)
                .map_err(|e| usage(format!("invalid config {}: {e}", p.display())))?
        }
        None => Config::default(),
    };
    let options = AnalysisOptions {
        pattern: args
            .pattern
            .or(config.pattern)
            .unwrap_or_else(|| DEFAULT_PATTERN.to_string()),
        ignore_case: args.ignore_case || config.ignore_case.unwrap_or(false),
        bins: args.bins.or(config.bins).unwrap_or(DEFAULT_BINS),
        top: args.top.or(config.top).unwrap_or(DEFAULT_TOP),
        threads: args.threads.or(config.threads),
        timestamp: args
            .timestamp
            .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    };
    if options.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    if options.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let format = args.format.or(config.format).unwrap_or(Format::Text);

    let analysis = report::run_analysis(&args.manifest, &options)?;
    let json = analysis.report.to_json()?;
    if let Some(path) = &args.out {
        fs::write(path, &json).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.per_domain_csv {
        metrics::write_metrics_csv(create(path)?, &analysis.metrics)?;
    }
    if let Some(path) = &args.sequences_csv {
        sequences::write_sequences(create(path)?, &analysis.sequences)?;
    }
    if let Some(path) = &args.models_json {
        let models = analysis
            .sequences
            .iter()
            .map(|s| adoption_core::estimate(s).map(|m| m.to_export()))
            .collect::<adoption_core::Result<Vec<_>>>()?;
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &models)?;
        w.flush()?;
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => out.write_all(json.as_bytes())?,
        Format::Text => out.write_all(analysis.report.to_text().as_bytes())?,
    }
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let layout: ColumnLayout = args.layout.parse()?;
    let pattern = VersionPattern::with_case(
        args.pattern.as_deref().unwrap_or(DEFAULT_PATTERN),
        args.ignore_case,
    )?;
    let desc = SnapshotDescriptor {
        index: args.index,
        label: args.snapshot.display().to_string(),
        path: args.snapshot.clone(),
    };
    let (observations, stats) = ingest::ingest_snapshot(&desc, &pattern, &layout)?;
    ingest::write_observations(create(&args.out)?, &observations)?;
    eprintln!(
        "{}: {} rows, {} domains matched, {} duplicates skipped, {} malformed",
        desc.label,
        stats.rows_read,
        stats.domains_matched,
        stats.duplicates_skipped,
        stats.rows_malformed
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct SequenceSummary {
    corpus: sequences::CorpusSummary,
    uniformity: metrics::UniformityReport,
    delta: MetricSummary,
    phi: MetricSummary,
    gamma: MetricSummary,
}

fn summarize(args: SummarizeArgs) -> Result<()> {
    let file = File::open(&args.sequences)
        .with_context(|| format!("cannot open {}", args.sequences.display()))?;
    let seqs = sequences::read_sequences(file)?;
    let per_domain = metrics::corpus_metrics(&seqs)?;
    let col = |f: fn(&metrics::DomainMetrics) -> f64| {
        MetricSummary::of(&per_domain.iter().map(f).collect::<Vec<_>>())
    };
    let summary = SequenceSummary {
        corpus: sequences::summarize(&seqs)?,
        uniformity: metrics::uniformity(&seqs)?,
        delta: col(|m| m.delta),
        phi: col(|m| m.phi),
        gamma: col(|m| m.gamma),
    };
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Text => {
            let c = &summary.corpus;
            println!("domains (m)        {}", c.domain_count);
            println!(
                "sequence length    mean {:.2}  std {:.2}",
                c.mean_length, c.std_length
            );
            println!(
                "state space size   mean {:.2}  std {:.2}",
                c.mean_states, c.std_states
            );
            for (name, s) in [
                ("delta", summary.delta),
                ("phi", summary.phi),
                ("gamma", summary.gamma),
            ] {
                println!("{name:<18} mean {:.4}  std {:.4}", s.mean, s.std);
            }
            let u = &summary.uniformity;
            println!(
                "unique sequences   |S|=1 {} ({:.2}%)  |S|>1 {} ({:.2}%)",
                u.single_state.unique_sequences,
                u.single_state.share_of_m,
                u.multi_state.unique_sequences,
                u.multi_state.share_of_m
            );
        }
    }
    Ok(())
}

fn fetch(args: FetchArgs) -> Result<()> {
    let text = fs::read_to_string(&args.domains)
        .with_context(|| format!("cannot read {}", args.domains.display()))?;
    let domains = adoption_collector::parse_domain_list(&text);
    if domains.is_empty() {
        return Err(usage(format!(
            "{} lists no domains",
            args.domains.display()
        )));
    }
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(usage("--timeout must be positive"));
    }
    let opts = CollectOptions {
        timeout: Duration::from_secs_f64(args.timeout),
        max_parallel: args.max_parallel.max(1),
        user_agent: args.user_agent,
        delay: Duration::from_millis(args.delay_ms),
    };
    let results = adoption_collector::collect(&domains, &opts, &args.out)?;
    let failed = results
        .iter()
        .filter(|r| matches!(r.status, adoption_collector::FetchStatus::Error(_)))
        .count();
    eprintln!(
        "fetched {} domains ({failed} failed) into {}",
        results.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<adoption_core::Error>() {
        Some(e) if e.is_usage() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Extract(a) => extract(a),
        Command::Summarize(a) => summarize(a),
        Command::Fetch(a) => fetch(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
