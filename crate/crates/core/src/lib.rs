//! Tracing software release adoption across web domains.
//!
//! The pipeline reads crawl snapshots ([`ingest`]), joins each domain's
//! version sightings into a sequence ([`sequences`]), fits a first-order
//! Markov chain per domain ([`dtmc`]) and summarizes how often domains
//! upgrade, downgrade and share upgrade paths ([`metrics`], [`report`]).

pub mod dtmc;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod sequences;
pub mod version;

pub use dtmc::{estimate, self_loop_complement, TransitionModel};
pub use error::{Error, Result};
pub use ingest::{
    extract_domain, ingest_snapshot, ColumnLayout, IngestStats, Manifest, Observation,
    SnapshotDescriptor,
};
pub use metrics::{communicating_rate, downgrade_rate, prevalence, DomainMetrics};
pub use report::{histogram, run_analysis, AnalysisOptions, AnalysisReport};
pub use sequences::{pool, summarize, VersionSequence};
pub use version::{
    classify_transition, compare, extract_version, DowngradeKind, Version, VersionPattern,
    DEFAULT_PATTERN,
};
