//! Adoption metrics per domain and across the corpus.
//!
//! * prevalence δ: mean of `1 − p_ii` over a domain's states
//! * downgrade rate φ: share of adjacent steps that go to a lower version
//! * communication rate γ: distinct state pairs with transitions both ways,
//!   divided by the number of steps
//!
//! Self-loops never count as communicating pairs.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtmc::{self, TransitionModel};
use crate::error::{Error, Result};
use crate::ingest::Observation;
use crate::sequences::{mean_std, VersionSequence};
use crate::version::{classify_transition, Version};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMetrics {
    pub domain: String,
    pub r: usize,
    pub state_count: usize,
    pub delta: f64,
    pub downgrades: usize,
    pub phi: f64,
    pub communicating_pairs: usize,
    pub gamma: f64,
}

pub fn prevalence(model: &TransitionModel) -> f64 {
    let c = dtmc::self_loop_complement(model);
    if c.is_empty() {
        return 0.0;
    }
    c.iter().sum::<f64>() / c.len() as f64
}

/// Downgrade count `d` and `φ = d / (r − 1)`.
pub fn downgrade_rate(seq: &VersionSequence) -> (usize, f64) {
    let d = seq
        .versions
        .windows(2)
        .filter(|w| classify_transition(&w[0], &w[1]).is_downgrade())
        .count();
    let steps = seq.versions.len().saturating_sub(1);
    (d, ratio(d, steps))
}

/// Communicating pair count and `γ = pairs / (r − 1)`.
pub fn communicating_rate(model: &TransitionModel, r: usize) -> (usize, f64) {
    let pairs = model
        .counts
        .keys()
        .filter(|&&(i, j)| i < j && model.count(j, i) > 0)
        .count();
    (pairs, ratio(pairs, r.saturating_sub(1)))
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn domain_metrics(seq: &VersionSequence) -> Result<DomainMetrics> {
    let model = dtmc::estimate(seq)?;
    let (downgrades, phi) = downgrade_rate(seq);
    let (communicating_pairs, gamma) = communicating_rate(&model, seq.len());
    Ok(DomainMetrics {
        domain: seq.domain.clone(),
        r: seq.len(),
        state_count: model.state_count(),
        delta: prevalence(&model),
        downgrades,
        phi,
        communicating_pairs,
        gamma,
    })
}

/// Metrics for every sequence, in input order.
pub fn corpus_metrics(sequences: &[VersionSequence]) -> Result<Vec<DomainMetrics>> {
    sequences.par_iter().map(domain_metrics).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetUniformity {
    pub domains: usize,
    pub unique_sequences: usize,
    /// Unique sequences as a percentage of the whole corpus.
    pub share_of_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub m: usize,
    pub single_state: SubsetUniformity,
    pub multi_state: SubsetUniformity,
}

/// Distinct version lists among domains with one state and with several.
/// Repetitions matter: `[a, a, b]` and `[a, b]` are different sequences.
pub fn uniformity(sequences: &[VersionSequence]) -> Result<UniformityReport> {
    if sequences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let m = sequences.len();
    let mut single: HashSet<&[Version]> = HashSet::new();
    let mut multi: HashSet<&[Version]> = HashSet::new();
    let (mut n_single, mut n_multi) = (0, 0);
    for s in sequences {
        if s.state_count() == 1 {
            n_single += 1;
            single.insert(&s.versions);
        } else {
            n_multi += 1;
            multi.insert(&s.versions);
        }
    }
    let subset = |domains: usize, unique: usize| SubsetUniformity {
        domains,
        unique_sequences: unique,
        share_of_m: unique as f64 / m as f64 * 100.0,
    };
    Ok(UniformityReport {
        m,
        single_state: subset(n_single, single.len()),
        multi_state: subset(n_multi, multi.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionCount {
    pub version: Version,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchShare {
    pub major: u64,
    pub domains: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    /// Occurrences per version over all observations, in version order.
    pub version_counts: Vec<VersionCount>,
    /// Share of domains (percent) per major branch of their final version.
    pub final_major_share: Vec<BranchShare>,
}

impl FrequencyReport {
    /// The `n` most frequent versions; ties go to the higher version.
    pub fn top(&self, n: usize) -> Vec<VersionCount> {
        let mut v = self.version_counts.clone();
        v.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| b.version.cmp(&a.version))
        });
        v.truncate(n);
        v
    }
}

pub fn frequencies(observations: &[Observation], sequences: &[VersionSequence]) -> FrequencyReport {
    let mut counts: BTreeMap<&Version, u64> = BTreeMap::new();
    for o in observations {
        *counts.entry(&o.version).or_insert(0) += 1;
    }
    let mut finals: BTreeMap<u64, usize> = BTreeMap::new();
    for s in sequences {
        *finals.entry(s.last().major).or_insert(0) += 1;
    }
    let m = sequences.len();
    FrequencyReport {
        version_counts: counts
            .into_iter()
            .map(|(v, count)| VersionCount {
                version: v.clone(),
                count,
            })
            .collect(),
        final_major_share: finals
            .into_iter()
            .map(|(major, domains)| BranchShare {
                major,
                domains,
                share: domains as f64 / m as f64 * 100.0,
            })
            .collect(),
    }
}

/// Mean and population standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values.iter().copied());
        MetricSummary { mean, std }
    }
}

/// Writes `domain,r,state_count,delta,d,phi,gamma` with six decimals.
pub fn write_metrics_csv<W: Write>(out: W, metrics: &[DomainMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["domain", "r", "state_count", "delta", "d", "phi", "gamma"])?;
    for m in metrics {
        w.write_record([
            m.domain.clone(),
            m.r.to_string(),
            m.state_count.to_string(),
            format!("{:.6}", m.delta),
            m.downgrades.to_string(),
            format!("{:.6}", m.phi),
            format!("{:.6}", m.gamma),
        ])?;
    }
    w.flush()?;
    Ok(())
}
