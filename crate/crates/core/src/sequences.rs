//! Per-domain version sequences pooled across snapshots.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Observation;
use crate::version::Version;

/// Versions a domain ran, in snapshot order. Always at least two long.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionSequence {
    pub domain: String,
    pub versions: Vec<Version>,
    pub snapshot_indices: Vec<usize>,
}

impl VersionSequence {
    /// Builds a sequence, checking length and index ordering.
    pub fn new(
        domain: impl Into<String>,
        versions: Vec<Version>,
        snapshot_indices: Vec<usize>,
    ) -> Result<Self> {
        if versions.len() < 2 {
            return Err(Error::SequenceTooShort(versions.len()));
        }
        assert_eq!(
            versions.len(),
            snapshot_indices.len(),
            "parallel lists differ in length"
        );
        assert!(
            snapshot_indices.windows(2).all(|w| w[0] < w[1]),
            "snapshot indices must be strictly increasing"
        );
        Ok(VersionSequence {
            domain: domain.into(),
            versions,
            snapshot_indices,
        })
    }

    /// Convenience constructor numbering observations 0..r.
    pub fn from_versions(domain: impl Into<String>, versions: Vec<Version>) -> Result<Self> {
        let idx = (0..versions.len()).collect();
        Self::new(domain, versions, idx)
    }

    /// Sequence length r.
    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    /// Number of distinct versions, |S|.
    pub fn state_count(&self) -> usize {
        self.versions.iter().collect::<HashSet<_>>().len()
    }

    pub fn last(&self) -> &Version {
        self.versions
            .last()
            .expect("sequences hold at least two versions")
    }
}

/// Groups observations by domain and keeps domains seen at least twice.
///
/// Missing snapshots leave no placeholder: the sightings that exist are
/// concatenated in snapshot order. The result is sorted by domain and does
/// not depend on the order of `observations`.
pub fn pool(observations: &[Observation], snapshot_count: usize) -> Vec<VersionSequence> {
    let mut by_domain: BTreeMap<&str, Vec<(usize, &Version)>> = BTreeMap::new();
    for o in observations {
        if o.snapshot_index >= snapshot_count {
            log::warn!(
                "ignoring observation of {} from snapshot {} (only {} snapshots)",
                o.domain,
                o.snapshot_index,
                snapshot_count
            );
            continue;
        }
        by_domain
            .entry(&o.domain)
            .or_default()
            .push((o.snapshot_index, &o.version));
    }
    by_domain
        .into_iter()
        .filter_map(|(domain, mut sightings)| {
            sightings.sort();
            sightings.dedup_by_key(|(idx, _)| *idx);
            if sightings.len() < 2 {
                return None;
            }
            let (snapshot_indices, versions) =
                sightings.into_iter().map(|(i, v)| (i, v.clone())).unzip();
            Some(VersionSequence {
                domain: domain.to_string(),
                versions,
                snapshot_indices,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub domain_count: usize,
    pub mean_length: f64,
    pub std_length: f64,
    pub mean_states: f64,
    pub std_states: f64,
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

pub fn summarize(sequences: &[VersionSequence]) -> Result<CorpusSummary> {
    if sequences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mean_length, std_length) = mean_std(sequences.iter().map(|s| s.len() as f64));
    let (mean_states, std_states) = mean_std(sequences.iter().map(|s| s.state_count() as f64));
    Ok(CorpusSummary {
        domain_count: sequences.len(),
        mean_length,
        std_length,
        mean_states,
        std_states,
    })
}

/// Writes `domain,snapshot_index,version`, sorted by domain then snapshot.
pub fn write_sequences<W: Write>(out: W, sequences: &[VersionSequence]) -> Result<()> {
    let mut sorted: Vec<&VersionSequence> = sequences.iter().collect();
    sorted.sort_by(|a, b| a.domain.cmp(&b.domain));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["domain", "snapshot_index", "version"])?;
    for s in sorted {
        for (idx, v) in s.snapshot_indices.iter().zip(&s.versions) {
            w.write_record([s.domain.as_str(), &idx.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct SequenceRow {
    domain: String,
    snapshot_index: usize,
    version: Version,
}

/// Reads a sequence export back; domains with a single row are dropped.
pub fn read_sequences<R: Read>(input: R) -> Result<Vec<VersionSequence>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut observations = Vec::new();
    let mut max_index = 0;
    for row in reader.deserialize() {
        let row: SequenceRow = row?;
        max_index = max_index.max(row.snapshot_index);
        observations.push(Observation {
            snapshot_index: row.snapshot_index,
            domain: row.domain,
            version: row.version,
        });
    }
    Ok(pool(&observations, max_index + 1))
}
