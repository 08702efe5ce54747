//! Maximum likelihood estimation of a per-domain discrete-time Markov chain.
//!
//! States are the distinct versions of one sequence, indexed in order of
//! first appearance. Transition counts are kept sparsely as exact integers;
//! probabilities are derived from them on demand, so a supported row sums to
//! one up to float rounding and an unsupported row (a state only seen as the
//! final observation) is all zeros.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::VersionSequence;
use crate::version::Version;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionModel {
    pub domain: String,
    /// Distinct versions in first-appearance order.
    pub states: Vec<Version>,
    /// Transition counts keyed by (from, to) state index; zero counts absent.
    pub counts: BTreeMap<(usize, usize), u64>,
    /// Outgoing transitions per state.
    pub row_totals: Vec<u64>,
}

impl TransitionModel {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0)
    }

    /// Estimated probability of moving from state `from` to state `to`;
    /// zero when `from` has no outgoing transitions.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        match self.row_totals[from] {
            0 => 0.0,
            total => self.count(from, to) as f64 / total as f64,
        }
    }

    /// Number of observed transitions, r − 1.
    pub fn transitions(&self) -> u64 {
        self.row_totals.iter().sum()
    }

    pub fn dense_counts(&self) -> Vec<Vec<u64>> {
        let n = self.state_count();
        (0..n)
            .map(|i| (0..n).map(|j| self.count(i, j)).collect())
            .collect()
    }

    pub fn dense_probs(&self) -> Vec<Vec<f64>> {
        let n = self.state_count();
        (0..n)
            .map(|i| (0..n).map(|j| self.prob(i, j)).collect())
            .collect()
    }

    pub fn to_export(&self) -> ModelExport {
        ModelExport {
            domain: self.domain.clone(),
            states: self.states.clone(),
            counts: self.dense_counts(),
            probs: self.dense_probs(),
        }
    }
}

/// Debug export shape for a single model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub domain: String,
    pub states: Vec<Version>,
    pub counts: Vec<Vec<u64>>,
    pub probs: Vec<Vec<f64>>,
}

pub fn estimate(seq: &VersionSequence) -> Result<TransitionModel> {
    if seq.versions.len() < 2 {
        return Err(Error::SequenceTooShort(seq.versions.len()));
    }
    let mut index: HashMap<&Version, usize> = HashMap::new();
    let mut states = Vec::new();
    let path: Vec<usize> = seq
        .versions
        .iter()
        .map(|v| {
            *index.entry(v).or_insert_with(|| {
                states.push(v.clone());
                states.len() - 1
            })
        })
        .collect();

    let mut counts = BTreeMap::new();
    let mut row_totals = vec![0u64; states.len()];
    for w in path.windows(2) {
        *counts.entry((w[0], w[1])).or_insert(0) += 1;
        row_totals[w[0]] += 1;
    }
    Ok(TransitionModel {
        domain: seq.domain.clone(),
        states,
        counts,
        row_totals,
    })
}

/// `1 − p_ii` for every state, in state order.
pub fn self_loop_complement(model: &TransitionModel) -> Vec<f64> {
    (0..model.state_count())
        .map(|i| 1.0 - model.prob(i, i))
        .collect()
}
