//! Labeled collections of epochs.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::signal::{ChannelRole, Epoch};

/// The six sleep stages, in label-index order.
pub const SLEEP_STAGES: [&str; 6] = ["Wake", "S1", "S2", "S3", "S4", "REM"];

/// Ordered epochs with their source record and a label vocabulary.
///
/// All epochs share channel roles, length and sample rate, and every label
/// indexes into the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    epochs: Vec<Epoch>,
    record_ids: Vec<String>,
    vocabulary: Vec<String>,
}

impl Dataset {
    pub fn new(epochs: Vec<Epoch>, record_ids: Vec<String>, vocabulary: Vec<String>) -> Result<Self> {
        if vocabulary.is_empty() {
            return Err(Error::invalid("label vocabulary is empty"));
        }
        if epochs.len() != record_ids.len() {
            return Err(Error::invalid(format!(
                "{} epochs but {} record ids",
                epochs.len(),
                record_ids.len()
            )));
        }
        if let Some(first) = epochs.first() {
            for (i, e) in epochs.iter().enumerate() {
                if e.label() >= vocabulary.len() {
                    return Err(Error::invalid(format!(
                        "epoch {i} has label {} outside the {}-class vocabulary",
                        e.label(),
                        vocabulary.len()
                    )));
                }
                if e.roles() != first.roles()
                    || e.len() != first.len()
                    || e.sample_rate_hz() != first.sample_rate_hz()
                {
                    return Err(Error::invalid(format!(
                        "epoch {i} differs from epoch 0 in channels, length or rate"
                    )));
                }
            }
        }
        Ok(Self {
            epochs,
            record_ids,
            vocabulary,
        })
    }

    /// Dataset with the sleep-stage vocabulary.
    pub fn with_sleep_stages(epochs: Vec<Epoch>, record_ids: Vec<String>) -> Result<Self> {
        Self::new(
            epochs,
            record_ids,
            SLEEP_STAGES.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn epoch(&self, i: usize) -> &Epoch {
        &self.epochs[i]
    }

    pub fn record_ids(&self) -> &[String] {
        &self.record_ids
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn n_classes(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Channel roles shared by all epochs (empty for an empty dataset).
    pub fn channel_roles(&self) -> &[ChannelRole] {
        self.epochs.first().map(|e| e.roles()).unwrap_or(&[])
    }

    pub fn labels(&self) -> Vec<usize> {
        self.epochs.iter().map(Epoch::label).collect()
    }

    /// Epoch count per vocabulary class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vocabulary.len()];
        for e in &self.epochs {
            counts[e.label()] += 1;
        }
        counts
    }

    /// Distinct record ids in sorted order.
    pub fn unique_records(&self) -> Vec<String> {
        self.record_ids
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.vocabulary.iter().position(|v| v == name)
    }

    /// Sub-dataset of the given epoch indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            epochs: indices.iter().map(|&i| self.epochs[i].clone()).collect(),
            record_ids: indices.iter().map(|&i| self.record_ids[i].clone()).collect(),
            vocabulary: self.vocabulary.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<Epoch>, Vec<String>, Vec<String>) {
        (self.epochs, self.record_ids, self.vocabulary)
    }

    pub(crate) fn from_parts_trusted(
        epochs: Vec<Epoch>,
        record_ids: Vec<String>,
        vocabulary: Vec<String>,
    ) -> Self {
        Self {
            epochs,
            record_ids,
            vocabulary,
        }
    }
}
