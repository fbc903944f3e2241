use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

/// Encoded samples: an `n × m` matrix of latent features plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFeatures {
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    source_dataset: String,
}

impl LatentFeatures {
    pub fn new(
        features: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        source_dataset: impl Into<String>,
    ) -> Result<Self> {
        if features.shape().len() != 2 {
            return Err(Error::Data(format!(
                "feature matrix must be 2-D, got shape {:?}",
                features.shape()
            )));
        }
        if features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Data(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data("non-finite latent feature".into()));
        }
        Ok(LatentFeatures {
            features,
            labels,
            num_classes,
            source_dataset: source_dataset.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Latent dimension `m`.
    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn source_dataset(&self) -> &str {
        &self.source_dataset
    }

    /// The first `n` samples (all of them if `n` exceeds the count).
    pub fn take(&self, n: usize) -> LatentFeatures {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn subset(&self, idx: &[usize]) -> LatentFeatures {
        LatentFeatures {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            source_dataset: self.source_dataset.clone(),
        }
    }
}
