//! JSON reports emitted by `evaluate` and `run`.

use std::collections::BTreeMap;

use pawprint_core::eval::CrossValSummary;
use pawprint_core::experiment::{ExperimentOutcome, FoldOutcome};
use pawprint_core::{ConfusionMatrix, PerClassStats};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub worst: f64,
    pub best: f64,
    pub sigma: f64,
    pub average: f64,
    pub balanced: f64,
}

impl From<&PerClassStats> for StatsReport {
    fn from(s: &PerClassStats) -> Self {
        StatsReport {
            per_class_accuracy: s.per_class_accuracy.iter().cloned().collect(),
            worst: s.worst,
            best: s.best,
            sigma: s.sigma,
            average: s.average,
            balanced: s.balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionReport {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub row_normalized: Vec<Vec<f64>>,
}

impl From<&ConfusionMatrix> for ConfusionReport {
    fn from(m: &ConfusionMatrix) -> Self {
        ConfusionReport {
            labels: m.labels().to_vec(),
            counts: (0..m.size()).map(|i| m.row(i).to_vec()).collect(),
            row_normalized: m.row_normalized(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub probes: usize,
    pub stats: StatsReport,
    pub confusion: ConfusionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanAccuracy {
    pub averaged: f64,
    pub balanced: f64,
}

impl From<&CrossValSummary> for MeanAccuracy {
    fn from(s: &CrossValSummary) -> Self {
        MeanAccuracy {
            averaged: s.mean_averaged,
            balanced: s.mean_balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    /// Includes mirrored copies when augmentation is on.
    pub train_images: usize,
    pub test_images: usize,
    /// Probes whose re-ranking fell back to the unassisted scores.
    pub fallbacks: Vec<String>,
    pub default: StatsReport,
    pub assisted: StatsReport,
}

impl From<&FoldOutcome> for FoldReport {
    fn from(f: &FoldOutcome) -> Self {
        FoldReport {
            fold: f.fold,
            train_images: f.train_ids.len(),
            test_images: f.test_ids.len(),
            fallbacks: f.fallbacks.clone(),
            default: (&f.default.stats).into(),
            assisted: (&f.assisted.stats).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub generated_at: u64,
    pub config: RunConfig,
    pub images: usize,
    /// Manifest rows skipped because they were augmented copies.
    pub skipped_augmented: usize,
    pub sparse_identities: Vec<String>,
    pub folds: Vec<FoldReport>,
    pub default: MeanAccuracy,
    pub assisted: MeanAccuracy,
    pub default_confusion: ConfusionReport,
    pub assisted_confusion: ConfusionReport,
}

impl RunReport {
    pub fn new(
        generated_at: u64,
        config: RunConfig,
        images: usize,
        skipped_augmented: usize,
        outcome: &ExperimentOutcome,
    ) -> Self {
        RunReport {
            generated_at,
            config,
            images,
            skipped_augmented,
            sparse_identities: outcome.sparse_identities.clone(),
            folds: outcome.folds.iter().map(FoldReport::from).collect(),
            default: (&outcome.default).into(),
            assisted: (&outcome.assisted).into(),
            default_confusion: (&outcome.pooled_confusion(false)).into(),
            assisted_confusion: (&outcome.pooled_confusion(true)).into(),
        }
    }
}
