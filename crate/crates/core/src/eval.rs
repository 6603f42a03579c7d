//! Rank-1 evaluation: confusion matrices, averaged and balanced accuracy,
//! per-class spread statistics and the seeded k-fold splitter.
//!
//! Averaged accuracy is `TP / (TP + FN)` over every probe. Balanced accuracy
//! is the unweighted mean of the per-class rates, so the two agree whenever
//! every class contributes the same number of probes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matcher::ScoreVector;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("probe `{0}` has an empty ranking")]
    EmptyRanking(String),
    #[error("probe `{probe}` ranks `{label}` twice")]
    DuplicateRankedLabel { probe: String, label: String },
    #[error("label `{0}` is not in the class list")]
    UnknownLabel(String),
    #[error("class list contains `{0}` twice")]
    DuplicateClass(String),
    #[error("no probes were evaluated")]
    EmptyEvaluation,
    #[error("class `{0}` has no evaluated probes")]
    EmptyClassRow(String),
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("image id `{0}` appears more than once")]
    DuplicateImageId(String),
    #[error("no fold results to average")]
    NoFolds,
}

/// One probe's ranked prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub probe_id: String,
    pub true_label: String,
    ranked_labels: Vec<String>,
}

impl PredictionRecord {
    pub fn new(
        probe_id: impl Into<String>,
        true_label: impl Into<String>,
        ranked_labels: Vec<String>,
    ) -> Result<Self, EvalError> {
        let probe_id = probe_id.into();
        if ranked_labels.is_empty() {
            return Err(EvalError::EmptyRanking(probe_id));
        }
        let mut seen = BTreeSet::new();
        for label in &ranked_labels {
            if !seen.insert(label.as_str()) {
                return Err(EvalError::DuplicateRankedLabel {
                    probe: probe_id,
                    label: label.clone(),
                });
            }
        }
        Ok(PredictionRecord {
            probe_id,
            true_label: true_label.into(),
            ranked_labels,
        })
    }

    /// Ranks the score vector (descending, ties by label).
    pub fn from_scores(
        probe_id: impl Into<String>,
        true_label: impl Into<String>,
        scores: &ScoreVector,
    ) -> Result<Self, EvalError> {
        Self::new(probe_id, true_label, scores.ranked_labels())
    }

    pub fn ranked_labels(&self) -> &[String] {
        &self.ranked_labels
    }

    pub fn top(&self) -> &str {
        &self.ranked_labels[0]
    }

    pub fn is_correct(&self) -> bool {
        self.top() == self.true_label
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Result<Self, EvalError> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(EvalError::DuplicateClass(dup.clone()));
        }
        let n = labels.len();
        Ok(ConfusionMatrix {
            labels,
            counts: vec![0; n * n],
        })
    }

    /// Builds a matrix from explicit row-major counts.
    pub fn from_counts(labels: Vec<String>, rows: &[Vec<u64>]) -> Result<Self, EvalError> {
        let mut m = Self::zeros(labels)?;
        let n = m.labels.len();
        assert!(
            rows.len() == n && rows.iter().all(|r| r.len() == n),
            "counts must be {n}x{n}"
        );
        for (i, row) in rows.iter().enumerate() {
            m.counts[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.size() + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        let n = self.size();
        &self.counts[truth * n..(truth + 1) * n]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.row(truth).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|i| self.count(i, i)).sum()
    }

    fn index_of(&self, label: &str) -> Result<usize, EvalError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| EvalError::UnknownLabel(label.to_string()))
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<(), EvalError> {
        let (t, p) = (self.index_of(truth)?, self.index_of(predicted)?);
        let n = self.size();
        self.counts[t * n + p] += 1;
        Ok(())
    }

    /// Adds another matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), EvalError> {
        if other.labels != self.labels {
            let odd = other
                .labels
                .iter()
                .find(|l| !self.labels.contains(l))
                .cloned()
                .unwrap_or_default();
            return Err(EvalError::UnknownLabel(odd));
        }
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        (0..self.size())
            .map(|i| {
                let sum = self.row_sum(i);
                self.row(i)
                    .iter()
                    .map(|&c| if sum == 0 { 0.0 } else { c as f64 / sum as f64 })
                    .collect()
            })
            .collect()
    }
}

/// Tallies each record's top-ranked label against its true label.
pub fn confusion(
    records: &[PredictionRecord],
    labels: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    let mut m = ConfusionMatrix::zeros(labels.to_vec())?;
    for r in records {
        m.record(&r.true_label, r.top())?;
    }
    Ok(m)
}

pub fn averaged_accuracy(matrix: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok(matrix.trace() as f64 / total as f64)
}

/// What to do with a class that received no probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyClassPolicy {
    #[default]
    Error,
    Exclude,
}

fn class_rates(
    matrix: &ConfusionMatrix,
    policy: EmptyClassPolicy,
) -> Result<Vec<(String, f64)>, EvalError> {
    let mut rates = Vec::with_capacity(matrix.size());
    for (i, label) in matrix.labels.iter().enumerate() {
        let n = matrix.row_sum(i);
        if n == 0 {
            match policy {
                EmptyClassPolicy::Error => return Err(EvalError::EmptyClassRow(label.clone())),
                EmptyClassPolicy::Exclude => continue,
            }
        }
        rates.push((label.clone(), matrix.count(i, i) as f64 / n as f64));
    }
    if rates.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok(rates)
}

pub fn balanced_accuracy(matrix: &ConfusionMatrix) -> Result<f64, EvalError> {
    balanced_accuracy_with(matrix, EmptyClassPolicy::Error)
}

pub fn balanced_accuracy_with(
    matrix: &ConfusionMatrix,
    policy: EmptyClassPolicy,
) -> Result<f64, EvalError> {
    let rates = class_rates(matrix, policy)?;
    Ok(rates.iter().map(|(_, r)| r).sum::<f64>() / rates.len() as f64)
}

/// Per-class accuracy spread: worst, best, population sigma, averaged and
/// balanced accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct PerClassStats {
    pub per_class_accuracy: Vec<(String, f64)>,
    pub worst: f64,
    pub best: f64,
    pub sigma: f64,
    pub average: f64,
    pub balanced: f64,
}

pub fn per_class_stats(matrix: &ConfusionMatrix) -> Result<PerClassStats, EvalError> {
    per_class_stats_with(matrix, EmptyClassPolicy::Error)
}

pub fn per_class_stats_with(
    matrix: &ConfusionMatrix,
    policy: EmptyClassPolicy,
) -> Result<PerClassStats, EvalError> {
    let rates = class_rates(matrix, policy)?;
    let n = rates.len() as f64;
    let balanced = rates.iter().map(|(_, r)| r).sum::<f64>() / n;
    let variance = rates
        .iter()
        .map(|(_, r)| (r - balanced) * (r - balanced))
        .sum::<f64>()
        / n;
    let worst = rates.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min);
    let best = rates
        .iter()
        .map(|(_, r)| *r)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PerClassStats {
        worst,
        best,
        sigma: libm::sqrt(variance),
        average: averaged_accuracy(matrix)?,
        balanced,
        per_class_accuracy: rates,
    })
}

/// Image to fold index, dealt per identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    fold_of: BTreeMap<String, usize>,
    identity_of: BTreeMap<String, String>,
    /// Identities with fewer than `k` images; they are absent from some folds.
    pub sparse_identities: Vec<String>,
}

impl FoldAssignment {
    pub fn fold_of(&self, image_id: &str) -> Option<usize> {
        self.fold_of.get(image_id).copied()
    }

    pub fn identity_of(&self, image_id: &str) -> Option<&str> {
        self.identity_of.get(image_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> + '_ {
        self.fold_of.iter().map(|(id, &f)| (id.as_str(), f))
    }

    /// Image ids held out in `fold`, ascending.
    pub fn test_ids(&self, fold: usize) -> Vec<&str> {
        self.iter()
            .filter(|&(_, f)| f == fold)
            .map(|(id, _)| id)
            .collect()
    }

    /// Image ids used for training when `fold` is held out, ascending.
    pub fn train_ids(&self, fold: usize) -> Vec<&str> {
        self.iter()
            .filter(|&(_, f)| f != fold)
            .map(|(id, _)| id)
            .collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn identity_rng(seed: u64, identity: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(identity.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&(identity.len() as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Shuffles each identity's images with a generator keyed by
/// `(seed, identity)` and deals them round-robin into `k` folds.
pub fn make_folds<I: AsRef<str>, L: AsRef<str>>(
    images: &[(I, L)],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFoldCount(k));
    }
    let mut by_identity: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut identity_of = BTreeMap::new();
    for (image, identity) in images {
        let (image, identity) = (image.as_ref(), identity.as_ref());
        if identity_of
            .insert(image.to_string(), identity.to_string())
            .is_some()
        {
            return Err(EvalError::DuplicateImageId(image.to_string()));
        }
        by_identity.entry(identity).or_default().push(image);
    }

    let mut fold_of = BTreeMap::new();
    let mut sparse_identities = Vec::new();
    for (identity, mut ids) in by_identity {
        if ids.len() < k {
            sparse_identities.push(identity.to_string());
        }
        ids.sort_unstable();
        ids.shuffle(&mut identity_rng(seed, identity));
        for (i, id) in ids.into_iter().enumerate() {
            fold_of.insert(id.to_string(), i % k);
        }
    }
    Ok(FoldAssignment {
        k,
        seed,
        fold_of,
        identity_of,
        sparse_identities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValSummary {
    pub mean_averaged: f64,
    pub mean_balanced: f64,
}

/// Arithmetic means of the per-fold accuracies.
pub fn crossval_accuracy(folds: &[PerClassStats]) -> Result<CrossValSummary, EvalError> {
    if folds.is_empty() {
        return Err(EvalError::NoFolds);
    }
    let n = folds.len() as f64;
    Ok(CrossValSummary {
        mean_averaged: folds.iter().map(|f| f.average).sum::<f64>() / n,
        mean_balanced: folds.iter().map(|f| f.balanced).sum::<f64>() / n,
    })
}
