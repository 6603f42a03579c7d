//! Score vectors, the baseline nearest-centroid matcher and the coarse
//! breed filter that narrows the identity gallery.
//!
//! The baseline embedder stands in for learned image features: a 32x32 gray
//! thumbnail, mean-centred and scaled to unit length. Probes are scored with a
//! softmax over negative squared distances to per-label centroids.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::num::NonZeroUsize;

use thiserror::Error;

use crate::raster::{self, RasterImage};
use crate::softbio::IdentityRegistry;

/// A score vector is a distribution when its sum is this close to 1.
pub const NORMALIZED_TOLERANCE: f64 = 1e-9;
/// Side length of the baseline thumbnail.
pub const EMBEDDING_SIDE: usize = 32;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("duplicate label `{label}`")]
    DuplicateLabel { label: String },
    #[error("empty label")]
    EmptyLabel,
    #[error("score for `{label}` is not a finite number")]
    NonFiniteScore { label: String },
    #[error("negative score {value} for `{label}`")]
    NegativeScore { label: String, value: f64 },
    #[error("score {value} for `{label}` exceeds 1")]
    ScoreAboveOne { label: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("image has zero variance after mean subtraction")]
    ZeroVariance,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("centroid for `{label}` is the zero vector")]
    ZeroCentroid { label: String },
    #[error("embedding dimension {actual} does not match {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no centroids to score against")]
    EmptyGallery,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("no identity survives the breed filter")]
    EmptySubset,
    #[error("`{0}` is not in the identity registry")]
    UnknownIdentity(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Per-label confidences in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    labels: Vec<String>,
    scores: Vec<f64>,
    normalized: bool,
}

impl ScoreVector {
    /// Validates the vector; it is flagged normalized when it sums to 1
    /// within [`NORMALIZED_TOLERANCE`].
    pub fn new(labels: Vec<String>, scores: Vec<f64>) -> Result<Self, ScoreError> {
        Self::with_tolerance(labels, scores, NORMALIZED_TOLERANCE)
    }

    /// Like [`ScoreVector::new`] with a caller-chosen normalization tolerance.
    pub fn with_tolerance(
        labels: Vec<String>,
        scores: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self, ScoreError> {
        if labels.len() != scores.len() {
            return Err(ScoreError::LengthMismatch {
                labels: labels.len(),
                scores: scores.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for (label, &value) in labels.iter().zip(&scores) {
            if label.is_empty() {
                return Err(ScoreError::EmptyLabel);
            }
            if !seen.insert(label.as_str()) {
                return Err(ScoreError::DuplicateLabel {
                    label: label.clone(),
                });
            }
            if !value.is_finite() {
                return Err(ScoreError::NonFiniteScore {
                    label: label.clone(),
                });
            }
            if value < 0.0 {
                return Err(ScoreError::NegativeScore {
                    label: label.clone(),
                    value,
                });
            }
            if value > 1.0 {
                return Err(ScoreError::ScoreAboveOne {
                    label: label.clone(),
                    value,
                });
            }
        }
        let sum: f64 = scores.iter().sum();
        let normalized = !scores.is_empty() && (sum - 1.0).abs() <= tolerance;
        Ok(ScoreVector {
            labels,
            scores,
            normalized,
        })
    }

    /// Clears the normalized flag.
    pub fn into_unnormalized(mut self) -> Self {
        self.normalized = false;
        self
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.scores[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.scores.iter().copied())
    }

    /// Labels by descending score; ties go to the smaller label.
    pub fn ranked_labels(&self) -> Vec<String> {
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by(|&a, &b| {
            rank_order(
                (&self.labels[a], self.scores[a]),
                (&self.labels[b], self.scores[b]),
            )
        });
        order.into_iter().map(|i| self.labels[i].clone()).collect()
    }

    /// 1-based position of `label` in [`ScoreVector::ranked_labels`].
    pub fn rank_of(&self, label: &str) -> Option<usize> {
        let own = self.get(label)?;
        let ahead = self
            .iter()
            .filter(|&(l, s)| rank_order((l, s), (label, own)) == Ordering::Less)
            .count();
        Some(ahead + 1)
    }

    pub fn top_label(&self) -> Option<&str> {
        self.iter()
            .min_by(|&a, &b| rank_order(a, b))
            .map(|(l, _)| l)
    }

    /// Keeps only the labels retained by the gallery subset, in order.
    pub fn restrict_to(&self, subset: &GallerySubset) -> Result<ScoreVector, MatchError> {
        let (labels, scores): (Vec<String>, Vec<f64>) = self
            .iter()
            .filter(|(l, _)| subset.contains(l))
            .map(|(l, s)| (l.to_string(), s))
            .unzip();
        if labels.is_empty() {
            return Err(MatchError::EmptySubset);
        }
        Ok(ScoreVector::new(labels, scores)?)
    }
}

fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Unit-length feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Scales `values` to unit L2 norm.
    pub fn normalize(values: Vec<f64>) -> Result<Self, MatchError> {
        let norm = l2_norm(&values);
        if !(norm.is_finite() && norm > ZERO_NORM) {
            return Err(MatchError::ZeroNorm);
        }
        Ok(Embedding {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn squared_distance(&self, other: &Embedding) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    libm::sqrt(values.iter().map(|v| v * v).sum())
}

/// Gray 32x32 thumbnail, mean-centred, unit length.
pub fn embed_baseline(image: &RasterImage) -> Result<Embedding, MatchError> {
    let gray = image.to_gray();
    let mut values = raster::resample_plane(
        &gray.plane(0),
        gray.width(),
        gray.height(),
        EMBEDDING_SIDE,
        EMBEDDING_SIDE,
    );
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    // Anything below this is rounding residue of a constant image.
    if l2_norm(&values) <= 1e-9 {
        return Err(MatchError::ZeroVariance);
    }
    Embedding::normalize(values)
}

pub type Centroids = BTreeMap<String, Embedding>;

/// Per-label mean embedding, re-normalized to unit length.
pub fn train_centroids<L: AsRef<str>>(
    training: &[(L, Embedding)],
) -> Result<Centroids, MatchError> {
    let dim = training
        .first()
        .ok_or(MatchError::EmptyTrainingSet)?
        .1
        .dim();
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (label, emb) in training {
        if emb.dim() != dim {
            return Err(MatchError::DimensionMismatch {
                expected: dim,
                actual: emb.dim(),
            });
        }
        let entry = sums
            .entry(label.as_ref())
            .or_insert_with(|| (alloc::vec![0.0; dim], 0));
        entry
            .0
            .iter_mut()
            .zip(emb.values())
            .for_each(|(s, v)| *s += v);
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(label, (sum, count))| {
            let mean = sum.into_iter().map(|v| v / count as f64).collect();
            Embedding::normalize(mean)
                .map(|c| (label.to_string(), c))
                .map_err(|_| MatchError::ZeroCentroid {
                    label: label.to_string(),
                })
        })
        .collect()
}

/// Softmax over `-||probe - centroid||^2 / temperature`, labels in centroid order.
pub fn score_probe(
    probe: &Embedding,
    centroids: &Centroids,
    temperature: f64,
) -> Result<ScoreVector, MatchError> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(MatchError::InvalidTemperature(temperature));
    }
    if centroids.is_empty() {
        return Err(MatchError::EmptyGallery);
    }
    let mut logits = Vec::with_capacity(centroids.len());
    for centroid in centroids.values() {
        if centroid.dim() != probe.dim() {
            return Err(MatchError::DimensionMismatch {
                expected: centroid.dim(),
                actual: probe.dim(),
            });
        }
        logits.push(-probe.squared_distance(centroid) / temperature);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let total: f64 = weights.iter().sum();
    let scores = weights.into_iter().map(|w| w / total).collect();
    Ok(ScoreVector::new(
        centroids.keys().cloned().collect(),
        scores,
    )?)
}

/// The `k` best breeds, descending; ties go to the smaller label.
pub fn top_k_breeds(breed_scores: &ScoreVector, k: NonZeroUsize) -> Vec<String> {
    let mut ranked = breed_scores.ranked_labels();
    ranked.truncate(k.get());
    ranked
}

/// Identities retained by the coarse breed filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GallerySubset {
    retained: BTreeSet<String>,
}

impl GallerySubset {
    pub fn contains(&self, label: &str) -> bool {
        self.retained.contains(label)
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn labels(&self) -> &BTreeSet<String> {
        &self.retained
    }
}

/// Keeps the registry identities whose breed is one of `breeds`.
pub fn filter_gallery<B: AsRef<str>>(
    registry: &IdentityRegistry,
    breeds: &[B],
) -> Result<GallerySubset, MatchError> {
    let wanted: BTreeSet<&str> = breeds.iter().map(AsRef::as_ref).collect();
    let retained: BTreeSet<String> = registry
        .iter()
        .filter(|(_, record)| wanted.contains(record.breed.as_str()))
        .map(|(id, _)| id.to_string())
        .collect();
    if retained.is_empty() {
        return Err(MatchError::EmptySubset);
    }
    Ok(GallerySubset { retained })
}

/// Collapses identity scores into breed scores by summing per breed.
///
/// Breeds come from the registry in ascending order. The result is rescaled
/// to sum to 1 unless every identity scored 0.
pub fn breed_scores(
    identity_scores: &ScoreVector,
    registry: &IdentityRegistry,
) -> Result<ScoreVector, MatchError> {
    let mut per_breed: BTreeMap<&str, f64> =
        registry.breeds().into_iter().map(|b| (b, 0.0)).collect();
    for (label, score) in identity_scores.iter() {
        let record = registry
            .get(label)
            .ok_or_else(|| MatchError::UnknownIdentity(label.to_string()))?;
        *per_breed
            .get_mut(record.breed.as_str())
            .expect("registry breed") += score;
    }
    let total: f64 = per_breed.values().sum();
    let (labels, scores): (Vec<String>, Vec<f64>) = per_breed
        .into_iter()
        .map(|(b, s)| {
            (
                b.to_string(),
                if total > 0.0 {
                    (s / total).min(1.0)
                } else {
                    0.0
                },
            )
        })
        .unzip();
    Ok(ScoreVector::new(labels, scores)?)
}
