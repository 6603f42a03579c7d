//! Cross-validated identification experiment over in-memory images.
//!
//! Per fold: the held-out images are probes, the rest (plus their mirror
//! images) train two baseline matchers, one on raw images and one on
//! normalized faces. The two decisions are fused, optionally narrowed to the
//! top-k breeds, and ranked ("default"). The same scores re-ranked with the
//! probe's breed and gender give the "assisted" ranking.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use thiserror::Error;

use crate::eval::{
    self, ConfusionMatrix, CrossValSummary, EmptyClassPolicy, EvalError, PerClassStats,
    PredictionRecord,
};
use crate::fusion::{self, FusionError, FusionWeight};
use crate::landmarks::{self, LandmarkSet, NormalizeError};
use crate::matcher::{self, Embedding, MatchError, ScoreVector};
use crate::raster::{self, PixelRect, RasterImage};
use crate::softbio::{self, IdentityRegistry, SoftAttributes, SoftBioError};

/// Id suffix marking a horizontally mirrored copy.
pub const AUGMENTED_SUFFIX: &str = "#flip";

pub fn augmented_id(image_id: &str) -> String {
    format!("{image_id}{AUGMENTED_SUFFIX}")
}

pub fn is_augmented_id(image_id: &str) -> bool {
    image_id.ends_with(AUGMENTED_SUFFIX)
}

/// Where the face region of an image comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceSource {
    Landmarks(LandmarkSet),
    Box(PixelRect),
    Whole,
}

impl FaceSource {
    pub fn method(&self) -> &'static str {
        match self {
            FaceSource::Landmarks(_) => "landmarks",
            FaceSource::Box(_) => "box",
            FaceSource::Whole => "resize",
        }
    }
}

/// Landmarks win over a box; with neither the whole image is resized.
pub fn normalize_image(
    image: &RasterImage,
    source: &FaceSource,
    out_side: usize,
) -> Result<RasterImage, NormalizeError> {
    match source {
        FaceSource::Landmarks(lm) => landmarks::normalize_face(image, lm, out_side),
        FaceSource::Box(rect) => {
            let face = raster::crop(image, rect)?;
            Ok(raster::resize(&face, out_side, out_side)?)
        }
        FaceSource::Whole => Ok(raster::resize(image, out_side, out_side)?),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: FusionWeight,
    /// Breeds kept by the coarse stage.
    pub top_k: NonZeroUsize,
    pub folds: usize,
    pub seed: u64,
    pub temperature: f64,
    /// Pass scores through unchanged when re-ranking leaves no candidate.
    pub fallback_raw: bool,
    /// Add mirrored training images.
    pub augment: bool,
    pub empty_classes: EmptyClassPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: FusionWeight::DEFAULT,
            top_k: NonZeroUsize::new(2).unwrap(),
            folds: 5,
            seed: 0,
            temperature: matcher::DEFAULT_TEMPERATURE,
            fallback_raw: false,
            augment: true,
            empty_classes: EmptyClassPolicy::Error,
        }
    }
}

/// One original (never augmented) image, raw and normalized.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image_id: String,
    pub identity: String,
    pub raw: RasterImage,
    pub normalized: RasterImage,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    SoftBio(#[from] SoftBioError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("no samples")]
    NoSamples,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("image `{image}` is an augmented copy; experiments generate their own")]
    AugmentedSample { image: String },
    #[error("image `{image}`: identity `{identity}` is not in the registry")]
    UnregisteredIdentity { image: String, identity: String },
    #[error("image `{image}`: {source}")]
    Embedding { image: String, source: MatchError },
    #[error(transparent)]
    Folds(EvalError),
    #[error("fold {fold}: no training images")]
    EmptyTraining { fold: usize },
    #[error("fold {fold}: {source}")]
    Training { fold: usize, source: MatchError },
    #[error("fold {fold}, probe `{probe}`: {source}")]
    Probe {
        fold: usize,
        probe: String,
        source: Box<ProbeError>,
    },
    #[error("fold {fold}: {source}")]
    Metrics { fold: usize, source: EvalError },
}

/// Ranked predictions of one decision path in one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub records: Vec<PredictionRecord>,
    pub confusion: ConfusionMatrix,
    pub stats: PerClassStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    /// Training image ids, augmented copies included, ascending.
    pub train_ids: Vec<String>,
    /// Probe ids, ascending. Never contains augmented ids.
    pub test_ids: Vec<String>,
    pub default: PathOutcome,
    pub assisted: PathOutcome,
    /// Probes whose re-ranking fell back to the unassisted scores.
    pub fallbacks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub labels: Vec<String>,
    pub folds: Vec<FoldOutcome>,
    pub default: CrossValSummary,
    pub assisted: CrossValSummary,
    pub sparse_identities: Vec<String>,
}

impl ExperimentOutcome {
    /// Confusion summed over folds for the default or assisted path.
    pub fn pooled_confusion(&self, assisted: bool) -> ConfusionMatrix {
        let mut pooled = ConfusionMatrix::zeros(self.labels.clone()).expect("distinct labels");
        for f in &self.folds {
            let m = if assisted {
                &f.assisted.confusion
            } else {
                &f.default.confusion
            };
            pooled.merge(m).expect("same labels");
        }
        pooled
    }
}

struct Features {
    raw: Embedding,
    normalized: Embedding,
    mirrored: Option<(Embedding, Embedding)>,
}

fn features(sample: &Sample, augment: bool) -> Result<Features, MatchError> {
    let mirrored = if augment {
        Some((
            matcher::embed_baseline(&raster::flip_horizontal(&sample.raw))?,
            matcher::embed_baseline(&raster::flip_horizontal(&sample.normalized))?,
        ))
    } else {
        None
    };
    Ok(Features {
        raw: matcher::embed_baseline(&sample.raw)?,
        normalized: matcher::embed_baseline(&sample.normalized)?,
        mirrored,
    })
}

/// Attributes supplied for each probe: an override when present, else the
/// registry's record for the true identity.
fn probe_attributes(
    overrides: &BTreeMap<String, SoftAttributes>,
    registry: &IdentityRegistry,
    sample: &Sample,
) -> Result<SoftAttributes, SoftBioError> {
    match overrides.get(&sample.image_id) {
        Some(a) => Ok(a.clone()),
        None => SoftAttributes::of_identity(registry, &sample.identity),
    }
}

/// Fused raw/normalized scores, narrowed to the top-k breeds when that
/// removes anything.
fn default_scores(
    raw: &ScoreVector,
    normalized: &ScoreVector,
    registry: &IdentityRegistry,
    config: &ExperimentConfig,
) -> Result<ScoreVector, ProbeError> {
    let fused = fusion::fuse(raw, normalized, config.alpha)?;
    if config.top_k.get() >= registry.breeds().len() {
        return Ok(fused);
    }
    let breeds = matcher::top_k_breeds(&matcher::breed_scores(&fused, registry)?, config.top_k);
    let gallery = matcher::filter_gallery(registry, &breeds)?;
    Ok(fused.restrict_to(&gallery)?)
}

fn evaluate_path(
    records: Vec<PredictionRecord>,
    labels: &[String],
    policy: EmptyClassPolicy,
) -> Result<PathOutcome, EvalError> {
    let confusion = eval::confusion(&records, labels)?;
    let stats = eval::per_class_stats_with(&confusion, policy)?;
    Ok(PathOutcome {
        records,
        confusion,
        stats,
    })
}

pub fn run_experiment(
    samples: &[Sample],
    registry: &IdentityRegistry,
    attribute_overrides: &BTreeMap<String, SoftAttributes>,
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome, ExperimentError> {
    if samples.is_empty() {
        return Err(ExperimentError::NoSamples);
    }
    if !(config.temperature.is_finite() && config.temperature > 0.0) {
        return Err(ExperimentError::InvalidTemperature(config.temperature));
    }
    for s in samples {
        if is_augmented_id(&s.image_id) {
            return Err(ExperimentError::AugmentedSample {
                image: s.image_id.clone(),
            });
        }
        if registry.get(&s.identity).is_none() {
            return Err(ExperimentError::UnregisteredIdentity {
                image: s.image_id.clone(),
                identity: s.identity.clone(),
            });
        }
    }

    let folds = eval::make_folds(
        &samples
            .iter()
            .map(|s| (s.image_id.as_str(), s.identity.as_str()))
            .collect::<Vec<_>>(),
        config.folds,
        config.seed,
    )
    .map_err(ExperimentError::Folds)?;

    let mut by_id: BTreeMap<&str, (&Sample, Features)> = BTreeMap::new();
    for s in samples {
        let f = features(s, config.augment).map_err(|source| ExperimentError::Embedding {
            image: s.image_id.clone(),
            source,
        })?;
        by_id.insert(s.image_id.as_str(), (s, f));
    }
    let labels: Vec<String> = samples
        .iter()
        .map(|s| s.identity.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut outcomes = Vec::with_capacity(config.folds);
    for fold in 0..config.folds {
        let mut train_ids = Vec::new();
        let mut raw_train = Vec::new();
        let mut norm_train = Vec::new();
        for id in folds.train_ids(fold) {
            let (s, f) = &by_id[id];
            train_ids.push(id.to_string());
            raw_train.push((s.identity.as_str(), f.raw.clone()));
            norm_train.push((s.identity.as_str(), f.normalized.clone()));
            if let Some((raw, norm)) = &f.mirrored {
                train_ids.push(augmented_id(id));
                raw_train.push((s.identity.as_str(), raw.clone()));
                norm_train.push((s.identity.as_str(), norm.clone()));
            }
        }
        if raw_train.is_empty() {
            return Err(ExperimentError::EmptyTraining { fold });
        }
        train_ids.sort_unstable();
        let training_err = |source| ExperimentError::Training { fold, source };
        let raw_centroids = matcher::train_centroids(&raw_train).map_err(training_err)?;
        let norm_centroids = matcher::train_centroids(&norm_train).map_err(training_err)?;

        let test_ids: Vec<String> = folds.test_ids(fold).into_iter().map(String::from).collect();
        debug_assert!(test_ids.iter().all(|id| !is_augmented_id(id)));
        let mut default_records = Vec::with_capacity(test_ids.len());
        let mut assisted_records = Vec::with_capacity(test_ids.len());
        let mut fallbacks = Vec::new();
        for id in &test_ids {
            let (s, f) = &by_id[id.as_str()];
            let probe_err = |e: ProbeError| ExperimentError::Probe {
                fold,
                probe: id.clone(),
                source: Box::new(e),
            };
            let scored = (|| -> Result<_, ProbeError> {
                let raw = matcher::score_probe(&f.raw, &raw_centroids, config.temperature)?;
                let norm =
                    matcher::score_probe(&f.normalized, &norm_centroids, config.temperature)?;
                let default = default_scores(&raw, &norm, registry, config)?;
                let attrs = probe_attributes(attribute_overrides, registry, s)?;
                let assisted = match softbio::rerank(&default, registry, &attrs) {
                    Ok(r) => Some(r.posterior),
                    Err(SoftBioError::NoCandidateMatches) if config.fallback_raw => None,
                    Err(e) => return Err(e.into()),
                };
                Ok((default, assisted))
            })()
            .map_err(probe_err)?;
            let (default, assisted) = scored;
            let assisted = assisted.unwrap_or_else(|| {
                fallbacks.push(id.clone());
                default.clone()
            });
            default_records.push(
                PredictionRecord::from_scores(id.clone(), s.identity.clone(), &default)
                    .map_err(|e| probe_err(e.into()))?,
            );
            assisted_records.push(
                PredictionRecord::from_scores(id.clone(), s.identity.clone(), &assisted)
                    .map_err(|e| probe_err(e.into()))?,
            );
        }

        let metrics_err = |source| ExperimentError::Metrics { fold, source };
        outcomes.push(FoldOutcome {
            fold,
            train_ids,
            test_ids,
            default: evaluate_path(default_records, &labels, config.empty_classes)
                .map_err(metrics_err)?,
            assisted: evaluate_path(assisted_records, &labels, config.empty_classes)
                .map_err(metrics_err)?,
            fallbacks,
        });
    }

    let summarize = |assisted: bool| {
        let stats: Vec<PerClassStats> = outcomes
            .iter()
            .map(|f| {
                if assisted {
                    f.assisted.stats.clone()
                } else {
                    f.default.stats.clone()
                }
            })
            .collect();
        eval::crossval_accuracy(&stats).map_err(ExperimentError::Folds)
    };
    Ok(ExperimentOutcome {
        default: summarize(false)?,
        assisted: summarize(true)?,
        labels,
        folds: outcomes,
        sparse_identities: folds.sparse_identities.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::softbio::Gender;

    /// 4x4 grid of identity-specific block intensities plus a little
    /// per-variant ripple.
    fn texture(identity: usize, variant: usize) -> RasterImage {
        RasterImage::gray_from_fn(24, 24, |x, y| {
            let cell = (y / 6) * 4 + x / 6;
            let h = ((identity * 16 + cell) as u32).wrapping_mul(2_654_435_761) >> 27;
            (h as usize * 7 + (variant * 7 + x * 3 + y) % 5) as u8
        })
        .unwrap()
    }

    fn dataset(identities: usize, per: usize) -> (Vec<Sample>, IdentityRegistry) {
        let mut reg = IdentityRegistry::new();
        let mut samples = Vec::new();
        for i in 0..identities {
            let name = format!("dog{i}");
            let breed = if i % 2 == 0 { "husky" } else { "pug" };
            let gender = if (i / 2) % 2 == 0 {
                Gender::Male
            } else {
                Gender::Female
            };
            reg.insert(name.clone(), breed, gender).unwrap();
            for v in 0..per {
                let img = texture(i, v);
                samples.push(Sample {
                    image_id: format!("{name}-{v}"),
                    identity: name.clone(),
                    normalized: img.clone(),
                    raw: img,
                });
            }
        }
        (samples, reg)
    }

    #[test]
    fn dispatch_rules() {
        let img = RasterImage::gray_from_fn(30, 20, |x, y| (x * 8 + y) as u8).unwrap();
        let whole = normalize_image(&img, &FaceSource::Whole, 10).unwrap();
        assert_eq!(whole, raster::resize(&img, 10, 10).unwrap());
        let rect = PixelRect::new(5.0, 2.0, 10.0, 8.0).unwrap();
        let boxed = normalize_image(&img, &FaceSource::Box(rect), 10).unwrap();
        assert_eq!(
            boxed,
            raster::resize(&raster::crop(&img, &rect).unwrap(), 10, 10).unwrap()
        );
        let lm = LandmarkSet::new([
            Point2::new(10.0, 10.0),
            Point2::new(14.0, 10.0),
            Point2::new(12.0, 13.0),
            Point2::new(8.0, 12.0),
            Point2::new(9.0, 5.0),
            Point2::new(12.0, 4.0),
            Point2::new(15.0, 5.0),
            Point2::new(16.0, 12.0),
        ])
        .unwrap();
        let face = normalize_image(&img, &FaceSource::Landmarks(lm), 10).unwrap();
        assert_eq!(face, landmarks::normalize_face(&img, &lm, 10).unwrap());
    }

    #[test]
    fn separable_dataset_is_identified_perfectly() {
        let (samples, reg) = dataset(8, 5);
        let out = run_experiment(
            &samples,
            &reg,
            &BTreeMap::new(),
            &ExperimentConfig::default(),
        )
        .unwrap();
        assert_eq!(out.folds.len(), 5);
        assert_eq!(out.default.mean_averaged, 1.0);
        assert_eq!(out.assisted.mean_averaged, 1.0);
        for f in &out.folds {
            assert_eq!(f.test_ids.len(), 8);
            assert!(f.test_ids.iter().all(|id| !is_augmented_id(id)));
            assert_eq!(
                f.train_ids.iter().filter(|id| is_augmented_id(id)).count(),
                32
            );
        }
    }

    #[test]
    fn unknown_attributes_match_the_default_path() {
        let (samples, reg) = dataset(6, 5);
        let unknown: BTreeMap<String, SoftAttributes> = samples
            .iter()
            .map(|s| (s.image_id.clone(), SoftAttributes::unknown()))
            .collect();
        let out = run_experiment(&samples, &reg, &unknown, &ExperimentConfig::default()).unwrap();
        for f in &out.folds {
            assert_eq!(f.default.records, f.assisted.records);
        }
        assert!((out.default.mean_balanced - out.assisted.mean_balanced).abs() <= 1e-12);
    }

    #[test]
    fn rejects_augmented_and_unregistered_samples() {
        let (mut samples, reg) = dataset(2, 5);
        samples[0].image_id = augmented_id("x");
        assert!(matches!(
            run_experiment(
                &samples,
                &reg,
                &BTreeMap::new(),
                &ExperimentConfig::default()
            ),
            Err(ExperimentError::AugmentedSample { .. })
        ));
        let (mut samples, reg) = dataset(2, 5);
        samples[3].identity = "ghost".into();
        assert!(matches!(
            run_experiment(
                &samples,
                &reg,
                &BTreeMap::new(),
                &ExperimentConfig::default()
            ),
            Err(ExperimentError::UnregisteredIdentity { .. })
        ));
    }

    #[test]
    fn contradictory_metadata_needs_fallback() {
        let (samples, reg) = dataset(4, 5);
        let wrong: BTreeMap<String, SoftAttributes> = samples
            .iter()
            .map(|s| {
                (
                    s.image_id.clone(),
                    SoftAttributes::new(None, Some("beagle".into())),
                )
            })
            .collect();
        let err = run_experiment(&samples, &reg, &wrong, &ExperimentConfig::default()).unwrap_err();
        assert!(matches!(err, ExperimentError::Probe { .. }));
        let config = ExperimentConfig {
            fallback_raw: true,
            ..Default::default()
        };
        let out = run_experiment(&samples, &reg, &wrong, &config).unwrap();
        assert_eq!(out.folds[0].fallbacks.len(), out.folds[0].test_ids.len());
    }

    #[test]
    fn coarse_stage_restricts_to_top_breed() {
        let (samples, reg) = dataset(8, 5);
        let config = ExperimentConfig {
            top_k: NonZeroUsize::new(1).unwrap(),
            ..Default::default()
        };
        let out = run_experiment(&samples, &reg, &BTreeMap::new(), &config).unwrap();
        for f in &out.folds {
            for r in &f.default.records {
                assert_eq!(r.ranked_labels().len(), 4);
            }
        }
    }
}
