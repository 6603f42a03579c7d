//! One function per CLI subcommand.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use log::{info, warn};
use pawprint_core::eval::{self, EmptyClassPolicy};
use pawprint_core::experiment::{self, FaceSource, Sample};
use pawprint_core::fusion::{self, FusionError};
use pawprint_core::matcher::{self, Embedding};
use pawprint_core::softbio::{self, SoftBioError};
use pawprint_core::{raster, FoldAssignment, FusionWeight, PredictionRecord, SoftAttributes};
use thiserror::Error;

use crate::config::RunConfig;
use crate::formats::folds::write_folds;
use crate::formats::landmarks::{parse_landmark_file, LandmarkTable};
use crate::formats::manifest::{Manifest, ManifestRow, Split};
use crate::formats::predictions::read_predictions;
use crate::formats::registry::{parse_breed, parse_gender, read_attributes, read_registry};
use crate::formats::scores::{read_scores, write_scores, ScoreTable};
use crate::pnm;
use crate::report::{ConfusionReport, EvaluationReport, RunReport, StatsReport};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{failed} of {total} rows failed; details in {}", report.display())]
    RowFailures {
        failed: usize,
        total: usize,
        report: PathBuf,
    },
    #[error(transparent)]
    Failed(#[from] anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::RowFailures { .. } | CommandError::Failed(_) => 1,
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> CommandError {
    CommandError::Config(e.to_string())
}

type Result<T> = std::result::Result<T, CommandError>;

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out_dir(dir: &Path) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(std::path::absolute(dir)?)
}

fn load_manifest(path: &Path) -> anyhow::Result<Manifest> {
    Manifest::load(path).with_context(|| format!("manifest {}", path.display()))
}

fn load_landmarks(path: Option<&Path>) -> anyhow::Result<LandmarkTable> {
    match path {
        None => Ok(LandmarkTable::new()),
        Some(p) => parse_landmark_file(&read_text(p)?)
            .with_context(|| format!("landmark file {}", p.display())),
    }
}

/// File name derived from an image id, unique within `taken`.
fn file_name(image_id: &str, suffix: &str, ext: &str, taken: &mut BTreeSet<String>) -> String {
    let stem: String = image_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    let mut name = format!("{stem}{suffix}.{ext}");
    let mut n = 1;
    while !taken.insert(name.clone()) {
        n += 1;
        name = format!("{stem}{suffix}-{n}.{ext}");
    }
    name
}

/// Landmarks win over a manifest box.
fn face_source(row: &ManifestRow, landmarks: &LandmarkTable) -> FaceSource {
    if let Some(lm) = landmarks.get(&row.image_id) {
        FaceSource::Landmarks(*lm)
    } else if let Some(rect) = row.face_box {
        FaceSource::Box(rect)
    } else {
        FaceSource::Whole
    }
}

#[derive(Debug, Clone)]
pub struct NormalizeArgs {
    pub manifest: PathBuf,
    pub landmarks: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub out_side: usize,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeSummary {
    pub manifest: Manifest,
    /// `(image_id, error)` for rows that produced no image.
    pub failures: Vec<(String, String)>,
}

pub const NORMALIZED_MANIFEST: &str = "manifest.csv";
pub const FAILURE_REPORT: &str = "failures.csv";

/// Writes one square image per row plus `manifest.csv`; failed rows go to
/// `failures.csv` instead.
pub fn cmd_normalize(args: &NormalizeArgs) -> Result<NormalizeSummary> {
    if args.out_side == 0 {
        return Err(config_error("out_side must be positive"));
    }
    let manifest = load_manifest(&args.manifest)?;
    let landmarks = load_landmarks(args.landmarks.as_deref())?;
    let known: BTreeSet<&str> = manifest.rows.iter().map(|r| r.image_id.as_str()).collect();
    for id in landmarks.keys().filter(|id| !known.contains(id.as_str())) {
        warn!("landmarks for `{id}` match no manifest row");
    }
    let out_dir = prepare_out_dir(&args.out_dir)?;

    let mut taken = BTreeSet::new();
    let mut out = Manifest::default();
    let mut failures = Vec::new();
    for row in &manifest.rows {
        let source = face_source(row, &landmarks);
        let result = pnm::load(&row.path)
            .map_err(|e| e.to_string())
            .and_then(|img| {
                experiment::normalize_image(&img, &source, args.out_side).map_err(|e| e.to_string())
            })
            .and_then(|face| {
                let name = file_name(&row.image_id, "", pnm::extension(&face), &mut taken);
                let path = out_dir.join(name);
                pnm::save(&path, &face).map_err(|e| e.to_string())?;
                Ok(path)
            });
        match result {
            Ok(path) => out.rows.push(ManifestRow {
                path,
                face_box: None,
                source_path: Some(row.path.clone()),
                method: Some(source.method().to_string()),
                ..row.clone()
            }),
            Err(e) => {
                warn!("{}: {e}", row.image_id);
                failures.push((row.image_id.clone(), e));
            }
        }
    }
    out.save(&out_dir.join(NORMALIZED_MANIFEST))
        .map_err(anyhow::Error::from)?;
    let report = out_dir.join(FAILURE_REPORT);
    if failures.is_empty() {
        if report.exists() {
            fs::remove_file(&report).with_context(|| format!("removing {}", report.display()))?;
        }
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["image_id", "error"])
            .map_err(anyhow::Error::from)?;
        for (id, e) in &failures {
            w.write_record([id, e]).map_err(anyhow::Error::from)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
        fs::write(&report, bytes).with_context(|| format!("writing {}", report.display()))?;
        if args.strict {
            return Err(CommandError::RowFailures {
                failed: failures.len(),
                total: manifest.rows.len(),
                report,
            });
        }
    }
    info!(
        "normalized {} of {} images",
        out.rows.len(),
        manifest.rows.len()
    );
    Ok(NormalizeSummary {
        manifest: out,
        failures,
    })
}

/// Writes a mirrored copy of every row and a manifest with both.
pub fn cmd_augment(manifest_path: &Path, out_dir: &Path) -> Result<Manifest> {
    let manifest = load_manifest(manifest_path)?;
    if let Some(row) = manifest
        .rows
        .iter()
        .find(|r| r.augmented || experiment::is_augmented_id(&r.image_id))
    {
        return Err(anyhow!("image `{}` is already an augmented copy", row.image_id).into());
    }
    let out_dir = prepare_out_dir(out_dir)?;
    let mut taken = BTreeSet::new();
    let mut out = Manifest::default();
    for row in &manifest.rows {
        let image = pnm::load(&row.path).with_context(|| format!("image `{}`", row.image_id))?;
        let flipped = raster::flip_horizontal(&image);
        let name = file_name(&row.image_id, "_flip", pnm::extension(&flipped), &mut taken);
        let path = out_dir.join(name);
        pnm::save(&path, &flipped).with_context(|| format!("image `{}`", row.image_id))?;
        out.rows.push(row.clone());
        out.rows.push(ManifestRow {
            image_id: experiment::augmented_id(&row.image_id),
            path,
            face_box: row.face_box.map(|b| {
                let left = image.width() as f64 - b.right();
                b.translated(left - b.left(), 0.0)
            }),
            augmented: true,
            source_path: Some(row.path.clone()),
            method: Some("flip".into()),
            ..row.clone()
        });
    }
    out.save(&out_dir.join(NORMALIZED_MANIFEST))
        .map_err(anyhow::Error::from)?;
    Ok(out)
}

/// Assigns every original image with an identity to a fold.
pub fn cmd_split(manifest_path: &Path, k: usize, seed: u64, out: &Path) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(config_error("fold count must be at least 2"));
    }
    let manifest = load_manifest(manifest_path)?;
    let mut images = Vec::new();
    for row in &manifest.rows {
        if row.augmented || experiment::is_augmented_id(&row.image_id) {
            continue;
        }
        let identity = row
            .identity
            .as_deref()
            .ok_or_else(|| anyhow!("image `{}` has no identity", row.image_id))?;
        images.push((row.image_id.as_str(), identity));
    }
    let folds = eval::make_folds(&images, k, seed).map_err(anyhow::Error::from)?;
    for id in &folds.sparse_identities {
        warn!("identity `{id}` has fewer than {k} images and is missing from some folds");
    }
    write_text(out, &write_folds(&folds))?;
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Identity,
    Breed,
}

impl LabelKind {
    fn of(self, row: &ManifestRow) -> Option<&str> {
        match self {
            LabelKind::Identity => row.identity.as_deref(),
            LabelKind::Breed => row.breed.as_deref(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            LabelKind::Identity => "identity",
            LabelKind::Breed => "breed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyArgs {
    pub manifest: PathBuf,
    /// Probe manifest; without it the `split` column picks gallery and probes.
    pub probes: Option<PathBuf>,
    pub label: LabelKind,
    pub temperature: f64,
    pub out: PathBuf,
}

fn embed_row(row: &ManifestRow) -> anyhow::Result<Embedding> {
    let image = pnm::load(&row.path)?;
    matcher::embed_baseline(&image).with_context(|| format!("image `{}`", row.image_id))
}

/// Nearest-centroid scores for every probe image.
pub fn cmd_classify(args: &ClassifyArgs) -> Result<ScoreTable> {
    if !(args.temperature > 0.0 && args.temperature.is_finite()) {
        return Err(config_error(format!(
            "invalid temperature {}",
            args.temperature
        )));
    }
    let manifest = load_manifest(&args.manifest)?;
    let (gallery, probes): (Vec<ManifestRow>, Vec<ManifestRow>) = match &args.probes {
        Some(p) => (manifest.rows, load_manifest(p)?.rows),
        None => {
            let split = |s| {
                manifest
                    .rows
                    .iter()
                    .filter(|r| r.split == Some(s))
                    .cloned()
                    .collect()
            };
            (split(Split::Train), split(Split::Test))
        }
    };
    let mut training = Vec::with_capacity(gallery.len());
    for row in &gallery {
        let label = args.label.of(row).ok_or_else(|| {
            anyhow!(
                "gallery image `{}` has no {}",
                row.image_id,
                args.label.name()
            )
        })?;
        training.push((label.to_string(), embed_row(row)?));
    }
    let centroids = matcher::train_centroids(&training).map_err(anyhow::Error::from)?;
    let labels: Vec<String> = centroids.keys().cloned().collect();
    let mut rows = BTreeMap::new();
    for row in &probes {
        let scores = matcher::score_probe(&embed_row(row)?, &centroids, args.temperature)
            .with_context(|| format!("probe `{}`", row.image_id))?;
        if rows.insert(row.image_id.clone(), scores).is_some() {
            return Err(anyhow!("probe `{}` listed twice", row.image_id).into());
        }
    }
    let table = ScoreTable { labels, rows };
    write_text(&args.out, &write_table(&table, None))?;
    Ok(table)
}

fn write_table(table: &ScoreTable, z: Option<&BTreeMap<String, f64>>) -> String {
    write_scores(
        &table.labels,
        table.rows.iter().map(|(p, v)| (p.as_str(), v)),
        z,
    )
}

fn load_scores(path: &Path) -> anyhow::Result<ScoreTable> {
    read_scores(&read_text(path)?).with_context(|| format!("score file {}", path.display()))
}

/// `alpha * raw + (1 - alpha) * normalized`, probe by probe.
pub fn cmd_fuse(raw: &Path, normalized: &Path, alpha: f64, out: &Path) -> Result<ScoreTable> {
    let weight = FusionWeight::new(alpha).map_err(config_error)?;
    let raw = load_scores(raw)?;
    let norm = load_scores(normalized)?;
    if raw.labels != norm.labels {
        return Err(config_error(FusionError::LabelMismatch));
    }
    let rows = fusion::fuse_batch(&raw.rows, &norm.rows, weight).map_err(anyhow::Error::from)?;
    let table = ScoreTable {
        labels: raw.labels,
        rows,
    };
    write_text(out, &write_table(&table, None))?;
    Ok(table)
}

#[derive(Debug, Clone, Default)]
pub struct RerankArgs {
    pub scores: PathBuf,
    pub registry: PathBuf,
    /// Applied to probes without a per-probe entry; `None` or `unknown` disables the gate.
    pub gender: Option<String>,
    pub breed: Option<String>,
    /// `probe_id,gender,breed` file overriding the flags per probe.
    pub attrs: Option<PathBuf>,
    pub fallback_raw: bool,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub table: ScoreTable,
    pub z: BTreeMap<String, f64>,
    pub fallbacks: Vec<String>,
}

/// Gates each probe's identity scores by its soft attributes. The output
/// carries the normalizer in a `z` column, 0 for fallback rows.
pub fn cmd_rerank(args: &RerankArgs) -> Result<RerankOutcome> {
    let gender = parse_gender(args.gender.as_deref().unwrap_or_default()).map_err(config_error)?;
    let default_attrs = SoftAttributes::new(
        gender,
        parse_breed(args.breed.as_deref().unwrap_or_default()),
    );
    let per_probe = match &args.attrs {
        Some(p) => read_attributes(&read_text(p)?)
            .with_context(|| format!("attribute file {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let registry = read_registry(&read_text(&args.registry)?)
        .with_context(|| format!("registry {}", args.registry.display()))?;
    let table = load_scores(&args.scores)?;

    let mut rows = BTreeMap::new();
    let mut z = BTreeMap::new();
    let mut fallbacks = Vec::new();
    for (probe, scores) in &table.rows {
        let attrs = per_probe.get(probe).unwrap_or(&default_attrs);
        match softbio::rerank(scores, &registry, attrs) {
            Ok(r) => {
                rows.insert(probe.clone(), r.posterior);
                z.insert(probe.clone(), r.z);
            }
            Err(SoftBioError::NoCandidateMatches) if args.fallback_raw => {
                warn!("probe `{probe}`: no candidate matches; keeping the input scores");
                rows.insert(probe.clone(), scores.clone());
                z.insert(probe.clone(), 0.0);
                fallbacks.push(probe.clone());
            }
            Err(e) => return Err(anyhow!(e).context(format!("probe `{probe}`")).into()),
        }
    }
    let table = ScoreTable {
        labels: table.labels,
        rows,
    };
    write_text(&args.out, &write_table(&table, Some(&z)))?;
    Ok(RerankOutcome {
        table,
        z,
        fallbacks,
    })
}

#[derive(Debug, Clone)]
pub enum EvaluationInput {
    Predictions(PathBuf),
    /// Score file plus the manifest holding each probe's true label.
    Scores {
        scores: PathBuf,
        manifest: PathBuf,
        label: LabelKind,
    },
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub input: EvaluationInput,
    pub exclude_empty_classes: bool,
    pub out: Option<PathBuf>,
}

/// Rank-1 metrics over a prediction or score file.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let mut labels = BTreeSet::new();
    let records = match &args.input {
        EvaluationInput::Predictions(p) => read_predictions(&read_text(p)?)
            .with_context(|| format!("prediction file {}", p.display()))?,
        EvaluationInput::Scores {
            scores,
            manifest,
            label,
        } => {
            let table = load_scores(scores)?;
            labels.extend(table.labels.iter().cloned());
            let manifest = load_manifest(manifest)?;
            let truth: BTreeMap<&str, &ManifestRow> = manifest
                .rows
                .iter()
                .map(|r| (r.image_id.as_str(), r))
                .collect();
            let mut records = Vec::with_capacity(table.rows.len());
            for (probe, scores) in &table.rows {
                let row = truth
                    .get(probe.as_str())
                    .ok_or_else(|| anyhow!("probe `{probe}` is not in the manifest"))?;
                let true_label = label
                    .of(row)
                    .ok_or_else(|| anyhow!("probe `{probe}` has no {}", label.name()))?;
                records.push(
                    PredictionRecord::from_scores(probe.as_str(), true_label, scores)
                        .map_err(anyhow::Error::from)?,
                );
            }
            records
        }
    };
    for r in &records {
        labels.insert(r.true_label.clone());
        labels.extend(r.ranked_labels().iter().cloned());
    }
    let matrix = eval::confusion(&records, &labels.into_iter().collect::<Vec<_>>())
        .map_err(anyhow::Error::from)?;
    let policy = if args.exclude_empty_classes {
        EmptyClassPolicy::Exclude
    } else {
        EmptyClassPolicy::Error
    };
    let stats = eval::per_class_stats_with(&matrix, policy).map_err(anyhow::Error::from)?;
    let report = EvaluationReport {
        probes: records.len(),
        stats: StatsReport::from(&stats),
        confusion: ConfusionReport::from(&matrix),
    };
    if let Some(out) = &args.out {
        write_text(out, &to_json(&report)?)?;
    }
    Ok(report)
}

fn to_json(value: &impl serde::Serialize) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub manifest: PathBuf,
    pub registry: PathBuf,
    pub landmarks: Option<PathBuf>,
    /// Per-probe attribute overrides; other probes use their registry attributes.
    pub attrs: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Cross-validated Default vs Assisted identification.
pub fn cmd_run_experiment(args: &RunArgs) -> Result<RunReport> {
    let config: RunConfig = read_text(&args.config)?
        .parse()
        .map_err(|e| config_error(format!("{}: {e}", args.config.display())))?;
    let manifest = load_manifest(&args.manifest)?;
    let registry = read_registry(&read_text(&args.registry)?)
        .with_context(|| format!("registry {}", args.registry.display()))?;
    let landmarks = load_landmarks(args.landmarks.as_deref())?;
    let overrides = match &args.attrs {
        Some(p) => read_attributes(&read_text(p)?)
            .with_context(|| format!("attribute file {}", p.display()))?,
        None => BTreeMap::new(),
    };

    let mut samples = Vec::new();
    let mut skipped = 0;
    for row in &manifest.rows {
        if row.augmented || experiment::is_augmented_id(&row.image_id) {
            skipped += 1;
            continue;
        }
        let identity = row
            .identity
            .clone()
            .ok_or_else(|| anyhow!("image `{}` has no identity", row.image_id))?;
        let image = pnm::load(&row.path).map_err(anyhow::Error::from)?;
        let context = || format!("image `{}`", row.image_id);
        let raw = experiment::normalize_image(&image, &FaceSource::Whole, config.out_side)
            .with_context(context)?;
        let normalized =
            experiment::normalize_image(&image, &face_source(row, &landmarks), config.out_side)
                .with_context(context)?;
        samples.push(Sample {
            image_id: row.image_id.clone(),
            identity,
            raw,
            normalized,
        });
    }
    if skipped > 0 {
        warn!("skipped {skipped} augmented rows; mirrored copies are generated per fold");
    }
    let outcome = experiment::run_experiment(&samples, &registry, &overrides, &config.experiment())
        .map_err(anyhow::Error::from)?;
    let generated_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let report = RunReport::new(generated_at, config, samples.len(), skipped, &outcome);
    if let Some(out) = &args.out {
        write_text(out, &to_json(&report)?)?;
    }
    Ok(report)
}
