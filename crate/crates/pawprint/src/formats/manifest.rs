//! Dataset manifest: one row per image file.
//!
//! Columns: `image_id,path,identity,breed,box_left,box_top,box_width,box_height,split,augmented`
//! plus the provenance columns `source_path,method` written by `normalize`.
//! Only `image_id` and `path` are required; relative paths resolve against
//! the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use pawprint_core::PixelRect;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{finish, writer};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: empty {field}")]
    EmptyField { row: usize, field: &'static str },
    #[error("image id `{0}` appears twice")]
    DuplicateImageId(String),
    #[error("image `{0}`: box columns must be all present or all empty")]
    PartialBox(String),
    #[error("image `{0}`: box must have positive finite width and height")]
    InvalidBox(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawRow {
    image_id: String,
    path: String,
    #[serde(default)]
    identity: Option<String>,
    #[serde(default)]
    breed: Option<String>,
    #[serde(default)]
    box_left: Option<f64>,
    #[serde(default)]
    box_top: Option<f64>,
    #[serde(default)]
    box_width: Option<f64>,
    #[serde(default)]
    box_height: Option<f64>,
    #[serde(default)]
    split: Option<Split>,
    #[serde(default)]
    augmented: Option<bool>,
    #[serde(default)]
    source_path: Option<String>,
    #[serde(default)]
    method: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub image_id: String,
    /// Resolved against the manifest directory.
    pub path: PathBuf,
    pub identity: Option<String>,
    pub breed: Option<String>,
    pub face_box: Option<PixelRect>,
    pub split: Option<Split>,
    pub augmented: bool,
    pub source_path: Option<PathBuf>,
    pub method: Option<String>,
}

impl ManifestRow {
    pub fn new(image_id: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        ManifestRow {
            image_id: image_id.into(),
            path: path.into(),
            identity: None,
            breed: None,
            face_box: None,
            split: None,
            augmented: false,
            source_path: None,
            method: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

fn non_empty(value: Option<String>) -> Option<String> {
    value.filter(|v| !v.is_empty())
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ManifestError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in reader.deserialize::<RawRow>().enumerate() {
            let raw = raw?;
            let row = i + 1;
            if raw.image_id.is_empty() {
                return Err(ManifestError::EmptyField {
                    row,
                    field: "image_id",
                });
            }
            if raw.path.is_empty() {
                return Err(ManifestError::EmptyField { row, field: "path" });
            }
            if !seen.insert(raw.image_id.clone()) {
                return Err(ManifestError::DuplicateImageId(raw.image_id));
            }
            let face_box = match (raw.box_left, raw.box_top, raw.box_width, raw.box_height) {
                (None, None, None, None) => None,
                (Some(l), Some(t), Some(w), Some(h)) => Some(
                    PixelRect::new(l, t, w, h)
                        .map_err(|_| ManifestError::InvalidBox(raw.image_id.clone()))?,
                ),
                _ => return Err(ManifestError::PartialBox(raw.image_id)),
            };
            rows.push(ManifestRow {
                path: base_dir.join(&raw.path),
                source_path: non_empty(raw.source_path).map(|p| base_dir.join(p)),
                identity: non_empty(raw.identity),
                breed: non_empty(raw.breed),
                face_box,
                split: raw.split,
                augmented: raw.augmented.unwrap_or(false),
                method: non_empty(raw.method),
                image_id: raw.image_id,
            });
        }
        Ok(Manifest { rows })
    }

    /// Image paths come back absolute.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let io = |source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        };
        let text = fs::read_to_string(path).map_err(io)?;
        let absolute = std::path::absolute(path).map_err(io)?;
        Self::parse(&text, absolute.parent().unwrap_or(Path::new("/")))
    }

    /// Paths under `base_dir` are written relative to it.
    pub fn to_csv(&self, base_dir: &Path) -> String {
        let relative = |p: &Path| {
            p.strip_prefix(base_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let with_provenance = self
            .rows
            .iter()
            .any(|r| r.source_path.is_some() || r.method.is_some());
        let mut w = writer();
        let mut header = vec![
            "image_id",
            "path",
            "identity",
            "breed",
            "box_left",
            "box_top",
            "box_width",
            "box_height",
            "split",
            "augmented",
        ];
        if with_provenance {
            header.extend(["source_path", "method"]);
        }
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let b = r.face_box;
            let num = |f: fn(&PixelRect) -> f64| {
                b.as_ref()
                    .map(f)
                    .map_or_else(String::new, |v| v.to_string())
            };
            let mut fields = vec![
                r.image_id.clone(),
                relative(&r.path),
                r.identity.clone().unwrap_or_default(),
                r.breed.clone().unwrap_or_default(),
                num(PixelRect::left),
                num(PixelRect::top),
                num(PixelRect::width),
                num(PixelRect::height),
                match r.split {
                    Some(Split::Train) => "train".into(),
                    Some(Split::Test) => "test".into(),
                    None => String::new(),
                },
                r.augmented.to_string(),
            ];
            if with_provenance {
                fields.push(r.source_path.as_deref().map(relative).unwrap_or_default());
                fields.push(r.method.clone().unwrap_or_default());
            }
            w.write_record(&fields).expect("in-memory write");
        }
        finish(w)
    }

    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        let base = path.parent().unwrap_or(Path::new(""));
        fs::write(path, self.to_csv(base)).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
