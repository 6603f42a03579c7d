//! `probe_id,<label1>,<label2>,...`, one score row per probe.
//!
//! An optional trailing `z` column carries the re-ranking normalizer and is
//! ignored on read.

use std::collections::{BTreeMap, BTreeSet};

use pawprint_core::matcher::ScoreError;
use pawprint_core::ScoreVector;
use thiserror::Error;

use super::{finish, line_of, reader, writer};

/// Row-sum tolerance for external score files.
pub const FILE_SUM_TOLERANCE: f64 = 1e-6;

pub const Z_COLUMN: &str = "z";

#[derive(Debug, Error)]
pub enum ScoreFileError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    WrongFieldCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: score for `{label}` is not a number: `{value}`")]
    NonNumericScore {
        line: u64,
        label: String,
        value: String,
    },
    #[error("line {line}: probe `{probe}` appears twice")]
    DuplicateProbeId { line: u64, probe: String },
    #[error("line {line}: probe `{probe}`: {source}")]
    Score {
        line: u64,
        probe: String,
        source: ScoreError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub labels: Vec<String>,
    pub rows: BTreeMap<String, ScoreVector>,
}

/// Every row is flagged normalized only if all rows sum to 1 within
/// [`FILE_SUM_TOLERANCE`].
pub fn read_scores(text: &str) -> Result<ScoreTable, ScoreFileError> {
    let mut records = reader(text).into_records();
    let header = records
        .next()
        .transpose()?
        .ok_or_else(|| ScoreFileError::MalformedHeader("empty file".into()))?;
    if header.get(0) != Some("probe_id") {
        return Err(ScoreFileError::MalformedHeader(
            "first column must be `probe_id`".into(),
        ));
    }
    let mut labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let has_z = labels.last().is_some_and(|l| l == Z_COLUMN);
    if has_z {
        labels.pop();
    }
    if labels.is_empty() {
        return Err(ScoreFileError::MalformedHeader("no label columns".into()));
    }
    let mut seen = BTreeSet::new();
    for label in &labels {
        if label.is_empty() {
            return Err(ScoreFileError::MalformedHeader("empty label".into()));
        }
        if !seen.insert(label.as_str()) {
            return Err(ScoreFileError::MalformedHeader(format!(
                "label `{label}` repeated"
            )));
        }
    }
    let expected = header.len();

    let mut rows = BTreeMap::new();
    let mut all_normalized = true;
    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.len() != expected {
            return Err(ScoreFileError::WrongFieldCount {
                line,
                expected,
                found: record.len(),
            });
        }
        let probe = record[0].to_string();
        let scores = labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let raw = &record[i + 1];
                raw.parse::<f64>()
                    .map_err(|_| ScoreFileError::NonNumericScore {
                        line,
                        label: label.clone(),
                        value: raw.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vector = ScoreVector::with_tolerance(labels.clone(), scores, FILE_SUM_TOLERANCE)
            .map_err(|source| ScoreFileError::Score {
                line,
                probe: probe.clone(),
                source,
            })?;
        all_normalized &= vector.is_normalized();
        if rows.contains_key(&probe) {
            return Err(ScoreFileError::DuplicateProbeId { line, probe });
        }
        rows.insert(probe, vector);
    }
    if !all_normalized {
        rows = rows
            .into_iter()
            .map(|(p, v)| (p, v.into_unnormalized()))
            .collect();
    }
    Ok(ScoreTable { labels, rows })
}

/// Writes rows in the given order; `z`, when given, must cover every probe.
pub fn write_scores<'a>(
    labels: &[String],
    rows: impl IntoIterator<Item = (&'a str, &'a ScoreVector)>,
    z: Option<&BTreeMap<String, f64>>,
) -> String {
    let mut w = writer();
    let mut header = vec!["probe_id".to_string()];
    header.extend(labels.iter().cloned());
    if z.is_some() {
        header.push(Z_COLUMN.into());
    }
    w.write_record(&header).expect("in-memory write");
    for (probe, vector) in rows {
        let mut row = vec![probe.to_string()];
        row.extend(vector.scores().iter().map(f64::to_string));
        if let Some(z) = z {
            row.push(z.get(probe).map_or_else(String::new, f64::to_string));
        }
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}
