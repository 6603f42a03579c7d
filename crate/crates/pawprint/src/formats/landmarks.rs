//! `image_id,x1,y1,...,x8,y8`, one row per annotated image.

use indexmap::IndexMap;
use pawprint_core::landmarks::LandmarkError;
use pawprint_core::{LandmarkSet, Point2};
use thiserror::Error;

use super::{finish, line_of, reader, writer};

const COLUMNS: usize = 17;

#[derive(Debug, Error)]
pub enum LandmarkFileError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {COLUMNS} columns, found {found}")]
    MissingColumn { line: u64, found: usize },
    #[error("line {line}: column {column} is not a number: `{value}`")]
    NonNumericCoordinate {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: image id `{image_id}` appears twice")]
    DuplicateImageId { line: u64, image_id: String },
    #[error("line {line}: image `{image_id}` has coinciding eye landmarks")]
    DegenerateEyes { line: u64, image_id: String },
    #[error("line {line}: image `{image_id}`: {source}")]
    Invalid {
        line: u64,
        image_id: String,
        source: LandmarkError,
    },
}

/// Landmark sets keyed by image id, in file order.
pub type LandmarkTable = IndexMap<String, LandmarkSet>;

fn header_names() -> Vec<String> {
    let mut names = vec!["image_id".to_string()];
    for i in 1..=8 {
        names.push(format!("x{i}"));
        names.push(format!("y{i}"));
    }
    names
}

pub fn parse_landmark_file(text: &str) -> Result<LandmarkTable, LandmarkFileError> {
    let mut records = reader(text).into_records();
    let header = records
        .next()
        .transpose()?
        .ok_or_else(|| LandmarkFileError::MalformedHeader("empty file".into()))?;
    let names = header_names();
    if header.iter().ne(names.iter().map(String::as_str)) {
        return Err(LandmarkFileError::MalformedHeader(format!(
            "expected `{}`",
            names.join(",")
        )));
    }

    let mut table = LandmarkTable::new();
    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.len() != COLUMNS {
            return Err(LandmarkFileError::MissingColumn {
                line,
                found: record.len(),
            });
        }
        let image_id = record[0].to_string();
        let mut coords = [0.0; 16];
        for (i, c) in coords.iter_mut().enumerate() {
            let raw = &record[i + 1];
            *c = raw
                .parse()
                .map_err(|_| LandmarkFileError::NonNumericCoordinate {
                    line,
                    column: names[i + 1].clone(),
                    value: raw.to_string(),
                })?;
        }
        let points = std::array::from_fn(|i| Point2::new(coords[2 * i], coords[2 * i + 1]));
        let set = LandmarkSet::new(points).map_err(|e| match e {
            LandmarkError::DegenerateEyes => LandmarkFileError::DegenerateEyes {
                line,
                image_id: image_id.clone(),
            },
            source => LandmarkFileError::Invalid {
                line,
                image_id: image_id.clone(),
                source,
            },
        })?;
        if table.contains_key(&image_id) {
            return Err(LandmarkFileError::DuplicateImageId { line, image_id });
        }
        table.insert(image_id, set);
    }
    Ok(table)
}

pub fn write_landmark_file(table: &LandmarkTable) -> String {
    let mut w = writer();
    w.write_record(header_names()).expect("in-memory write");
    for (id, set) in table {
        let mut row = vec![id.clone()];
        for p in set.points() {
            row.push(p.x.to_string());
            row.push(p.y.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}
