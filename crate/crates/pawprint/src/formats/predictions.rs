//! `probe_id,true_label,ranked_labels` with the ranking `|`-separated.

use pawprint_core::eval::EvalError;
use pawprint_core::PredictionRecord;
use thiserror::Error;

use super::{finish, line_of, reader, writer};

const HEADER: [&str; 3] = ["probe_id", "true_label", "ranked_labels"];
pub const RANK_SEPARATOR: char = '|';

#[derive(Debug, Error)]
pub enum PredictionFileError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed header: expected `probe_id,true_label,ranked_labels`")]
    MalformedHeader,
    #[error("line {line}: expected 3 columns, found {found}")]
    WrongFieldCount { line: u64, found: usize },
    #[error("line {line}: {source}")]
    Row { line: u64, source: EvalError },
}

pub fn read_predictions(text: &str) -> Result<Vec<PredictionRecord>, PredictionFileError> {
    let mut records = reader(text).into_records();
    let header = records.next().transpose()?;
    if header.as_ref().is_none_or(|h| h.iter().ne(HEADER)) {
        return Err(PredictionFileError::MalformedHeader);
    }
    let mut out = Vec::new();
    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.len() != 3 {
            return Err(PredictionFileError::WrongFieldCount {
                line,
                found: record.len(),
            });
        }
        let ranked = record[2]
            .split(RANK_SEPARATOR)
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        let p = PredictionRecord::new(&record[0], &record[1], ranked)
            .map_err(|source| PredictionFileError::Row { line, source })?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_predictions(records: &[PredictionRecord]) -> String {
    let mut w = writer();
    w.write_record(HEADER).expect("in-memory write");
    for r in records {
        let ranked = r.ranked_labels().join(&RANK_SEPARATOR.to_string());
        w.write_record([r.probe_id.as_str(), r.true_label.as_str(), ranked.as_str()])
            .expect("in-memory write");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "probe_id,true_label,ranked_labels\np1,pug,pug|husky\np2,husky,pug|husky\n";
        let records = read_predictions(text).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].top(), "pug");
        assert!(!records[1].is_correct());
        assert_eq!(write_predictions(&records), text);
    }

    #[test]
    fn rejections() {
        assert!(matches!(
            read_predictions("probe_id,true_label,ranked_labels\np1,pug,\n"),
            Err(PredictionFileError::Row {
                source: EvalError::EmptyRanking(_),
                ..
            })
        ));
        assert!(matches!(
            read_predictions("probe_id,true_label,ranked_labels\np1,pug,pug|pug\n"),
            Err(PredictionFileError::Row {
                source: EvalError::DuplicateRankedLabel { .. },
                ..
            })
        ));
        assert!(matches!(
            read_predictions("probe,truth,ranks\n"),
            Err(PredictionFileError::MalformedHeader)
        ));
    }
}
