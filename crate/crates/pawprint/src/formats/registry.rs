//! Identity registry (`identity,breed,gender`) and per-probe attribute
//! overrides (`probe_id,gender,breed`).

use std::collections::BTreeMap;

use pawprint_core::softbio::SoftBioError;
use pawprint_core::{Gender, IdentityRegistry, SoftAttributes};
use thiserror::Error;

use super::{finish, line_of, reader, writer};

/// Attribute value meaning "not known" in override files and on the CLI.
pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Error)]
pub enum RegistryFileError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed header: expected `{0}`")]
    MalformedHeader(&'static str),
    #[error("line {line}: expected 3 columns, found {found}")]
    WrongFieldCount { line: u64, found: usize },
    #[error("line {line}: {source}")]
    Row { line: u64, source: SoftBioError },
    #[error("line {line}: probe `{probe}` appears twice")]
    DuplicateProbeId { line: u64, probe: String },
}

fn rows<'a>(
    text: &'a str,
    header: &'static str,
) -> Result<
    impl Iterator<Item = Result<csv::StringRecord, RegistryFileError>> + 'a,
    RegistryFileError,
> {
    let mut records = reader(text).into_records();
    let first = records.next().transpose()?;
    let expected: Vec<&str> = header.split(',').collect();
    if first
        .as_ref()
        .is_none_or(|h| h.iter().ne(expected.iter().copied()))
    {
        return Err(RegistryFileError::MalformedHeader(header));
    }
    Ok(records.map(|r| {
        let r = r?;
        if r.len() != 3 {
            return Err(RegistryFileError::WrongFieldCount {
                line: line_of(&r),
                found: r.len(),
            });
        }
        Ok(r)
    }))
}

pub fn read_registry(text: &str) -> Result<IdentityRegistry, RegistryFileError> {
    let mut registry = IdentityRegistry::new();
    for record in rows(text, "identity,breed,gender")? {
        let record = record?;
        let line = line_of(&record);
        let mut row = || -> Result<(), SoftBioError> {
            if record[2].is_empty() {
                return Err(SoftBioError::EmptyField("gender"));
            }
            let gender: Gender = record[2].parse()?;
            registry.insert(&record[0], &record[1], gender)
        };
        row().map_err(|source| RegistryFileError::Row { line, source })?;
    }
    Ok(registry)
}

pub fn write_registry(registry: &IdentityRegistry) -> String {
    let mut w = writer();
    w.write_record(["identity", "breed", "gender"])
        .expect("in-memory write");
    for (id, record) in registry.iter() {
        w.write_record([id, &record.breed, record.gender.as_str()])
            .expect("in-memory write");
    }
    finish(w)
}

/// Empty or `unknown` means the gender is not known.
pub fn parse_gender(value: &str) -> Result<Option<Gender>, SoftBioError> {
    if value.is_empty() || value.eq_ignore_ascii_case(UNKNOWN) {
        Ok(None)
    } else {
        value.parse().map(Some)
    }
}

/// Empty or `unknown` means the breed is not known.
pub fn parse_breed(value: &str) -> Option<String> {
    if value.is_empty() || value.eq_ignore_ascii_case(UNKNOWN) {
        None
    } else {
        Some(value.to_string())
    }
}

pub fn read_attributes(text: &str) -> Result<BTreeMap<String, SoftAttributes>, RegistryFileError> {
    let mut out = BTreeMap::new();
    for record in rows(text, "probe_id,gender,breed")? {
        let record = record?;
        let line = line_of(&record);
        let gender =
            parse_gender(&record[1]).map_err(|source| RegistryFileError::Row { line, source })?;
        let attrs = SoftAttributes::new(gender, parse_breed(&record[2]));
        let probe = record[0].to_string();
        if out.insert(probe.clone(), attrs).is_some() {
            return Err(RegistryFileError::DuplicateProbeId { line, probe });
        }
    }
    Ok(out)
}

pub fn write_attributes(attrs: &BTreeMap<String, SoftAttributes>) -> String {
    let mut w = writer();
    w.write_record(["probe_id", "gender", "breed"])
        .expect("in-memory write");
    for (probe, a) in attrs {
        let gender = a.gender.map_or(UNKNOWN, Gender::as_str);
        let breed = a.breed.as_deref().unwrap_or(UNKNOWN);
        w.write_record([probe.as_str(), gender, breed])
            .expect("in-memory write");
    }
    finish(w)
}
