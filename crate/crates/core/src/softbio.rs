//! Soft-biometric re-ranking.
//!
//! Known breed and gender act as 0/1 gates on the matcher's identity scores:
//!
//! ```text
//! P(id | g, b; s) = Score(id) * Ind_G(id; g) * Ind_B(id; b) / Z(g, b; s)
//! ```
//!
//! where `Z` is the sum of the gated scores. An unknown attribute gates
//! nothing. The counting prior `1 / |{id matching g and b}|` gives the chance
//! of a blind guess being right once the attributes are known.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::matcher::{ScoreError, ScoreVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoftBioError {
    #[error("`{0}` is not in the identity registry")]
    UnknownIdentity(String),
    #[error("identity `{0}` is already registered")]
    DuplicateIdentity(String),
    #[error("empty {0} field")]
    EmptyField(&'static str),
    #[error("invalid gender `{0}` (expected male or female)")]
    InvalidGender(String),
    #[error("no identity matches the soft attributes with a nonzero score")]
    NoCandidateMatches,
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = SoftBioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            _ => Err(SoftBioError::InvalidGender(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityRecord {
    pub breed: String,
    pub gender: Gender,
}

/// Identity label to (breed, gender).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentityRegistry {
    entries: BTreeMap<String, IdentityRecord>,
}

impl IdentityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        identity: impl Into<String>,
        breed: impl Into<String>,
        gender: Gender,
    ) -> Result<(), SoftBioError> {
        let identity = identity.into();
        let breed = breed.into();
        if identity.trim().is_empty() {
            return Err(SoftBioError::EmptyField("identity"));
        }
        if breed.trim().is_empty() {
            return Err(SoftBioError::EmptyField("breed"));
        }
        if self.entries.contains_key(&identity) {
            return Err(SoftBioError::DuplicateIdentity(identity));
        }
        self.entries
            .insert(identity, IdentityRecord { breed, gender });
        Ok(())
    }

    pub fn get(&self, identity: &str) -> Option<&IdentityRecord> {
        self.entries.get(identity)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IdentityRecord)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn breeds(&self) -> BTreeSet<&str> {
        self.entries.values().map(|r| r.breed.as_str()).collect()
    }

    fn record(&self, identity: &str) -> Result<&IdentityRecord, SoftBioError> {
        self.get(identity)
            .ok_or_else(|| SoftBioError::UnknownIdentity(identity.to_string()))
    }
}

/// Probe-side soft attributes; `None` means unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoftAttributes {
    pub gender: Option<Gender>,
    pub breed: Option<String>,
}

impl SoftAttributes {
    pub fn unknown() -> Self {
        Self::default()
    }

    pub fn new(gender: Option<Gender>, breed: Option<String>) -> Self {
        SoftAttributes { gender, breed }
    }

    /// The registry's own attributes for `identity`.
    pub fn of_identity(registry: &IdentityRegistry, identity: &str) -> Result<Self, SoftBioError> {
        let record = registry.record(identity)?;
        Ok(SoftAttributes {
            gender: Some(record.gender),
            breed: Some(record.breed.clone()),
        })
    }
}

pub fn indicator_gender(
    registry: &IdentityRegistry,
    identity: &str,
    gender: Option<Gender>,
) -> Result<u8, SoftBioError> {
    let record = registry.record(identity)?;
    Ok(u8::from(gender.is_none_or(|g| g == record.gender)))
}

pub fn indicator_breed(
    registry: &IdentityRegistry,
    identity: &str,
    breed: Option<&str>,
) -> Result<u8, SoftBioError> {
    let record = registry.record(identity)?;
    Ok(u8::from(breed.is_none_or(|b| b == record.breed)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReRankResult {
    pub posterior: ScoreVector,
    /// Sum of the gated scores.
    pub z: f64,
    /// Identities whose indicator product was 0.
    pub penalized: BTreeSet<String>,
}

/// Gates identity scores by the probe's soft attributes and renormalizes.
pub fn rerank(
    scores: &ScoreVector,
    registry: &IdentityRegistry,
    attrs: &SoftAttributes,
) -> Result<ReRankResult, SoftBioError> {
    let mut numerators = Vec::with_capacity(scores.len());
    let mut penalized = BTreeSet::new();
    for (id, score) in scores.iter() {
        let gate = indicator_gender(registry, id, attrs.gender)?
            * indicator_breed(registry, id, attrs.breed.as_deref())?;
        if gate == 0 {
            penalized.insert(id.to_string());
            numerators.push(0.0);
        } else {
            numerators.push(score);
        }
    }
    let z: f64 = numerators.iter().sum();
    if z <= 0.0 {
        return Err(SoftBioError::NoCandidateMatches);
    }
    let posterior = numerators.into_iter().map(|n| (n / z).min(1.0)).collect();
    Ok(ReRankResult {
        posterior: ScoreVector::new(scores.labels().to_vec(), posterior)?,
        z,
        penalized,
    })
}

/// Chance of a uniformly guessed identity being right given the attributes.
pub fn identity_prior(
    registry: &IdentityRegistry,
    attrs: &SoftAttributes,
) -> Result<Ratio<u64>, SoftBioError> {
    let matching = registry
        .iter()
        .filter(|(_, r)| attrs.gender.is_none_or(|g| g == r.gender))
        .filter(|(_, r)| attrs.breed.as_deref().is_none_or(|b| b == r.breed))
        .count() as u64;
    if matching == 0 {
        return Err(SoftBioError::NoCandidateMatches);
    }
    Ok(Ratio::new(1, matching))
}
