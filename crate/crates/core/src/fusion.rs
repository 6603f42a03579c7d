//! Weighted-sum fusion of two classifiers' decisions:
//! `P = alpha * P_raw + (1 - alpha) * P_normalized`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;

use thiserror::Error;

use crate::matcher::{ScoreError, ScoreVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("fusion weight must lie in [0, 1], got {0}")]
    InvalidWeight(f64),
    #[error("score vectors have different label lists")]
    LabelMismatch,
    #[error("probe `{0}` is present in only one score set")]
    ProbeSetMismatch(String),
    #[error("probe `{probe}`: {source}")]
    Probe {
        probe: String,
        #[source]
        source: Box<FusionError>,
    },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Weight given to the raw-image decision.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FusionWeight(f64);

impl FusionWeight {
    pub const DEFAULT: FusionWeight = FusionWeight(0.5);

    pub fn new(alpha: f64) -> Result<Self, FusionError> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(FusionWeight(alpha))
        } else {
            Err(FusionError::InvalidWeight(alpha))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

impl Default for FusionWeight {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub fn fuse(
    raw: &ScoreVector,
    normalized_input: &ScoreVector,
    weight: FusionWeight,
) -> Result<ScoreVector, FusionError> {
    if raw.labels() != normalized_input.labels() {
        return Err(FusionError::LabelMismatch);
    }
    let alpha = weight.alpha();
    let scores = raw
        .scores()
        .iter()
        .zip(normalized_input.scores())
        .map(|(&r, &n)| {
            // n + alpha * (r - n) is exact at alpha = 0 and for r == n.
            if alpha == 1.0 {
                r
            } else {
                (n + alpha * (r - n)).clamp(0.0, 1.0)
            }
        })
        .collect();
    let fused = ScoreVector::new(raw.labels().to_vec(), scores)?;
    Ok(if raw.is_normalized() && normalized_input.is_normalized() {
        fused
    } else {
        fused.into_unnormalized()
    })
}

/// Fuses every probe present in both maps.
pub fn fuse_batch(
    raw_map: &BTreeMap<String, ScoreVector>,
    norm_map: &BTreeMap<String, ScoreVector>,
    weight: FusionWeight,
) -> Result<BTreeMap<String, ScoreVector>, FusionError> {
    if let Some(probe) = raw_map
        .keys()
        .find(|p| !norm_map.contains_key(*p))
        .or_else(|| norm_map.keys().find(|p| !raw_map.contains_key(*p)))
    {
        return Err(FusionError::ProbeSetMismatch(probe.clone()));
    }
    raw_map
        .iter()
        .map(|(probe, raw)| {
            fuse(raw, &norm_map[probe], weight)
                .map(|f| (probe.clone(), f))
                .map_err(|e| FusionError::Probe {
                    probe: probe.clone(),
                    source: Box::new(e),
                })
        })
        .collect()
}
