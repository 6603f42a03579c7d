//! Core algorithms for coarse-to-fine animal identification.
//!
//! Everything here is a pure function over in-memory values and only needs
//! `alloc`: raster transforms, landmark-driven face normalization, a baseline
//! nearest-centroid matcher, weighted-sum score fusion, soft-biometric
//! re-ranking, rank-1 metrics and the seeded fold splitter. File formats, IO
//! and the command-line front end live in the `pawprint` crate.
//!
//! The typical flow for one probe image is:
//!
//! 1. [`landmarks::normalize_face`] rotates the eyes level and crops the face.
//! 2. [`matcher::score_probe`] scores it against per-identity centroids.
//! 3. [`fusion::fuse`] blends the raw-image and normalized-image scores.
//! 4. [`matcher::top_k_breeds`] and [`matcher::filter_gallery`] narrow the gallery.
//! 5. [`softbio::rerank`] gates the scores with known breed and gender.
//! 6. [`eval`] turns the ranked labels into confusion matrices and accuracies.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod eval;
pub mod experiment;
pub mod fusion;
pub mod geometry;
pub mod landmarks;
pub mod matcher;
pub mod raster;
pub mod softbio;

pub use eval::{ConfusionMatrix, FoldAssignment, PerClassStats, PredictionRecord};
pub use fusion::FusionWeight;
pub use geometry::Point2;
pub use landmarks::{FaceBoxDerivation, LandmarkSet};
pub use matcher::{Embedding, GallerySubset, ScoreVector};
pub use raster::{Channels, PixelRect, RasterImage};
pub use softbio::{Gender, IdentityRegistry, SoftAttributes};
