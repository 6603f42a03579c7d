//! File formats, experiment orchestration and command implementations for
//! the `pawprint` CLI. The algorithms live in `pawprint-core`.

pub mod commands;
pub mod config;
pub mod formats;
pub mod pnm;
pub mod report;

pub use pawprint_core as core;
