//! Run configuration, stages and the manifest.

pub mod config;
pub mod manifest;
pub mod stages;

pub use config::{BackendKind, Config, Overrides, SampleMode};
pub use manifest::{Manifest, StageRecord, MANIFEST_FILE};
pub use stages::{Pipeline, Stage};
