//! Patch-based ensemble detection of synthetically generated images.
//!
//! An image is split into square patches, every patch is scored by each
//! member of an ensemble of patch scorers (negative = real, positive =
//! synthetic), the patch scores of each scorer are collapsed into one image
//! score, and the per-scorer image scores are averaged into the final
//! verdict.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`patching`]: random and JPEG-grid-aligned patch sampling, cropping.
//! - [`augmentation`]: the stochastic training-time editing pipeline.
//! - [`scoring`]: the [`PatchScorer`](scoring::PatchScorer) abstraction,
//!   analytic scorers and the ONNX model adapter.
//! - [`aggregation`]: patch-score aggregation policies and ensemble fusion.
//! - [`ensemble`]: end-to-end scoring of one image by an ensemble.
//! - [`evaluation`]: ROC/AUC, confusion, histograms and the policy
//!   simulation.
//! - [`recipes`]: the five orthogonal training-dataset recipes and manifest
//!   materialization.

pub mod aggregation;
pub mod augmentation;
mod buffer;
pub mod ensemble;
pub mod evaluation;
pub mod patching;
pub mod recipes;
pub mod scoring;
pub mod seed;

pub use aggregation::{aggregate, classify, fuse_ensemble, AggregationPolicy, ImageVerdict, Label};
pub use buffer::{BufferError, ImageBuffer};
pub use ensemble::{EnsembleConfig, EnsembleMember};
pub use patching::{PatchRegion, SamplingMode, SamplingPolicy};
pub use scoring::{PatchScoreVector, PatchScorer, ScorerId};

/// Side length of the patches fed to every scorer by default.
pub const DEFAULT_PATCH_SIZE: u32 = 128;

/// Side of the JPEG DCT block lattice.
pub const JPEG_BLOCK: u32 = 8;
