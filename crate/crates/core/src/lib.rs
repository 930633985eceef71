//! Uncertainty-driven quality assurance for volumetric segmentations.
//!
//! Monte Carlo dropout probability samples from three slice orientations are
//! fused into one segmentation, turned into a voxel-wise predictive entropy
//! map, and reduced to a scalar *doubt* score: entropy far from the predicted
//! boundary, weighted by the distance to it. Cases whose doubt exceeds a
//! threshold are flagged for expert review.
//!
//! Volume math is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`). The aliases below name the concrete types the pipeline
//! uses: probability samples are stored as `f32`, derived maps as `f64`.

pub mod doubt;
pub mod error;
pub mod fusion;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod triage;
pub mod uncertainty;
pub mod volgrid;

pub use error::{Error, Result};
pub use scalar::Real;
pub use volgrid::{BinaryMask, Connectivity, GridShape, ScalarVolume};

/// Double-precision volume used for entropy, distance and fused maps.
pub type Volume = ScalarVolume<f64>;
/// Single-precision volume, the on-disk representation of probabilities.
pub type VolumeF32 = ScalarVolume<f32>;
/// MC sample set as read from disk.
pub type SampleSet = fusion::McSampleSet<f32>;
