//! The doubt score: high-entropy voxels away from the predicted boundary,
//! weighted by their distance to it.
//!
//! ```text
//! band = dilate(outline(seg), conn, iterations)
//! k    = !band & (entropy > entropy_threshold)
//! w    = edt(outline(seg))
//! dbt  = sum_i k_i * w_i * h_i
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volgrid::{self, BinaryMask, Connectivity, ScalarVolume};

/// What to do when the segmentation has no foreground and the distance
/// weight is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptySegmentationPolicy {
    /// Report [`Doubt::Sentinel`], which always flags.
    #[default]
    SentinelMax,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubtConfig {
    pub entropy_threshold: f64,
    pub dilation_iterations: usize,
    pub connectivity: Connectivity,
    pub empty_segmentation_policy: EmptySegmentationPolicy,
}

impl Default for DoubtConfig {
    fn default() -> Self {
        DoubtConfig {
            entropy_threshold: 0.5,
            dilation_iterations: 2,
            connectivity: Connectivity::Faces6,
            empty_segmentation_policy: EmptySegmentationPolicy::SentinelMax,
        }
    }
}

impl DoubtConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.entropy_threshold.is_finite() || self.entropy_threshold < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "entropy threshold must be a nonnegative number, got {}",
                self.entropy_threshold
            )));
        }
        Ok(())
    }
}

/// A doubt score, or the sentinel for an empty segmentation. The sentinel
/// compares above every finite score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Doubt {
    Score(f64),
    Sentinel,
}

impl Doubt {
    pub fn is_sentinel(self) -> bool {
        matches!(self, Doubt::Sentinel)
    }

    /// `+inf` for the sentinel.
    pub fn as_f64(self) -> f64 {
        match self {
            Doubt::Score(v) => v,
            Doubt::Sentinel => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubtBreakdown {
    pub doubt: Doubt,
    pub masked_voxel_count: usize,
    /// Largest single `w_i * h_i` among masked-in voxels, 0 when none (or sentinel).
    pub max_weighted_term: f64,
    pub outline_voxel_count: usize,
}

/// Boundary outline used by both the exclusion band and the distance weight.
fn seg_outline(seg: &BinaryMask) -> BinaryMask {
    volgrid::outline(seg, Connectivity::Faces6)
}

fn band_from_outline(outline: &BinaryMask, cfg: &DoubtConfig) -> BinaryMask {
    if cfg.dilation_iterations == 0 {
        outline.clone()
    } else {
        volgrid::dilate(outline, cfg.connectivity, cfg.dilation_iterations)
    }
}

fn mask_from_band<T: Real>(
    band: &BinaryMask,
    entropy: &ScalarVolume<T>,
    cfg: &DoubtConfig,
) -> BinaryMask {
    let tau = T::of(cfg.entropy_threshold);
    let data = band
        .data()
        .par_iter()
        .zip(entropy.data().par_iter())
        .map(|(&b, &h)| (b == 0 && h > tau) as u8)
        .collect();
    BinaryMask::new(*band.shape(), data).expect("binary by construction")
}

/// High-entropy voxels outside the dilated outline band of `seg`.
pub fn exclusion_mask<T: Real>(
    seg: &BinaryMask,
    entropy: &ScalarVolume<T>,
    cfg: &DoubtConfig,
) -> Result<BinaryMask> {
    seg.shape().check_same(entropy.shape(), "exclusion_mask")?;
    let band = band_from_outline(&seg_outline(seg), cfg);
    Ok(mask_from_band(&band, entropy, cfg))
}

/// Distance in mm from each voxel to the outline of `seg`.
pub fn distance_weight<T: Real>(seg: &BinaryMask, spacing: [f64; 3]) -> Result<ScalarVolume<T>> {
    if seg.is_empty() {
        return Err(Error::EmptySegmentation);
    }
    volgrid::edt(&seg_outline(seg), spacing)
}

const CHUNK: usize = 1 << 14;

pub fn doubt_score<T: Real>(
    entropy: &ScalarVolume<T>,
    seg: &BinaryMask,
    cfg: &DoubtConfig,
) -> Result<DoubtBreakdown> {
    cfg.validate()?;
    seg.shape().check_same(entropy.shape(), "doubt_score")?;
    let outline = seg_outline(seg);
    let band = band_from_outline(&outline, cfg);
    let k = mask_from_band(&band, entropy, cfg);
    let masked_voxel_count = k.count();

    if seg.is_empty() {
        return match cfg.empty_segmentation_policy {
            EmptySegmentationPolicy::Error => Err(Error::EmptySegmentation),
            EmptySegmentationPolicy::SentinelMax => Ok(DoubtBreakdown {
                doubt: Doubt::Sentinel,
                masked_voxel_count,
                max_weighted_term: 0.0,
                outline_voxel_count: 0,
            }),
        };
    }

    let w: ScalarVolume<f64> = volgrid::edt(&outline, seg.shape().spacing())?;
    // fixed chunking keeps the reduction order independent of the thread count
    let partials: Vec<(f64, f64)> = k
        .data()
        .par_chunks(CHUNK)
        .zip(w.data().par_chunks(CHUNK))
        .zip(entropy.data().par_chunks(CHUNK))
        .map(|((kc, wc), hc)| {
            let mut sum = 0.0f64;
            let mut max = 0.0f64;
            for ((&ki, &wi), &hi) in kc.iter().zip(wc).zip(hc) {
                if ki == 1 {
                    let term = wi * hi.to_f64_lossless();
                    sum += term;
                    max = max.max(term);
                }
            }
            (sum, max)
        })
        .collect();
    let (dbt, max_weighted_term) = partials
        .iter()
        .fold((0.0, 0.0f64), |(s, m), &(ps, pm)| (s + ps, m.max(pm)));

    Ok(DoubtBreakdown {
        doubt: Doubt::Score(dbt),
        masked_voxel_count,
        max_weighted_term,
        outline_voxel_count: outline.count(),
    })
}
