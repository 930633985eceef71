//! Fusion of Monte Carlo probability samples into one segmentation, plus
//! intensity normalization.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volgrid::{BinaryMask, ScalarVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Plane {
    Axial,
    Coronal,
    Sagittal,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Axial, Plane::Coronal, Plane::Sagittal];

    pub fn name(self) -> &'static str {
        match self {
            Plane::Axial => "axial",
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
        }
    }
}

/// Foreground probability samples, T per plane.
#[derive(Debug, Clone)]
pub struct McSampleSet<T> {
    planes: [Vec<ScalarVolume<T>>; 3],
}

impl<T: Real> McSampleSet<T> {
    pub fn new(
        axial: Vec<ScalarVolume<T>>,
        coronal: Vec<ScalarVolume<T>>,
        sagittal: Vec<ScalarVolume<T>>,
    ) -> Result<Self> {
        let t = axial.len();
        if t == 0 {
            return Err(Error::EmptySampleList);
        }
        if coronal.len() != t || sagittal.len() != t {
            return Err(Error::InconsistentT(format!(
                "axial {t}, coronal {}, sagittal {}",
                coronal.len(),
                sagittal.len()
            )));
        }
        let shape = *axial[0].shape();
        for v in axial.iter().chain(&coronal).chain(&sagittal) {
            shape.check_same(v.shape(), "sample set")?;
            let (lo, hi) = v.min_max();
            if lo < T::zero() || hi > T::one() {
                return Err(Error::InvalidConfig(format!(
                    "sample probabilities must lie in [0, 1], found range [{lo}, {hi}]"
                )));
            }
        }
        Ok(McSampleSet {
            planes: [axial, coronal, sagittal],
        })
    }

    pub fn samples(&self, plane: Plane) -> &[ScalarVolume<T>] {
        &self.planes[plane as usize]
    }

    pub fn samples_per_plane(&self) -> usize {
        self.planes[0].len()
    }

    /// Per-plane MC mean followed by the plane average.
    pub fn fuse(&self) -> Result<ScalarVolume<T>> {
        let [a, c, s] = &self.planes;
        plane_average(&mc_mean(a)?, &mc_mean(c)?, &mc_mean(s)?)
    }
}

/// Voxelwise mean of `samples`.
///
/// Each voxel's values are summed in ascending order as offsets from their
/// minimum, so the result is bitwise independent of sample order and equal
/// inputs return themselves exactly.
pub fn mc_mean<T: Real>(samples: &[ScalarVolume<T>]) -> Result<ScalarVolume<T>> {
    let refs: Vec<&ScalarVolume<T>> = samples.iter().collect();
    mc_mean_refs(&refs)
}

pub fn mc_mean_refs<T: Real>(samples: &[&ScalarVolume<T>]) -> Result<ScalarVolume<T>> {
    let first = samples.first().ok_or(Error::EmptySampleList)?;
    let shape = *first.shape();
    for s in samples {
        shape.check_same(s.shape(), "mc_mean")?;
    }
    let count = T::of(samples.len() as f64);
    let mut out = vec![T::zero(); shape.len()];
    out.par_chunks_mut(4096).enumerate().for_each_init(
        || Vec::with_capacity(samples.len()),
        |buf, (chunk, dst)| {
            let base = chunk * 4096;
            for (k, o) in dst.iter_mut().enumerate() {
                buf.clear();
                buf.extend(samples.iter().map(|s| s.data()[base + k]));
                buf.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                let lo = buf[0];
                let hi = buf[buf.len() - 1];
                let offset = buf.iter().fold(T::zero(), |acc, &v| acc + (v - lo));
                *o = (lo + offset / count).max(lo).min(hi);
            }
        },
    );
    Ok(ScalarVolume::from_raw(shape, out))
}

/// Voxelwise mean of the three plane predictions.
pub fn plane_average<T: Real>(
    axial: &ScalarVolume<T>,
    coronal: &ScalarVolume<T>,
    sagittal: &ScalarVolume<T>,
) -> Result<ScalarVolume<T>> {
    let shape = *axial.shape();
    shape.check_same(coronal.shape(), "plane_average")?;
    shape.check_same(sagittal.shape(), "plane_average")?;
    let three = T::of(3.0);
    let data = axial
        .data()
        .par_iter()
        .zip(coronal.data().par_iter())
        .zip(sagittal.data().par_iter())
        .map(|((&a, &c), &s)| {
            let m = a + ((c - a) + (s - a)) / three;
            m.max(a.min(c).min(s)).min(a.max(c).max(s))
        })
        .collect();
    Ok(ScalarVolume::from_raw(shape, data))
}

/// Foreground iff the fused probability is at least 0.5 (ties go to foreground).
pub fn classify<T: Real>(prob: &ScalarVolume<T>) -> BinaryMask {
    let half = T::of(0.5);
    let data = prob.data().par_iter().map(|&p| (p >= half) as u8).collect();
    BinaryMask::new(*prob.shape(), data).expect("binary by construction")
}

/// Shifts and scales to zero mean and unit population standard deviation.
pub fn zscore_normalize<T: Real>(vol: &ScalarVolume<T>) -> Result<ScalarVolume<T>> {
    let n = vol.data().len() as f64;
    let mean = vol.data().iter().map(|v| v.to_f64_lossless()).sum::<f64>() / n;
    let var = vol
        .data()
        .iter()
        .map(|v| {
            let d = v.to_f64_lossless() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::ConstantVolume);
    }
    vol.map(|v| T::of((v.to_f64_lossless() - mean) / std))
}
