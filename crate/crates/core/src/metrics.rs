//! Ground-truth comparison: Dice, 95th-percentile Hausdorff distance and
//! volume similarity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::{self, BinaryMask, Connectivity, ScalarVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub dice: f64,
    pub hd95_mm: f64,
    pub volume_similarity: f64,
}

/// Foreground and intersection voxel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub pred: usize,
    pub gt: usize,
    pub both: usize,
}

pub fn overlap(pred: &BinaryMask, gt: &BinaryMask) -> Result<Overlap> {
    if !pred.shape().same_dims(gt.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?} vs gt {:?}",
            pred.shape().dims(),
            gt.shape().dims()
        )));
    }
    let mut o = Overlap {
        pred: 0,
        gt: 0,
        both: 0,
    };
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        o.pred += a as usize;
        o.gt += b as usize;
        o.both += (a & b) as usize;
    }
    Ok(o)
}

/// `2|A ∩ B| / (|A| + |B|)`; 1.0 when both masks are empty.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let o = overlap(pred, gt)?;
    let total = o.pred + o.gt;
    if total == 0 {
        return Ok(1.0);
    }
    Ok((2 * o.both) as f64 / total as f64)
}

/// `1 - ||A| - |B|| / (|A| + |B|)`; 1.0 when both masks are empty.
pub fn volume_similarity(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let o = overlap(pred, gt)?;
    let total = o.pred + o.gt;
    if total == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - o.pred.abs_diff(o.gt) as f64 / total as f64)
}

/// Linear-interpolation percentile of an ascending slice, `q` in [0, 100].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=100.0).contains(&q) {
        return None;
    }
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Pooled distances from each surface voxel of one mask to the surface of
/// the other, in both directions, sorted ascending.
pub fn surface_distances(
    pred: &BinaryMask,
    gt: &BinaryMask,
    spacing: [f64; 3],
) -> Result<Vec<f64>> {
    if !pred.shape().same_dims(gt.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?} vs gt {:?}",
            pred.shape().dims(),
            gt.shape().dims()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyMask("prediction"));
    }
    if gt.is_empty() {
        return Err(Error::EmptyMask("ground truth"));
    }
    let surf_pred = volgrid::outline(pred, Connectivity::Faces6);
    let surf_gt = volgrid::outline(gt, Connectivity::Faces6);
    let to_gt: ScalarVolume<f64> = volgrid::edt(&surf_gt, spacing)?;
    let to_pred: ScalarVolume<f64> = volgrid::edt(&surf_pred, spacing)?;
    let mut pooled: Vec<f64> = surf_pred
        .foreground()
        .map(|i| to_gt.data()[i])
        .chain(surf_gt.foreground().map(|i| to_pred.data()[i]))
        .collect();
    pooled.sort_unstable_by(f64::total_cmp);
    Ok(pooled)
}

/// 95th percentile of the pooled symmetric surface distances, in mm.
pub fn hd95(pred: &BinaryMask, gt: &BinaryMask, spacing: [f64; 3]) -> Result<f64> {
    let d = surface_distances(pred, gt, spacing)?;
    Ok(percentile_sorted(&d, 95.0).expect("surfaces of nonempty masks are nonempty"))
}

/// Classic (100th percentile) symmetric surface Hausdorff distance, in mm.
pub fn hausdorff(pred: &BinaryMask, gt: &BinaryMask, spacing: [f64; 3]) -> Result<f64> {
    let d = surface_distances(pred, gt, spacing)?;
    Ok(*d.last().expect("nonempty"))
}

pub fn evaluate(pred: &BinaryMask, gt: &BinaryMask, spacing: [f64; 3]) -> Result<MetricSet> {
    Ok(MetricSet {
        dice: dice(pred, gt)?,
        hd95_mm: hd95(pred, gt, spacing)?,
        volume_similarity: volume_similarity(pred, gt)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::GridShape;

    fn block(n: usize, lo: [usize; 3], hi: [usize; 3]) -> BinaryMask {
        BinaryMask::from_fn(GridShape::cube(n).unwrap(), |x, y, z| {
            (lo[0]..hi[0]).contains(&x)
                && (lo[1]..hi[1]).contains(&y)
                && (lo[2]..hi[2]).contains(&z)
        })
    }

    fn first_n(n_grid: usize, count: usize, offset: usize) -> BinaryMask {
        let s = GridShape::cube(n_grid).unwrap();
        BinaryMask::new(
            s,
            (0..s.len())
                .map(|i| (i >= offset && i < offset + count) as u8)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dice_cases() {
        let a = block(8, [1; 3], [5; 3]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = block(8, [5; 3], [8; 3]);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        // |A| = |B| = 100, |A ∩ B| = 75
        let a = first_n(10, 100, 0);
        let b = first_n(10, 100, 25);
        assert_eq!(dice(&a, &b).unwrap(), 0.75);
        let e = BinaryMask::zeros(*a.shape());
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn vs_cases() {
        let a = first_n(10, 100, 0);
        let b = first_n(10, 100, 500);
        assert_eq!(volume_similarity(&a, &b).unwrap(), 1.0);
        let a = first_n(10, 150, 0);
        let b = first_n(10, 50, 0);
        assert_eq!(volume_similarity(&a, &b).unwrap(), 0.5);
        let e = BinaryMask::zeros(*a.shape());
        assert_eq!(volume_similarity(&a, &e).unwrap(), 0.0);
        assert_eq!(volume_similarity(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = block(6, [0; 3], [2; 3]);
        let b = block(7, [0; 3], [2; 3]);
        assert!(matches!(dice(&a, &b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            volume_similarity(&a, &b),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            hd95(&a, &b, [1.0; 3]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn hd95_identical_and_shifted() {
        let a = block(12, [2; 3], [8; 3]);
        assert_eq!(hd95(&a, &a, [1.0; 3]).unwrap(), 0.0);
        let b = block(12, [3, 2, 2], [9, 8, 8]);
        assert_eq!(hd95(&a, &b, [1.0; 3]).unwrap(), 1.0);
        assert_eq!(hd95(&b, &a, [1.0; 3]).unwrap(), 1.0);
    }

    #[test]
    fn hd95_empty_is_error() {
        let a = block(6, [1; 3], [3; 3]);
        let e = BinaryMask::zeros(*a.shape());
        assert!(matches!(hd95(&a, &e, [1.0; 3]), Err(Error::EmptyMask(_))));
        assert!(matches!(hd95(&e, &a, [1.0; 3]), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_sorted(&v, 50.0), Some(2.0));
        assert_eq!(percentile_sorted(&v, 95.0), Some(3.8));
        assert_eq!(percentile_sorted(&v, 100.0), Some(4.0));
        assert_eq!(percentile_sorted(&[7.0], 95.0), Some(7.0));
        assert_eq!(percentile_sorted(&[], 95.0), None);
    }
}
