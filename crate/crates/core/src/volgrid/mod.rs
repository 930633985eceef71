//! 3-D grid types and the geometric primitives built on them.
//!
//! All volumes are stored x-fastest: the voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`.

mod edt;
mod morphology;

pub use edt::edt;
pub use morphology::{dilate, erode, outline};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    nx: usize,
    ny: usize,
    nz: usize,
    spacing: [f64; 3],
}

impl GridShape {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "dimensions must be positive, got {dims:?}"
            )));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidShape(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .filter(|&n| n <= isize::MAX as usize / 8)
            .ok_or_else(|| Error::InvalidShape(format!("voxel count overflows for {dims:?}")))?;
        Ok(GridShape {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
            spacing,
        })
    }

    /// Cubic grid with 1 mm isotropic spacing.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new([n, n, n], [1.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.nx;
        let yz = index / self.nx;
        [x, yz % self.ny, yz / self.ny]
    }

    /// Same voxel lattice, ignoring spacing.
    pub fn same_dims(&self, other: &GridShape) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same(&self, other: &GridShape, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {:?} @ {:?} vs {:?} @ {:?}",
                self.dims(),
                self.spacing,
                other.dims(),
                other.spacing
            )));
        }
        Ok(())
    }
}

/// Dense grid of finite real values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume<T> {
    shape: GridShape,
    data: Vec<T>,
}

impl<T: Real> ScalarVolume<T> {
    pub fn new(shape: GridShape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match {:?}",
                data.len(),
                shape.dims()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(ScalarVolume { shape, data })
    }

    pub fn filled(shape: GridShape, value: T) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        ScalarVolume {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: GridShape, f: impl Fn(usize, usize, usize) -> T + Sync) -> Result<Self> {
        let data = (0..shape.len())
            .into_par_iter()
            .map(|i| {
                let [x, y, z] = shape.coords(i);
                f(x, y, z)
            })
            .collect();
        Self::new(shape, data)
    }

    /// Caller guarantees finiteness.
    pub(crate) fn from_raw(shape: GridShape, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        ScalarVolume { shape, data }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.shape.index(x, y, z)]
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U + Sync) -> Result<ScalarVolume<U>> {
        ScalarVolume::new(self.shape, self.data.par_iter().map(|&v| f(v)).collect())
    }

    pub fn cast<U: Real>(&self) -> ScalarVolume<U> {
        let data = self
            .data
            .par_iter()
            .map(|&v| U::of(v.to_f64_lossless()))
            .collect();
        ScalarVolume::from_raw(self.shape, data)
    }

    pub fn min_max(&self) -> (T, T) {
        self.data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Faces6,
    Edges18,
    Full26,
}

impl Connectivity {
    /// Neighbor offsets, excluding the origin.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let nonzero = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                    let keep = match self {
                        Connectivity::Faces6 => nonzero == 1,
                        Connectivity::Edges18 => (1..=2).contains(&nonzero),
                        Connectivity::Full26 => nonzero >= 1,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            Connectivity::Faces6 => "faces6",
            Connectivity::Edges18 => "edges18",
            Connectivity::Full26 => "full26",
        }
    }
}

impl std::str::FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "faces6" | "6" => Ok(Connectivity::Faces6),
            "edges18" | "18" => Ok(Connectivity::Edges18),
            "full26" | "26" => Ok(Connectivity::Full26),
            other => Err(Error::InvalidConfig(format!(
                "unknown connectivity '{other}'"
            ))),
        }
    }
}

/// Dense grid of {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    shape: GridShape,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(shape: GridShape, data: Vec<u8>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match {:?}",
                data.len(),
                shape.dims()
            )));
        }
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(Error::NotBinary {
                index,
                value: data[index],
            });
        }
        Ok(BinaryMask { shape, data })
    }

    pub fn zeros(shape: GridShape) -> Self {
        BinaryMask {
            shape,
            data: vec![0; shape.len()],
        }
    }

    pub fn ones(shape: GridShape) -> Self {
        BinaryMask {
            shape,
            data: vec![1; shape.len()],
        }
    }

    pub fn from_fn(shape: GridShape, f: impl Fn(usize, usize, usize) -> bool + Sync) -> Self {
        let data = (0..shape.len())
            .into_par_iter()
            .map(|i| {
                let [x, y, z] = shape.coords(i);
                f(x, y, z) as u8
            })
            .collect();
        BinaryMask { shape, data }
    }

    pub(crate) fn from_raw(shape: GridShape, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        BinaryMask { shape, data }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.shape.index(x, y, z)] == 1
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, on: bool) {
        let i = self.shape.index(x, y, z);
        self.data[i] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.contains(&1)
    }

    /// Indices of foreground voxels in ascending order.
    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v == 1).then_some(i))
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.shape.check_same(&other.shape, "and")?;
        let data = self
            .data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(a, b)| a & b)
            .collect();
        Ok(BinaryMask::from_raw(self.shape, data))
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.shape.check_same(&other.shape, "or")?;
        let data = self
            .data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(a, b)| a | b)
            .collect();
        Ok(BinaryMask::from_raw(self.shape, data))
    }

    /// True if every foreground voxel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.shape.same_dims(&other.shape)
            && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }
}

/// Elementwise complement.
pub fn invert(mask: &BinaryMask) -> BinaryMask {
    let data = mask.data.par_iter().map(|&v| 1 - v).collect();
    BinaryMask::from_raw(mask.shape, data)
}

/// Voxels whose value strictly exceeds `tau`.
pub fn threshold<T: Real>(vol: &ScalarVolume<T>, tau: T) -> BinaryMask {
    let data = vol.data.par_iter().map(|&v| (v > tau) as u8).collect();
    BinaryMask::from_raw(vol.shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rejects_zero_dims_and_bad_spacing() {
        assert!(GridShape::new([0, 2, 2], [1.0; 3]).is_err());
        assert!(GridShape::new([2, 2, 2], [1.0, 0.0, 1.0]).is_err());
        assert!(GridShape::new([2, 2, 2], [1.0, f64::NAN, 1.0]).is_err());
        assert!(GridShape::new([usize::MAX, 2, 2], [1.0; 3]).is_err());
    }

    #[test]
    fn index_is_x_fastest() {
        let s = GridShape::new([3, 4, 5], [1.0; 3]).unwrap();
        assert_eq!(s.index(1, 0, 0), 1);
        assert_eq!(s.index(0, 1, 0), 3);
        assert_eq!(s.index(0, 0, 1), 12);
        for i in 0..s.len() {
            let [x, y, z] = s.coords(i);
            assert_eq!(s.index(x, y, z), i);
        }
    }

    #[test]
    fn volume_rejects_non_finite() {
        let s = GridShape::cube(2).unwrap();
        let mut data = vec![0.0f64; 8];
        data[5] = f64::INFINITY;
        assert!(matches!(
            ScalarVolume::new(s, data),
            Err(Error::NonFinite { index: 5 })
        ));
    }

    #[test]
    fn mask_rejects_non_binary() {
        let s = GridShape::cube(2).unwrap();
        let mut data = vec![0u8; 8];
        data[3] = 2;
        assert!(matches!(
            BinaryMask::new(s, data),
            Err(Error::NotBinary { index: 3, .. })
        ));
    }

    #[test]
    fn connectivity_sizes() {
        assert_eq!(Connectivity::Faces6.offsets().len(), 6);
        assert_eq!(Connectivity::Edges18.offsets().len(), 18);
        assert_eq!(Connectivity::Full26.offsets().len(), 26);
    }

    #[test]
    fn invert_all_zero_is_all_one() {
        let s = GridShape::cube(4).unwrap();
        assert_eq!(invert(&BinaryMask::zeros(s)), BinaryMask::ones(s));
    }

    #[test]
    fn invert_mixed_matches_elementwise() {
        let s = GridShape::new([5, 3, 2], [1.0; 3]).unwrap();
        let m = BinaryMask::from_fn(s, |x, y, z| (x * 7 + y * 3 + z) % 3 == 0);
        let inv = invert(&m);
        for i in 0..s.len() {
            assert_eq!(inv.data()[i], 1 - m.data()[i]);
        }
        assert_eq!(invert(&inv), m);
    }

    #[test]
    fn threshold_is_strict() {
        let s = GridShape::cube(3).unwrap();
        assert!(threshold(&ScalarVolume::filled(s, 0.5f64), 0.5).is_empty());
        assert_eq!(
            threshold(&ScalarVolume::filled(s, 0.6f64), 0.5),
            BinaryMask::ones(s)
        );
    }

    #[test]
    fn threshold_mixed_matches_elementwise() {
        let s = GridShape::new([4, 4, 4], [1.0; 3]).unwrap();
        let v = ScalarVolume::from_fn(s, |x, y, z| ((x * 13 + y * 7 + z * 3) % 10) as f32 / 10.0)
            .unwrap();
        let m = threshold(&v, 0.5);
        for (i, &val) in v.data().iter().enumerate() {
            assert_eq!(m.data()[i] == 1, val > 0.5);
        }
        // the non-strict rule disagrees only where the value equals tau
        for (i, &val) in v.data().iter().enumerate() {
            let non_strict = val >= 0.5;
            assert_eq!((m.data()[i] == 1) != non_strict, val == 0.5);
        }
    }
}
