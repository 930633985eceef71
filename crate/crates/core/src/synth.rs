//! Deterministic synthetic phantoms with MC-style probability samples.
//!
//! Each sample's foreground probability is `logistic(sd / s + noise)`, where
//! `sd` is the signed distance (mm, positive inside) to the predicted cavity
//! boundary and `noise` is spatially correlated Gaussian noise. Every random
//! field comes from a ChaCha stream keyed by `(seed, plane, sample)`, so the
//! output does not depend on scheduling or thread count.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{McSampleSet, Plane};
use crate::ingest::{self, CaseManifest, Semantic};
use crate::volgrid::{self, BinaryMask, Connectivity, GridShape, ScalarVolume};
use crate::VolumeF32;

/// Mean logit inside a far blob; slightly foreground-leaning.
pub const BLOB_BIAS: f64 = 1.0;
/// Per-sample logit spread inside a far blob, the source of disagreement.
pub const BLOB_SPREAD: f64 = 3.0;
/// Gap between the cavity extent and the blob center used by [`generate_batch`].
pub const BATCH_BLOB_DISTANCE_MM: f64 = 18.0;
/// Blob radii used by [`generate_batch`] span this range across the bad cases.
pub const BATCH_BLOB_RADIUS_MM: (f64, f64) = (8.0, 10.0);
/// Seed of the reference (20 good, 5 corrupted) batch.
pub const DEFAULT_BATCH_SEED: u64 = 2024;

/// Cavity primitive; coordinates in mm from the center of voxel (0, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityShape {
    Ellipsoid {
        center: [f64; 3],
        semi_axes: [f64; 3],
    },
    Cuboid {
        min: [f64; 3],
        max: [f64; 3],
    },
}

impl CavityShape {
    fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            CavityShape::Ellipsoid { center, semi_axes } => {
                (0..3)
                    .map(|a| ((p[a] - center[a]) / semi_axes[a]).powi(2))
                    .sum::<f64>()
                    <= 1.0
            }
            CavityShape::Cuboid { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
        }
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            CavityShape::Ellipsoid { center, semi_axes } => (
                [0, 1, 2].map(|a| center[a] - semi_axes[a]),
                [0, 1, 2].map(|a| center[a] + semi_axes[a]),
            ),
            CavityShape::Cuboid { min, max } => (*min, *max),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            CavityShape::Ellipsoid { center, semi_axes } => {
                center.iter().all(|c| c.is_finite())
                    && semi_axes.iter().all(|a| a.is_finite() && *a > 0.0)
            }
            CavityShape::Cuboid { min, max } => {
                (0..3).all(|a| min[a].is_finite() && max[a].is_finite() && min[a] <= max[a])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "degenerate cavity shape {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    None,
    /// Sphere of sample disagreement, its center `distance_mm` beyond the
    /// cavity's extent along the first axis direction where it fits.
    FarBlob {
        distance_mm: f64,
        radius_mm: f64,
    },
    /// Extra logit noise of this std, concentrated on the boundary.
    BoundaryFuzz {
        sigma: f64,
    },
    /// Samples predict the ground truth eroded this many times.
    Undersegmentation {
        erosion_iters: usize,
    },
    /// Samples predict the ground truth shifted along +x by this many voxels.
    RegistrationShift {
        voxels: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-sample logit noise std.
    pub sigma: f64,
    /// Gaussian smoothing std of the white noise, in mm. Zero keeps it white.
    pub correlation_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub seed: u64,
    pub grid: GridShape,
    pub cavity: Vec<CavityShape>,
    pub corruption: Corruption,
    pub noise: NoiseSpec,
    /// Logistic scale of the probability transition, in mm.
    pub logistic_scale_mm: f64,
    pub samples_per_plane: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            seed: 0,
            grid: GridShape::cube(64).expect("valid"),
            cavity: vec![CavityShape::Ellipsoid {
                center: [22.0, 32.0, 32.0],
                semi_axes: [9.0, 8.0, 7.0],
            }],
            corruption: Corruption::None,
            noise: NoiseSpec {
                sigma: 1.0,
                correlation_mm: 2.0,
            },
            logistic_scale_mm: 0.5,
            samples_per_plane: 20,
        }
    }
}

impl PhantomSpec {
    pub fn noise_free(mut self) -> Self {
        self.noise.sigma = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidSpec(m));
        if self.cavity.is_empty() {
            return invalid("cavity needs at least one shape".into());
        }
        let extent = [0, 1, 2].map(|a| (self.grid.dims()[a] - 1) as f64 * self.grid.spacing()[a]);
        for shape in &self.cavity {
            shape.validate()?;
            let (lo, hi) = shape.bounds();
            if (0..3).any(|a| lo[a] < 0.0 || hi[a] > extent[a]) {
                return invalid(format!(
                    "{shape:?} does not fit inside the grid extent {extent:?}"
                ));
            }
        }
        if !(self.noise.sigma.is_finite() && self.noise.sigma >= 0.0) {
            return invalid(format!(
                "noise sigma must be >= 0, got {}",
                self.noise.sigma
            ));
        }
        if !(self.noise.correlation_mm.is_finite() && self.noise.correlation_mm >= 0.0) {
            return invalid(format!(
                "correlation length must be >= 0, got {}",
                self.noise.correlation_mm
            ));
        }
        if !(self.logistic_scale_mm.is_finite() && self.logistic_scale_mm > 0.0) {
            return invalid(format!(
                "logistic scale must be > 0, got {}",
                self.logistic_scale_mm
            ));
        }
        if self.samples_per_plane == 0 {
            return invalid("samples_per_plane must be >= 1".into());
        }
        match self.corruption {
            Corruption::FarBlob {
                distance_mm,
                radius_mm,
            } => {
                if !(radius_mm > 0.0 && distance_mm > radius_mm) {
                    return invalid(format!(
                        "far blob needs 0 < radius < distance, got radius {radius_mm}, distance {distance_mm}"
                    ));
                }
            }
            Corruption::BoundaryFuzz { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                return invalid(format!("boundary fuzz sigma must be >= 0, got {sigma}"));
            }
            _ => {}
        }
        Ok(())
    }

    fn point_mm(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        let s = self.grid.spacing();
        [x as f64 * s[0], y as f64 * s[1], z as f64 * s[2]]
    }

    pub fn ground_truth(&self) -> BinaryMask {
        BinaryMask::from_fn(self.grid, |x, y, z| {
            let p = self.point_mm(x, y, z);
            self.cavity.iter().any(|c| c.contains(p))
        })
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub ground_truth: BinaryMask,
    pub samples: McSampleSet<f32>,
    pub spec: PhantomSpec,
}

/// Signed distance in mm to the boundary of `mask`, positive inside. The
/// boundary sits half a voxel from the outermost foreground centers.
fn signed_distance(mask: &BinaryMask) -> Result<Vec<f64>> {
    let shape = mask.shape();
    let far = shape
        .dims()
        .iter()
        .zip(shape.spacing())
        .map(|(&n, s)| n as f64 * s)
        .sum::<f64>();
    if mask.is_empty() {
        return Ok(vec![-far; shape.len()]);
    }
    let inverted = volgrid::invert(mask);
    if inverted.is_empty() {
        return Ok(vec![far; shape.len()]);
    }
    let half = 0.5
        * shape
            .spacing()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
    let to_fg: ScalarVolume<f64> = volgrid::edt(mask, shape.spacing())?;
    let to_bg: ScalarVolume<f64> = volgrid::edt(&inverted, shape.spacing())?;
    Ok(mask
        .data()
        .iter()
        .zip(to_fg.data().iter().zip(to_bg.data()))
        .map(|(&m, (&dfg, &dbg))| if m == 1 { dbg - half } else { half - dfg })
        .collect())
}

fn shift_x(mask: &BinaryMask, voxels: i64) -> BinaryMask {
    let nx = mask.shape().dims()[0] as i64;
    BinaryMask::from_fn(*mask.shape(), |x, y, z| {
        let src = x as i64 - voxels;
        (0..nx).contains(&src) && mask.get(src as usize, y, z)
    })
}

fn gaussian_kernel(sigma_vox: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_vox).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma_vox * sigma_vox)).exp())
        .collect();
    // unit L2 norm keeps white unit-variance noise at unit variance
    let norm = k.iter().map(|w| w * w).sum::<f64>().sqrt();
    k.iter_mut().for_each(|w| *w /= norm);
    k
}

/// Convolves every line along `axis` with `kernel`, replicating edge values.
fn smooth_axis(data: &[f64], shape: &GridShape, axis: usize, kernel: &[f64]) -> Vec<f64> {
    let [nx, ny, nz] = shape.dims();
    let n = shape.dims()[axis];
    let stride = [1, nx, nx * ny][axis];
    let radius = kernel.len() / 2;
    // line starts: every voxel whose coordinate along `axis` is zero
    let starts: Vec<usize> = match axis {
        0 => (0..ny * nz).map(|l| l * nx).collect(),
        1 => (0..nz)
            .flat_map(|z| (0..nx).map(move |x| x + nx * ny * z))
            .collect(),
        _ => (0..nx * ny).collect(),
    };
    let lines: Vec<Vec<f64>> = starts
        .par_iter()
        .map_init(
            || vec![0.0; n + 2 * radius],
            |buf, &start| {
                for (k, b) in buf.iter_mut().enumerate() {
                    let c = k.saturating_sub(radius).min(n - 1);
                    *b = data[start + c * stride];
                }
                (0..n)
                    .map(|c| {
                        kernel
                            .iter()
                            .zip(&buf[c..c + kernel.len()])
                            .map(|(w, v)| w * v)
                            .sum()
                    })
                    .collect()
            },
        )
        .collect();
    let mut out = vec![0.0; data.len()];
    for (&start, line) in starts.iter().zip(&lines) {
        for (c, v) in line.iter().enumerate() {
            out[start + c * stride] = *v;
        }
    }
    out
}

/// Unit-variance correlated Gaussian field for one `(plane, sample)` stream.
/// White noise is drawn on a grid padded by the kernel radius and cropped
/// after smoothing, so the variance is uniform up to the borders.
fn noise_field(spec: &PhantomSpec, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let dims = spec.grid.dims();
    let kernels: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            if spec.noise.correlation_mm > 0.0 && dims[a] > 1 {
                gaussian_kernel(spec.noise.correlation_mm / spec.grid.spacing()[a])
            } else {
                vec![1.0]
            }
        })
        .collect();
    let pad: [usize; 3] = [0, 1, 2].map(|a| kernels[a].len() / 2);
    let padded = GridShape::new([0, 1, 2].map(|a| dims[a] + 2 * pad[a]), spec.grid.spacing())
        .expect("valid");
    let mut field: Vec<f64> = (0..padded.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    for (axis, kernel) in kernels.iter().enumerate() {
        if kernel.len() > 1 {
            field = smooth_axis(&field, &padded, axis, kernel);
        }
    }
    if pad == [0; 3] {
        return field;
    }
    (0..spec.grid.len())
        .map(|i| {
            let [x, y, z] = spec.grid.coords(i);
            field[padded.index(x + pad[0], y + pad[1], z + pad[2])]
        })
        .collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Blob {
    center: [f64; 3],
    radius: f64,
}

fn place_blob(spec: &PhantomSpec, gt: &BinaryMask, distance: f64, radius: f64) -> Result<Blob> {
    let pts: Vec<[f64; 3]> = gt
        .foreground()
        .map(|i| {
            let [x, y, z] = spec.grid.coords(i);
            spec.point_mm(x, y, z)
        })
        .collect();
    let n = pts.len() as f64;
    let centroid = [0, 1, 2].map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / n);
    let extent = [0, 1, 2].map(|a| (spec.grid.dims()[a] - 1) as f64 * spec.grid.spacing()[a]);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let reach = pts
                .iter()
                .map(|p| sign * (p[axis] - centroid[axis]))
                .fold(f64::NEG_INFINITY, f64::max);
            let mut center = centroid;
            center[axis] += sign * (reach + distance);
            if (0..3).all(|a| center[a] - radius >= 0.0 && center[a] + radius <= extent[a]) {
                return Ok(Blob { center, radius });
            }
        }
    }
    Err(Error::InvalidSpec(format!(
        "no room for a far blob of radius {radius} mm at {distance} mm from the cavity"
    )))
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<SyntheticCase> {
    spec.validate()?;
    let ground_truth = spec.ground_truth();
    if ground_truth.is_empty() {
        return Err(Error::InvalidSpec("cavity covers no voxel centers".into()));
    }
    let predicted = match spec.corruption {
        Corruption::RegistrationShift { voxels } => shift_x(&ground_truth, voxels),
        Corruption::Undersegmentation { erosion_iters } if erosion_iters > 0 => {
            volgrid::erode(&ground_truth, Connectivity::Faces6, erosion_iters)
        }
        _ => ground_truth.clone(),
    };
    let sd = signed_distance(&predicted)?;
    let s = spec.logistic_scale_mm;
    let blob = match spec.corruption {
        Corruption::FarBlob {
            distance_mm,
            radius_mm,
        } => Some(place_blob(spec, &ground_truth, distance_mm, radius_mm)?),
        _ => None,
    };
    let fuzz = match spec.corruption {
        Corruption::BoundaryFuzz { sigma } => sigma,
        _ => 0.0,
    };
    let needs_noise = spec.noise.sigma > 0.0 || blob.is_some() || fuzz > 0.0;

    // per-voxel constants shared by all samples
    let blob_weight: Option<Vec<f64>> = blob.as_ref().map(|b| {
        (0..spec.grid.len())
            .into_par_iter()
            .map(|i| {
                let [x, y, z] = spec.grid.coords(i);
                let p = spec.point_mm(x, y, z);
                let r = (0..3)
                    .map(|a| (p[a] - b.center[a]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                logistic((b.radius - r) / s)
            })
            .collect()
    });
    let fuzz_gain: Vec<f64> = sd
        .iter()
        .map(|&d| spec.noise.sigma + fuzz * (-(d / (2.0 * s)).powi(2)).exp())
        .collect();

    let t = spec.samples_per_plane;
    let sample = |stream: u64| -> VolumeF32 {
        let noise = if needs_noise {
            noise_field(spec, stream)
        } else {
            Vec::new()
        };
        let data: Vec<f32> = (0..spec.grid.len())
            .into_par_iter()
            .map(|i| {
                let n = noise.get(i).copied().unwrap_or(0.0);
                let mut p = logistic(sd[i] / s + fuzz_gain[i] * n);
                if let Some(w) = &blob_weight {
                    p = (1.0 - w[i]) * p + w[i] * logistic(BLOB_BIAS + BLOB_SPREAD * n);
                }
                p.clamp(0.0, 1.0) as f32
            })
            .collect();
        ScalarVolume::new(spec.grid, data).expect("logistic output is finite")
    };
    let mut planes: Vec<Vec<VolumeF32>> = Plane::ALL
        .iter()
        .map(|&plane| {
            (0..t)
                .map(|k| sample((plane as usize * t + k) as u64))
                .collect()
        })
        .collect();
    let sagittal = planes.pop().expect("three planes");
    let coronal = planes.pop().expect("three planes");
    let axial = planes.pop().expect("three planes");
    Ok(SyntheticCase {
        ground_truth,
        samples: McSampleSet::new(axial, coronal, sagittal)?,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct BatchCase {
    pub case_id: String,
    pub corrupted: bool,
    pub case: SyntheticCase,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

/// The per-case specs of a batch, in case order, with their corruption flag.
pub fn batch_specs(
    base: &PhantomSpec,
    n_good: usize,
    n_bad: usize,
    seed: u64,
) -> Vec<(String, bool, PhantomSpec)> {
    let total = n_good + n_bad;
    // deterministic placement of the corrupted cases among all ids
    let mut order: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..total).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut bad_rank = vec![None; total];
    for (j, &slot) in order.iter().take(n_bad).enumerate() {
        bad_rank[slot] = Some(j);
    }
    (0..total)
        .map(|i| {
            let mut spec = base.clone();
            spec.seed = derive_seed(seed, i as u64 + 1);
            let mut jitter = ChaCha8Rng::seed_from_u64(spec.seed);
            jitter.set_stream(u64::MAX);
            match bad_rank[i] {
                Some(j) => {
                    if spec.corruption == Corruption::None {
                        let (lo, hi) = BATCH_BLOB_RADIUS_MM;
                        let frac = if n_bad > 1 {
                            j as f64 / (n_bad - 1) as f64
                        } else {
                            0.5
                        };
                        spec.corruption = Corruption::FarBlob {
                            distance_mm: BATCH_BLOB_DISTANCE_MM,
                            radius_mm: lo + (hi - lo) * frac,
                        };
                    }
                }
                None => {
                    spec.corruption = Corruption::None;
                    for shape in &mut spec.cavity {
                        if let CavityShape::Ellipsoid { center, semi_axes } = shape {
                            for a in 0..3 {
                                center[a] += jitter.random_range(-1.5..=1.5);
                                semi_axes[a] *= jitter.random_range(0.9..=1.1);
                            }
                        }
                    }
                }
            }
            (format!("case_{i:03}"), bad_rank[i].is_some(), spec)
        })
        .collect()
}

/// `n_good` clean and `n_bad` corrupted phantoms. Corrupted cases keep the
/// base cavity and, unless the base spec names a corruption, get a far blob
/// whose radius grows with the corrupted-case index. Clean cases jitter the
/// cavity slightly.
pub fn generate_batch(
    base: &PhantomSpec,
    n_good: usize,
    n_bad: usize,
    seed: u64,
) -> Result<Vec<BatchCase>> {
    batch_specs(base, n_good, n_bad, seed)
        .into_par_iter()
        .map(|(case_id, corrupted, spec)| {
            Ok(BatchCase {
                case_id,
                corrupted,
                case: generate_phantom(&spec)?,
            })
        })
        .collect()
}

/// Writes the case's volumes under `dir` and returns a manifest with paths
/// relative to `manifest_dir`.
pub fn write_case(
    case: &SyntheticCase,
    case_id: &str,
    dir: &Path,
    manifest_dir: &Path,
) -> Result<CaseManifest> {
    let rel = |p: &Path| {
        p.strip_prefix(manifest_dir)
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| p.to_path_buf())
    };
    let mut lists: [Vec<std::path::PathBuf>; 3] = Default::default();
    for plane in Plane::ALL {
        for (t, vol) in case.samples.samples(plane).iter().enumerate() {
            let path = dir.join(format!("{}_{t:02}.raw", plane.name()));
            ingest::write_scalar(&path, vol, Semantic::Probability)?;
            lists[plane as usize].push(rel(&path));
        }
    }
    let gt_path = dir.join("ground_truth.raw");
    ingest::write_mask(&gt_path, &case.ground_truth)?;
    let [axial, coronal, sagittal] = lists;
    Ok(CaseManifest {
        case_id: case_id.to_string(),
        axial,
        coronal,
        sagittal,
        ground_truth: Some(rel(&gt_path)),
        intensity: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PhantomSpec {
        PhantomSpec {
            grid: GridShape::cube(24).unwrap(),
            cavity: vec![CavityShape::Ellipsoid {
                center: [11.0, 12.0, 12.0],
                semi_axes: [5.0, 4.0, 4.5],
            }],
            samples_per_plane: 3,
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn noise_free_samples_are_identical_and_recover_ground_truth() {
        let case = generate_phantom(&small().noise_free()).unwrap();
        let a = case.samples.samples(Plane::Axial);
        for plane in Plane::ALL {
            for v in case.samples.samples(plane) {
                assert_eq!(v, &a[0]);
            }
        }
        let seg = crate::fusion::classify(&case.samples.fuse().unwrap());
        assert_eq!(seg, case.ground_truth);
    }

    #[test]
    fn same_spec_same_bits() {
        let spec = PhantomSpec {
            seed: 99,
            ..small()
        };
        let a = generate_phantom(&spec).unwrap();
        let b = generate_phantom(&spec).unwrap();
        for plane in Plane::ALL {
            for (x, y) in a
                .samples
                .samples(plane)
                .iter()
                .zip(b.samples.samples(plane))
            {
                let bits = |v: &VolumeF32| v.data().iter().map(|f| f.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(x), bits(y));
            }
        }
        let c = generate_phantom(&PhantomSpec {
            seed: 100,
            ..small()
        })
        .unwrap();
        assert_ne!(
            a.samples.samples(Plane::Axial)[0],
            c.samples.samples(Plane::Axial)[0]
        );
    }

    #[test]
    fn invalid_specs() {
        let mut s = small();
        s.cavity = vec![CavityShape::Ellipsoid {
            center: [2.0, 12.0, 12.0],
            semi_axes: [5.0, 4.0, 4.0],
        }];
        assert!(matches!(generate_phantom(&s), Err(Error::InvalidSpec(_))));
        let mut s = small();
        s.noise.sigma = -1.0;
        assert!(matches!(generate_phantom(&s), Err(Error::InvalidSpec(_))));
        let mut s = small();
        s.corruption = Corruption::FarBlob {
            distance_mm: 40.0,
            radius_mm: 5.0,
        };
        assert!(matches!(generate_phantom(&s), Err(Error::InvalidSpec(_))));
        let mut s = small();
        s.cavity.clear();
        assert!(matches!(generate_phantom(&s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn noise_field_has_unit_variance() {
        let spec = PhantomSpec {
            grid: GridShape::cube(40).unwrap(),
            ..PhantomSpec::default()
        };
        let f = noise_field(&spec, 3);
        let n = f.len() as f64;
        let mean = f.iter().sum::<f64>() / n;
        let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.2, "var {var}");
    }

    #[test]
    fn signed_distance_sign_convention() {
        let s = GridShape::cube(9).unwrap();
        let m = BinaryMask::from_fn(s, |x, y, z| {
            (3..6).contains(&x) && (3..6).contains(&y) && (3..6).contains(&z)
        });
        let sd = signed_distance(&m).unwrap();
        assert_eq!(sd[s.index(4, 4, 4)], 1.5);
        assert_eq!(sd[s.index(3, 4, 4)], 0.5);
        assert_eq!(sd[s.index(2, 4, 4)], -0.5);
    }

    #[test]
    fn empty_batch() {
        assert!(generate_batch(&small(), 0, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn batch_labels_and_ids() {
        let specs = batch_specs(&PhantomSpec::default(), 20, 5, 7);
        assert_eq!(specs.len(), 25);
        assert_eq!(specs.iter().filter(|s| s.1).count(), 5);
        let seeds: std::collections::BTreeSet<_> = specs.iter().map(|s| s.2.seed).collect();
        assert_eq!(seeds.len(), 25);
        for (_, bad, spec) in &specs {
            assert_eq!(*bad, spec.corruption != Corruption::None);
        }
        assert_eq!(specs, batch_specs(&PhantomSpec::default(), 20, 5, 7));
    }
}
