//! Exact Euclidean distance transform via separable lower envelopes of
//! parabolas (one 1-D pass per axis).

use rayon::prelude::*;

use super::{BinaryMask, GridShape, ScalarVolume};
use crate::error::{Error, Result};
use crate::scalar::Real;

struct Envelope<T> {
    sites: Vec<usize>,
    bounds: Vec<T>,
    line: Vec<T>,
    out: Vec<T>,
}

impl<T: Real> Envelope<T> {
    fn new(n: usize) -> Self {
        Envelope {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n),
            line: vec![T::zero(); n],
            out: vec![T::zero(); n],
        }
    }

    /// `out[q] = min_p (step * (q - p))^2 + line[p]`, skipping infinite sites.
    fn run(&mut self, step: T) {
        let f = &self.line;
        let n = f.len();
        let two = T::of(2.0);
        self.sites.clear();
        self.bounds.clear();
        for q in 0..n {
            if f[q].is_infinite() {
                continue;
            }
            let pq = step * T::of(q as f64);
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(T::neg_infinity());
                    break;
                };
                let pp = step * T::of(p as f64);
                let cross = (f[q] - f[p]) / (two * (pq - pp)) + (pq + pp) / two;
                if cross <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(cross);
                    break;
                }
            }
        }
        if self.sites.is_empty() {
            self.out.fill(T::infinity());
            return;
        }
        let mut j = 0;
        for q in 0..n {
            let x = step * T::of(q as f64);
            while j + 1 < self.sites.len() && self.bounds[j + 1] < x {
                j += 1;
            }
            let p = self.sites[j];
            let d = x - step * T::of(p as f64);
            self.out[q] = d * d + f[p];
        }
    }
}

/// Distance in mm from every voxel center to the nearest foreground voxel
/// center of `target`, using per-axis `spacing`.
pub fn edt<T: Real>(target: &BinaryMask, spacing: [f64; 3]) -> Result<ScalarVolume<T>> {
    let dims = target.shape().dims();
    let shape = GridShape::new(dims, spacing)?;
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let [nx, ny, nz] = dims;
    let [sx, sy, sz] = spacing.map(T::of);
    let mask = target.data();
    let mut sq = vec![T::zero(); shape.len()];

    // x: contiguous rows
    sq.par_chunks_mut(nx).enumerate().for_each_init(
        || Envelope::new(nx),
        |env, (row, out)| {
            let base = row * nx;
            for x in 0..nx {
                env.line[x] = if mask[base + x] == 1 {
                    T::zero()
                } else {
                    T::infinity()
                };
            }
            env.run(sx);
            out.copy_from_slice(&env.out);
        },
    );

    // y: stride nx inside each z-slice
    if ny > 1 {
        sq.par_chunks_mut(nx * ny).for_each_init(
            || Envelope::new(ny),
            |env, slice| {
                for x in 0..nx {
                    for y in 0..ny {
                        env.line[y] = slice[x + nx * y];
                    }
                    env.run(sy);
                    for y in 0..ny {
                        slice[x + nx * y] = env.out[y];
                    }
                }
            },
        );
    }

    // z: stride nx*ny; gather per y, then scatter
    if nz > 1 {
        let columns: Vec<Vec<T>> = (0..ny)
            .into_par_iter()
            .map_init(
                || Envelope::new(nz),
                |env, y| {
                    let mut block = vec![T::zero(); nx * nz];
                    for x in 0..nx {
                        for z in 0..nz {
                            env.line[z] = sq[shape.index(x, y, z)];
                        }
                        env.run(sz);
                        block[x * nz..(x + 1) * nz].copy_from_slice(&env.out);
                    }
                    block
                },
            )
            .collect();
        for (y, block) in columns.iter().enumerate() {
            for x in 0..nx {
                for z in 0..nz {
                    sq[shape.index(x, y, z)] = block[x * nz + z];
                }
            }
        }
    }

    sq.par_iter_mut().for_each(|v| *v = v.sqrt());
    Ok(ScalarVolume::from_raw(shape, sq))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn brute(target: &BinaryMask, spacing: [f64; 3]) -> Vec<f64> {
        let s = target.shape();
        let fg: Vec<[usize; 3]> = target.foreground().map(|i| s.coords(i)).collect();
        (0..s.len())
            .map(|i| {
                let p = s.coords(i);
                fg.iter()
                    .map(|q| {
                        (0..3)
                            .map(|a| {
                                let d = (p[a] as f64 - q[a] as f64) * spacing[a];
                                d * d
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    }

    #[test]
    fn three_four_five() {
        let s = GridShape::cube(6).unwrap();
        let mut m = BinaryMask::zeros(s);
        m.set(0, 0, 0, true);
        let d = edt::<f64>(&m, [1.0; 3]).unwrap();
        assert_eq!(d.get(0, 0, 0), 0.0);
        assert_eq!(d.get(3, 4, 0), 5.0);
    }

    #[test]
    fn empty_target_is_an_error() {
        let s = GridShape::cube(3).unwrap();
        assert!(matches!(
            edt::<f64>(&BinaryMask::zeros(s), [1.0; 3]),
            Err(Error::EmptyTarget)
        ));
    }

    #[test]
    fn degenerate_axes() {
        let s = GridShape::new([7, 1, 1], [1.0; 3]).unwrap();
        let mut m = BinaryMask::zeros(s);
        m.set(2, 0, 0, true);
        let d = edt::<f64>(&m, [0.5, 1.0, 1.0]).unwrap();
        assert_eq!(d.data(), &[1.0, 0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn anisotropic_matches_brute_force() {
        let s = GridShape::new([9, 7, 5], [1.0; 3]).unwrap();
        let m = BinaryMask::from_fn(s, |x, y, z| (x * 31 + y * 17 + z * 7) % 23 == 0);
        let spacing = [0.7, 1.3, 2.9];
        let fast = edt::<f64>(&m, spacing).unwrap();
        for (a, b) in fast.data().iter().zip(brute(&m, spacing)) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn single_precision_agrees() {
        let s = GridShape::new([12, 10, 8], [1.0; 3]).unwrap();
        let m = BinaryMask::from_fn(s, |x, y, z| (x + y * 5 + z * 11) % 37 == 0);
        let d32 = edt::<f32>(&m, [1.0, 1.5, 2.0]).unwrap();
        let d64 = edt::<f64>(&m, [1.0, 1.5, 2.0]).unwrap();
        for (a, b) in d32.data().iter().zip(d64.data()) {
            assert!((*a as f64 - b).abs() < 1e-4);
        }
    }
}
