use rayon::prelude::*;

use super::{BinaryMask, Connectivity, GridShape};

/// Calls `f` with the index of every in-grid neighbor of `(x, y, z)` until it returns `true`.
#[inline]
fn any_neighbor(
    shape: &GridShape,
    offsets: &[[isize; 3]],
    [x, y, z]: [usize; 3],
    mut f: impl FnMut(usize) -> bool,
) -> bool {
    let [nx, ny, nz] = shape.dims();
    offsets.iter().any(|&[dx, dy, dz]| {
        let (xx, yy, zz) = (x as isize + dx, y as isize + dy, z as isize + dz);
        if xx < 0 || yy < 0 || zz < 0 || xx >= nx as isize || yy >= ny as isize || zz >= nz as isize
        {
            return false;
        }
        f(shape.index(xx as usize, yy as usize, zz as usize))
    })
}

fn map_slices(shape: GridShape, f: impl Fn([usize; 3]) -> u8 + Sync) -> BinaryMask {
    let [nx, ny, _] = shape.dims();
    let mut out = vec![0u8; shape.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slice)| {
            for y in 0..ny {
                for x in 0..nx {
                    slice[x + nx * y] = f([x, y, z]);
                }
            }
        });
    BinaryMask::from_raw(shape, out)
}

/// Inner boundary: foreground voxels with at least one in-grid background
/// neighbor under `conn`. Out-of-grid neighbors do not count as background.
pub fn outline(mask: &BinaryMask, conn: Connectivity) -> BinaryMask {
    let shape = *mask.shape();
    let offsets = conn.offsets();
    let data = mask.data();
    map_slices(shape, |p| {
        let i = shape.index(p[0], p[1], p[2]);
        (data[i] == 1 && any_neighbor(&shape, &offsets, p, |j| data[j] == 0)) as u8
    })
}

/// Grows the foreground by `iterations` steps of the structuring element
/// given by `conn`, clipped at the grid bounds.
///
/// # Panics
/// If `iterations` is zero.
pub fn dilate(mask: &BinaryMask, conn: Connectivity, iterations: usize) -> BinaryMask {
    assert!(iterations >= 1, "dilation needs at least one iteration");
    let shape = *mask.shape();
    let offsets = conn.offsets();
    let mut current = mask.clone();
    for _ in 0..iterations {
        let data = current.data();
        current = map_slices(shape, |p| {
            let i = shape.index(p[0], p[1], p[2]);
            (data[i] == 1 || any_neighbor(&shape, &offsets, p, |j| data[j] == 1)) as u8
        });
    }
    current
}

/// Shrinks the foreground: a voxel survives one step iff all of its in-grid
/// neighbors are foreground. Dual of [`dilate`] under the same border rule.
///
/// # Panics
/// If `iterations` is zero.
pub fn erode(mask: &BinaryMask, conn: Connectivity, iterations: usize) -> BinaryMask {
    assert!(iterations >= 1, "erosion needs at least one iteration");
    let shape = *mask.shape();
    let offsets = conn.offsets();
    let mut current = mask.clone();
    for _ in 0..iterations {
        let data = current.data();
        current = map_slices(shape, |p| {
            let i = shape.index(p[0], p[1], p[2]);
            (data[i] == 1 && !any_neighbor(&shape, &offsets, p, |j| data[j] == 0)) as u8
        });
    }
    current
}
