//! 30-bit Morton codes (10 bits per axis) and the sorted leaf order.
//!
//! Bits are interleaved x-major: within each 3-bit group x sits in the most
//! significant position, then y, then z.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};

pub const BITS_PER_AXIS: u32 = 10;
pub const GRID_SIZE: u32 = 1 << BITS_PER_AXIS;
/// Number of significant bits in a code.
pub const CODE_BITS: u32 = 3 * BITS_PER_AXIS;

/// Sort key for one object: its Morton code plus the original ordinal.
///
/// Keys compare lexicographically by `(code, index)`. With unique indices
/// this is a strict total order even when codes collide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MortonKey {
    pub code: u32,
    pub index: u32,
}

impl MortonKey {
    /// `code ∥ index` as one 64-bit word; ordering matches the `Ord` impl.
    #[inline]
    pub fn packed(&self) -> u64 {
        ((self.code as u64) << 32) | self.index as u64
    }
}

/// Spreads the low 10 bits of `v` so bit `i` lands on bit `3i`.
pub fn expand_bits_10(v: u32) -> Result<u32> {
    if v >= GRID_SIZE {
        return Err(Error::GridOutOfRange(v));
    }
    Ok(spread(v))
}

#[inline]
fn spread(v: u32) -> u32 {
    let mut x = v & 0x3ff;
    x = (x | (x << 16)) & 0x030000ff;
    x = (x | (x << 8)) & 0x0300f00f;
    x = (x | (x << 4)) & 0x030c30c3;
    x = (x | (x << 2)) & 0x09249249;
    x
}

#[inline]
fn compact(v: u32) -> u32 {
    let mut x = v & 0x09249249;
    x = (x | (x >> 2)) & 0x030c30c3;
    x = (x | (x >> 4)) & 0x0300f00f;
    x = (x | (x >> 8)) & 0x030000ff;
    x = (x | (x >> 16)) & 0x000003ff;
    x
}

/// Interleaves three 10-bit grid indices.
pub fn encode_cell(cell: [u32; 3]) -> Result<u32> {
    Ok((expand_bits_10(cell[0])? << 2) | (expand_bits_10(cell[1])? << 1) | expand_bits_10(cell[2])?)
}

/// Inverse of [`encode_cell`] for any code below `2^30`.
pub fn decode_cell(code: u32) -> [u32; 3] {
    [compact(code >> 2), compact(code >> 1), compact(code)]
}

/// Grid cell of `c` after normalizing by `scene`. Out-of-scene coordinates
/// clamp to the boundary cells and zero-extent axes map to cell 0.
pub fn grid_cell(c: &Point, scene: &Aabb) -> [u32; 3] {
    let (p, lo, hi) = (c.coords(), scene.min().coords(), scene.max().coords());
    let mut cell = [0u32; 3];
    for d in 0..3 {
        let extent = hi[d] - lo[d];
        let t = if extent > 0.0 {
            ((p[d] - lo[d]) / extent).clamp(0.0, 1.0)
        } else {
            0.0
        };
        cell[d] = ((t * GRID_SIZE as f32) as u32).min(GRID_SIZE - 1);
    }
    cell
}

#[inline]
pub fn morton_code(c: &Point, scene: &Aabb) -> u32 {
    let [x, y, z] = grid_cell(c, scene);
    (spread(x) << 2) | (spread(y) << 1) | spread(z)
}

/// Keys for the centroids of `boxes`, in input order.
pub fn assign_keys(boxes: &[Aabb], scene: &Aabb) -> Vec<MortonKey> {
    boxes
        .par_iter()
        .enumerate()
        .map(|(i, b)| MortonKey {
            code: morton_code(&b.centroid(), scene),
            index: i as u32,
        })
        .collect()
}

/// Permutation of positions in `keys` that orders them by `(code, index)`.
///
/// Keys are unique so an unstable parallel sort is still deterministic.
pub fn sort_by_key(keys: &[MortonKey]) -> Vec<usize> {
    let mut tagged: Vec<(u64, u32)> = keys
        .par_iter()
        .enumerate()
        .map(|(pos, k)| (k.packed(), pos as u32))
        .collect();
    tagged.par_sort_unstable();
    tagged.into_par_iter().map(|(_, pos)| pos as usize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f32, y: f32, z: f32) -> Point {
        Point::new(x, y, z).unwrap()
    }

    fn unit() -> Aabb {
        Aabb::new(pt(0.0, 0.0, 0.0), pt(1.0, 1.0, 1.0)).unwrap()
    }

    // Bit-by-bit placement, independent of the magic-mask implementation.
    fn spread_reference(v: u32) -> u32 {
        (0..10).map(|i| ((v >> i) & 1) << (3 * i)).sum()
    }

    #[test]
    fn expand_bits_examples() {
        assert_eq!(expand_bits_10(0).unwrap(), 0);
        assert_eq!(expand_bits_10(0b11).unwrap(), 9);
        assert_eq!(expand_bits_10(0b101).unwrap(), 65);
        assert_eq!(expand_bits_10(1023).unwrap(), 0x09249249);
        assert_eq!(expand_bits_10(1024), Err(Error::GridOutOfRange(1024)));
    }

    #[test]
    fn expand_bits_matches_reference() {
        for v in 0..GRID_SIZE {
            assert_eq!(expand_bits_10(v).unwrap(), spread_reference(v));
        }
    }

    #[test]
    fn morton_code_examples() {
        let scene = Aabb::new(pt(-3.0, 1.0, 2.0), pt(5.0, 9.0, 2.5)).unwrap();
        assert_eq!(morton_code(&scene.min(), &scene), 0);
        assert_eq!(morton_code(&scene.max(), &scene), (1 << 30) - 1);
        assert_eq!(morton_code(&pt(1.5 / 1024.0, 0.0, 0.0), &unit()), 4);
        // y and z take the middle and low bits of each group
        assert_eq!(morton_code(&pt(0.0, 1.5 / 1024.0, 0.0), &unit()), 2);
        assert_eq!(morton_code(&pt(0.0, 0.0, 1.5 / 1024.0), &unit()), 1);
    }

    #[test]
    fn morton_code_clamps_and_handles_flat_axes() {
        assert_eq!(morton_code(&pt(-5.0, -5.0, -5.0), &unit()), 0);
        assert_eq!(morton_code(&pt(7.0, 7.0, 7.0), &unit()), (1 << 30) - 1);
        let flat = Aabb::new(pt(0.0, 0.0, 3.0), pt(1.0, 1.0, 3.0)).unwrap();
        let [_, _, z] = grid_cell(&pt(0.5, 0.5, 3.0), &flat);
        assert_eq!(z, 0);
    }

    #[test]
    fn sort_examples() {
        let keys: Vec<MortonKey> = [5, 3, 3, 1]
            .iter()
            .enumerate()
            .map(|(i, &code)| MortonKey { code, index: i as u32 })
            .collect();
        assert_eq!(sort_by_key(&keys), vec![3, 1, 2, 0]);

        let sorted: Vec<MortonKey> = (0..10).map(|i| MortonKey { code: i * 7, index: i }).collect();
        assert_eq!(sort_by_key(&sorted), (0..10).collect::<Vec<_>>());

        let same: Vec<MortonKey> = (0..10).map(|i| MortonKey { code: 42, index: i }).collect();
        assert_eq!(sort_by_key(&same), (0..10).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn cell_round_trip(x in 0u32..1024, y in 0u32..1024, z in 0u32..1024) {
            let code = encode_cell([x, y, z]).unwrap();
            prop_assert!(code < 1 << 30);
            prop_assert_eq!(decode_cell(code), [x, y, z]);
        }

        #[test]
        fn grid_index_is_monotone_per_axis(
            c in prop::array::uniform3(-0.5f32..1.5),
            step in 0.0f32..1.0,
            axis in 0usize..3,
        ) {
            let p = Point::try_from(c).unwrap();
            let mut moved = c;
            moved[axis] += step;
            let q = Point::try_from(moved).unwrap();
            prop_assert!(grid_cell(&p, &unit())[axis] <= grid_cell(&q, &unit())[axis]);
        }

        #[test]
        fn same_cell_same_code(cell in prop::array::uniform3(0u32..1024), a in prop::array::uniform3(0.05f32..0.95), b in prop::array::uniform3(0.05f32..0.95)) {
            let at = |f: [f32; 3]| {
                let c: Vec<f32> = (0..3).map(|d| (cell[d] as f32 + f[d]) / 1024.0).collect();
                pt(c[0], c[1], c[2])
            };
            prop_assert_eq!(morton_code(&at(a), &unit()), morton_code(&at(b), &unit()));
        }

        #[test]
        fn sorted_order_is_total(codes in prop::collection::vec(0u32..64, 1..200)) {
            let keys: Vec<MortonKey> = codes
                .iter()
                .enumerate()
                .map(|(i, &code)| MortonKey { code, index: i as u32 })
                .collect();
            let perm = sort_by_key(&keys);
            let mut seen = vec![false; keys.len()];
            for &p in &perm {
                prop_assert!(!seen[p]);
                seen[p] = true;
            }
            for w in perm.windows(2) {
                prop_assert!(keys[w[0]] < keys[w[1]]);
            }
        }
    }
}
