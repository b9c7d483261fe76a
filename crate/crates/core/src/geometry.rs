//! Points, axis-aligned boxes and the handful of reductions the hierarchy needs.
//!
//! Coordinates are `f32`. Distances are kept squared internally; square roots
//! only appear where a distance is handed back to a caller.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A finite point in 3-D space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point([f32; 3]);

impl Point {
    /// Checked constructor; rejects NaN and infinities.
    pub fn new(x: f32, y: f32, z: f32) -> Result<Self> {
        if x.is_finite() && y.is_finite() && z.is_finite() {
            Ok(Point([x, y, z]))
        } else {
            Err(Error::NonFinite(x, y, z))
        }
    }

    pub(crate) const fn new_unchecked(x: f32, y: f32, z: f32) -> Self {
        Point([x, y, z])
    }

    pub const ORIGIN: Point = Point([0.0; 3]);

    pub fn x(&self) -> f32 {
        self.0[0]
    }

    pub fn y(&self) -> f32 {
        self.0[1]
    }

    pub fn z(&self) -> f32 {
        self.0[2]
    }

    pub fn coords(&self) -> [f32; 3] {
        self.0
    }

    #[inline]
    pub fn distance_sq(&self, other: &Point) -> f32 {
        let dx = self.0[0] - other.0[0];
        let dy = self.0[1] - other.0[1];
        let dz = self.0[2] - other.0[2];
        dx * dx + dy * dy + dz * dz
    }

    pub fn norm(&self) -> f32 {
        self.distance_sq(&Point::ORIGIN).sqrt()
    }
}

impl TryFrom<[f32; 3]> for Point {
    type Error = Error;

    fn try_from(c: [f32; 3]) -> Result<Self> {
        Point::new(c[0], c[1], c[2])
    }
}

/// Axis-aligned bounding box stored as its two extreme corners.
///
/// Zero-extent axes are allowed, so a single point is a valid box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    min: Point,
    max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        for axis in 0..3 {
            if min.0[axis] > max.0[axis] {
                return Err(Error::InvertedBox {
                    axis,
                    min: min.0[axis],
                    max: max.0[axis],
                });
            }
        }
        Ok(Aabb { min, max })
    }

    /// Degenerate box holding exactly one point.
    pub const fn from_point(p: Point) -> Self {
        Aabb { min: p, max: p }
    }

    pub fn min(&self) -> Point {
        self.min
    }

    pub fn max(&self) -> Point {
        self.max
    }

    /// Smallest box containing both `self` and `other`.
    #[inline]
    pub fn expand(&self, other: &Aabb) -> Aabb {
        let (a, b) = (&self.min.0, &other.min.0);
        let (c, d) = (&self.max.0, &other.max.0);
        Aabb {
            min: Point([a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])]),
            max: Point([c[0].max(d[0]), c[1].max(d[1]), c[2].max(d[2])]),
        }
    }

    pub fn centroid(&self) -> Point {
        let (lo, hi) = (&self.min.0, &self.max.0);
        // Halving first keeps the sum finite for extreme coordinates.
        Point([
            0.5 * lo[0] + 0.5 * hi[0],
            0.5 * lo[1] + 0.5 * hi[1],
            0.5 * lo[2] + 0.5 * hi[2],
        ])
    }

    /// Inclusive containment; shared faces count.
    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|d| self.min.0[d] <= other.min.0[d] && other.max.0[d] <= self.max.0[d])
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        (0..3).all(|d| self.min.0[d] <= p.0[d] && p.0[d] <= self.max.0[d])
    }

    /// Squared distance from `p` to the closest point of the box, 0 when inside.
    #[inline]
    pub fn distance_sq(&self, p: &Point) -> f32 {
        let mut sum = 0.0;
        for d in 0..3 {
            let v = p.0[d];
            let gap = if v < self.min.0[d] {
                self.min.0[d] - v
            } else if v > self.max.0[d] {
                v - self.max.0[d]
            } else {
                0.0
            };
            sum += gap * gap;
        }
        sum
    }

    pub fn extent(&self) -> [f32; 3] {
        let (lo, hi) = (&self.min.0, &self.max.0);
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]]
    }
}

impl From<Point> for Aabb {
    fn from(p: Point) -> Self {
        Aabb::from_point(p)
    }
}

/// Free-function form of [`Aabb::expand`].
pub fn expand(accumulator: &Aabb, other: &Aabb) -> Aabb {
    accumulator.expand(other)
}

pub fn centroid(b: &Aabb) -> Point {
    b.centroid()
}

pub fn distance_sq(p: &Point, b: &Aabb) -> f32 {
    b.distance_sq(p)
}

/// Box enclosing every input box. Computed as a parallel reduction; min/max
/// are exact so the result does not depend on how the fold is grouped.
pub fn scene_bounds(boxes: &[Aabb]) -> Result<Aabb> {
    boxes
        .par_iter()
        .copied()
        .reduce_with(|a, b| a.expand(&b))
        .ok_or(Error::EmptyScene)
}
