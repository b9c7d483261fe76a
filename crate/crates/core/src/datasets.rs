//! Synthetic point clouds: filled and hollow cubes and spheres.
//!
//! For `p` points every generator uses half-width `a = p^(1/3)` and the
//! domain `[-a, a]^3`, so the filled cube always has density 1/8.
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`, which is
//! specified bit-for-bit and therefore reproducible on every platform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point;

/// Raw draws closer than this to the origin are redrawn before projection.
const MIN_PROJECTION_NORM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Cube,
    Sphere,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Filled,
    Hollow,
}

/// Shape plus variant, written `cube:filled`, `sphere:hollow`, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CloudKind {
    pub shape: Shape,
    pub variant: Variant,
}

impl CloudKind {
    pub const FILLED_CUBE: CloudKind = CloudKind {
        shape: Shape::Cube,
        variant: Variant::Filled,
    };
    pub const HOLLOW_CUBE: CloudKind = CloudKind {
        shape: Shape::Cube,
        variant: Variant::Hollow,
    };
    pub const FILLED_SPHERE: CloudKind = CloudKind {
        shape: Shape::Sphere,
        variant: Variant::Filled,
    };
    pub const HOLLOW_SPHERE: CloudKind = CloudKind {
        shape: Shape::Sphere,
        variant: Variant::Hollow,
    };

    pub const ALL: [CloudKind; 4] = [
        Self::FILLED_CUBE,
        Self::HOLLOW_CUBE,
        Self::FILLED_SPHERE,
        Self::HOLLOW_SPHERE,
    ];
}

impl fmt::Display for CloudKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.shape {
            Shape::Cube => "cube",
            Shape::Sphere => "sphere",
        };
        let variant = match self.variant {
            Variant::Filled => "filled",
            Variant::Hollow => "hollow",
        };
        write!(f, "{shape}:{variant}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown cloud kind {0:?}; expected shape:variant, e.g. cube:filled")]
pub struct ParseCloudKindError(pub String);

impl FromStr for CloudKind {
    type Err = ParseCloudKindError;

    /// Accepts `shape:variant` and, since the two word sets do not overlap,
    /// `variant:shape`. Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseCloudKindError(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(err)?;
        let (a, b) = (a.trim().to_ascii_lowercase(), b.trim().to_ascii_lowercase());
        let shape = |w: &str| match w {
            "cube" => Some(Shape::Cube),
            "sphere" => Some(Shape::Sphere),
            _ => None,
        };
        let variant = |w: &str| match w {
            "filled" => Some(Variant::Filled),
            "hollow" => Some(Variant::Hollow),
            _ => None,
        };
        match (shape(&a), variant(&b), variant(&a), shape(&b)) {
            (Some(shape), Some(variant), _, _) | (_, _, Some(variant), Some(shape)) => Ok(CloudKind { shape, variant }),
            _ => Err(err()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CloudSpec {
    pub kind: CloudKind,
    pub count: usize,
    pub seed: u64,
}

impl CloudSpec {
    pub fn generate(&self) -> Vec<Point> {
        match (self.kind.shape, self.kind.variant) {
            (Shape::Cube, Variant::Filled) => gen_filled_cube(self.count, self.seed),
            (Shape::Cube, Variant::Hollow) => gen_hollow_cube(self.count, self.seed),
            (Shape::Sphere, Variant::Filled) => gen_filled_sphere(self.count, self.seed),
            (Shape::Sphere, Variant::Hollow) => gen_hollow_sphere(self.count, self.seed),
        }
    }
}

/// `p^(1/3)`.
pub fn half_width(p: usize) -> f32 {
    (p as f64).cbrt() as f32
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gen_filled_cube(p: usize, seed: u64) -> Vec<Point> {
    let a = half_width(p);
    let mut rng = rng(seed);
    (0..p)
        .map(|_| {
            Point::new_unchecked(
                rng.random_range(-a..=a),
                rng.random_range(-a..=a),
                rng.random_range(-a..=a),
            )
        })
        .collect()
}

/// Point `i` lands on face `i mod 6`, faces ordered -x, +x, -y, +y, -z, +z.
pub fn gen_hollow_cube(p: usize, seed: u64) -> Vec<Point> {
    let a = half_width(p);
    let mut rng = rng(seed);
    (0..p)
        .map(|i| {
            let face = i % 6;
            let axis = face / 2;
            let fixed = if face % 2 == 0 { -a } else { a };
            let u = rng.random_range(-a..=a);
            let v = rng.random_range(-a..=a);
            let c = match axis {
                0 => [fixed, u, v],
                1 => [u, fixed, v],
                _ => [u, v, fixed],
            };
            Point::new_unchecked(c[0], c[1], c[2])
        })
        .collect()
}

fn filled_sphere_with_draws(p: usize, seed: u64) -> (Vec<Point>, u64) {
    let a = half_width(p);
    let a2 = (a as f64) * (a as f64);
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(p);
    let mut draws = 0;
    while out.len() < p {
        let c: [f32; 3] = std::array::from_fn(|_| rng.random_range(-a..=a));
        draws += 1;
        let n2: f64 = c.iter().map(|&v| (v as f64) * (v as f64)).sum();
        if n2 <= a2 {
            out.push(Point::new_unchecked(c[0], c[1], c[2]));
        }
    }
    (out, draws)
}

/// Rejection sampling from the cube, keeping points with norm at most `a`.
pub fn gen_filled_sphere(p: usize, seed: u64) -> Vec<Point> {
    filled_sphere_with_draws(p, seed).0
}

/// Uniform draws in `[-1, 1]^3` pushed radially onto the sphere of radius `a`.
/// The result is denser towards the directions of the cube corners.
pub fn gen_hollow_sphere(p: usize, seed: u64) -> Vec<Point> {
    let a = half_width(p) as f64;
    let mut rng = rng(seed);
    (0..p)
        .map(|_| loop {
            let u: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
            let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            if norm >= MIN_PROJECTION_NORM {
                let s = a / norm;
                break Point::new_unchecked((u[0] * s) as f32, (u[1] * s) as f32, (u[2] * s) as f32);
            }
        })
        .collect()
}

/// Radius that holds `k` filled-cube points on average, ignoring edge effects:
/// the density is 1/8, so `(4/3) pi r^3 / 8 = k`.
pub fn default_radius(k: usize) -> f32 {
    (6.0 * k as f64 / std::f64::consts::PI).cbrt() as f32
}
