//! Synthetic primitive shapes standing in for scanned object categories.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{Error, Result};
use crate::geometry::{normalize, Point3, PointCloud};
use crate::sampling::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Sphere,
    Cuboid,
    Cylinder,
    Cone,
    /// A box with a ball resting on top.
    Composite,
}

impl Primitive {
    pub const ALL: [Primitive; 5] =
        [Primitive::Sphere, Primitive::Cuboid, Primitive::Cylinder, Primitive::Cone, Primitive::Composite];

    pub fn category(self) -> u32 {
        Primitive::ALL.iter().position(|p| *p == self).unwrap() as u32
    }

    pub fn from_category(category: u32) -> Result<Self> {
        Primitive::ALL
            .get(category as usize)
            .copied()
            .ok_or_else(|| Error::argument(format!("no primitive for category {category}")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Primitive::Sphere => "sphere",
            Primitive::Cuboid => "cuboid",
            Primitive::Cylinder => "cylinder",
            Primitive::Cone => "cone",
            Primitive::Composite => "composite",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown primitive `{s}`")))
    }
}

/// Parameters of one synthetic shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpec {
    pub primitive: Primitive,
    /// Primitive-specific extents: sphere `[r, _, _]`, cuboid half-extents,
    /// cylinder/cone `[radius, half-height, _]`, composite `[box half-width, box half-height, ball radius]`.
    pub size: [f64; 3],
    /// Rotation about the z axis, radians.
    pub yaw: f64,
    pub num_points: usize,
    pub seed: u64,
}

impl ShapeSpec {
    /// Random extents and pose for the given primitive.
    pub fn random(primitive: Primitive, num_points: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed ^ 0x5348_4150_4553);
        let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let size = match primitive {
            Primitive::Sphere => [u(0.5, 1.0), 0.0, 0.0],
            Primitive::Cuboid => [u(0.3, 1.0), u(0.3, 1.0), u(0.3, 1.0)],
            Primitive::Cylinder => [u(0.3, 0.8), u(0.3, 1.0), 0.0],
            Primitive::Cone => [u(0.3, 0.8), u(0.4, 1.0), 0.0],
            Primitive::Composite => [u(0.4, 0.8), u(0.2, 0.5), u(0.25, 0.45)],
        };
        let yaw = u(0.0, 2.0 * PI);
        Self { primitive, size, yaw, num_points, seed }
    }
}

fn rotate_z(p: Point3, yaw: f64) -> Point3 {
    let (s, c) = yaw.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

fn sphere_point(rng: &mut impl Rng, r: f64) -> Point3 {
    let v: [f64; 3] = UnitSphere.sample(rng);
    [r * v[0], r * v[1], r * v[2]]
}

fn cuboid_point(rng: &mut impl Rng, h: [f64; 3]) -> Point3 {
    // face pairs weighted by area
    let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    let mut axis = 2;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            axis = i;
            break;
        }
        pick -= a;
    }
    let mut p = [0.0; 3];
    for d in 0..3 {
        p[d] = if d == axis {
            if rng.gen_bool(0.5) {
                h[d]
            } else {
                -h[d]
            }
        } else {
            rng.gen_range(-h[d]..=h[d])
        };
    }
    p
}

fn cylinder_point(rng: &mut impl Rng, r: f64, h: f64) -> Point3 {
    let side = 2.0 * PI * r * 2.0 * h;
    let caps = 2.0 * PI * r * r;
    let theta = rng.gen_range(0.0..2.0 * PI);
    if rng.gen_range(0.0..side + caps) < side {
        [r * theta.cos(), r * theta.sin(), rng.gen_range(-h..=h)]
    } else {
        let rho = r * rng.gen::<f64>().sqrt();
        let z = if rng.gen_bool(0.5) { h } else { -h };
        [rho * theta.cos(), rho * theta.sin(), z]
    }
}

fn cone_point(rng: &mut impl Rng, r: f64, h: f64) -> Point3 {
    // apex at +h, base disc at -h
    let slant = (r * r + 4.0 * h * h).sqrt();
    let lateral = PI * r * slant;
    let base = PI * r * r;
    let theta = rng.gen_range(0.0..2.0 * PI);
    if rng.gen_range(0.0..lateral + base) < lateral {
        let t = rng.gen::<f64>().sqrt();
        [t * r * theta.cos(), t * r * theta.sin(), h - 2.0 * h * t]
    } else {
        let rho = r * rng.gen::<f64>().sqrt();
        [rho * theta.cos(), rho * theta.sin(), -h]
    }
}

/// Samples the surface of the shape, normalized into the unit ball and
/// labelled with the primitive's category.
///
/// Centrally symmetric primitives are sampled in antipodal pairs so that the
/// centroid is exactly the shape center (for even point counts).
pub fn gen_complete(spec: &ShapeSpec) -> Result<PointCloud> {
    if spec.num_points == 0 {
        return Err(Error::argument("shape needs at least one point"));
    }
    let mut rng = rng_from_seed(spec.seed);
    let n = spec.num_points;
    let s = spec.size;
    let mut points: Vec<Point3> = Vec::with_capacity(n);
    let symmetric = matches!(spec.primitive, Primitive::Sphere | Primitive::Cuboid | Primitive::Cylinder);
    while points.len() < n {
        let p = match spec.primitive {
            Primitive::Sphere => sphere_point(&mut rng, s[0]),
            Primitive::Cuboid => cuboid_point(&mut rng, s),
            Primitive::Cylinder => cylinder_point(&mut rng, s[0], s[1]),
            Primitive::Cone => cone_point(&mut rng, s[0], s[1]),
            Primitive::Composite => {
                if points.len().is_multiple_of(2) {
                    cuboid_point(&mut rng, [s[0], s[0], s[1]])
                } else {
                    let c = sphere_point(&mut rng, s[2]);
                    [c[0], c[1], c[2] + s[1] + s[2]]
                }
            }
        };
        points.push(p);
        if symmetric && points.len() < n {
            points.push([-p[0], -p[1], -p[2]]);
        }
    }
    let points = points.into_iter().map(|p| rotate_z(p, spec.yaw)).collect();
    let cloud = PointCloud::new(points)?.with_category(Some(spec.primitive.category()));
    Ok(normalize(&cloud).cloud)
}
