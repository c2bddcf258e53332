//! Point cloud values, nearest-neighbour queries and the distances used for
//! training and evaluation.

mod chamfer;
mod emd;
mod knn;

pub use chamfer::{chamfer_distance, chamfer_value_and_grad, f1_score, ChamferGrad};
pub use emd::{emd_distance, solve_assignment, Assignment, MAX_EMD_POINTS};
pub use knn::{nearest, nearest_neighbors, Neighbor};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// A set of 3D points, optionally tagged with a category and pair id.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub category: Option<u32>,
    pub pair_id: Option<u32>,
    pub id: Option<String>,
}

impl PointCloud {
    /// Builds an untagged cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::argument("point cloud must contain at least one point"));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::argument(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points, category: None, pair_id: None, id: None })
    }

    pub fn with_category(mut self, category: Option<u32>) -> Self {
        self.category = category;
        self
    }

    pub fn with_pair_id(mut self, pair_id: Option<u32>) -> Self {
        self.pair_id = pair_id;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    /// Same tags, different points.
    pub fn with_points(&self, points: Vec<Point3>) -> Self {
        Self { points, category: self.category, pair_id: self.pair_id, id: self.id.clone() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        centroid(&self.points)
    }

    /// Reorders points so that `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        self.with_points(perm.iter().map(|&i| self.points[i]).collect())
    }
}

impl AsRef<[Point3]> for PointCloud {
    fn as_ref(&self) -> &[Point3] {
        &self.points
    }
}

/// Configuration of the evaluation and training distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    /// Weight on the prediction-to-target direction of the Chamfer distance.
    pub gamma: f64,
    /// Distance threshold for F1 precision/recall.
    pub f1_threshold: f64,
    pub emd_enabled: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { gamma: 1.0, f1_threshold: 0.01, emd_enabled: false }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::argument(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.f1_threshold > 0.0) || !self.f1_threshold.is_finite() {
            return Err(Error::argument(format!("f1_threshold must be > 0, got {}", self.f1_threshold)));
        }
        Ok(())
    }
}

/// Result of [`normalize`].
#[derive(Clone, Debug)]
pub struct Normalized {
    pub cloud: PointCloud,
    pub center: Point3,
    pub scale: f64,
    /// All points coincided; `scale` was forced to 1.
    pub degenerate: bool,
}

/// Centers the cloud on its centroid and scales it into the unit ball.
///
/// `original = normalized * scale + center`.
pub fn normalize(cloud: &PointCloud) -> Normalized {
    let center = cloud.centroid();
    let centered: Vec<Point3> = cloud.points.iter().map(|p| sub(*p, center)).collect();
    let max_norm = centered.iter().map(|p| norm(*p)).fold(0.0, f64::max);
    let degenerate = !(max_norm > f64::EPSILON);
    let scale = if degenerate { 1.0 } else { max_norm };
    let points = centered.iter().map(|p| scaled(*p, 1.0 / scale)).collect();
    Normalized { cloud: cloud.with_points(points), center, scale, degenerate }
}

pub fn denormalize(cloud: &PointCloud, center: Point3, scale: f64) -> PointCloud {
    cloud.with_points(cloud.points.iter().map(|p| add(scaled(*p, scale), center)).collect())
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let mut c = [0.0; 3];
    for p in points {
        for d in 0..3 {
            c[d] += p[d];
        }
    }
    let n = points.len().max(1) as f64;
    [c[0] / n, c[1] / n, c[2] / n]
}

#[inline]
pub fn dist2(a: Point3, b: Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scaled(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn ensure_nonempty(points: &[Point3], what: &str) -> Result<()> {
    if points.is_empty() {
        Err(Error::argument(format!("{what} cloud is empty")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Point3, b: Point3, tol: f64) -> bool {
        (0..3).all(|d| (a[d] - b[d]).abs() <= tol)
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![[0.0, f64::NAN, 0.0]]).is_err());
        assert!(PointCloud::new(vec![[0.0, f64::INFINITY, 0.0]]).is_err());
    }

    #[test]
    fn normalize_identity_on_centered_unit_cloud() {
        let cloud =
            PointCloud::new(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, -0.5, 0.0]]).unwrap();
        let n = normalize(&cloud);
        assert_eq!(n.center, [0.0, 0.0, 0.0]);
        assert_eq!(n.scale, 1.0);
        assert_eq!(n.cloud.points, cloud.points);
        assert!(!n.degenerate);
    }

    #[test]
    fn normalize_two_points() {
        let cloud = PointCloud::new(vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let n = normalize(&cloud);
        assert_eq!(n.center, [1.0, 0.0, 0.0]);
        assert_eq!(n.scale, 1.0);
        assert_eq!(n.cloud.points, vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn normalize_degenerate_flags() {
        let cloud = PointCloud::new(vec![[3.0, 3.0, 3.0]; 5]).unwrap();
        let n = normalize(&cloud);
        assert!(n.degenerate);
        assert_eq!(n.scale, 1.0);
        assert!(n.cloud.points.iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn normalize_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pts: Vec<Point3> = (0..64)
                .map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..9.0), rng.gen_range(-3.0..0.0)])
                .collect();
            let cloud = PointCloud::new(pts).unwrap();
            let n = normalize(&cloud);
            assert!(close(n.cloud.centroid(), [0.0; 3], 1e-6));
            let max_norm = n.cloud.points.iter().map(|p| norm(*p)).fold(0.0, f64::max);
            assert!((max_norm - 1.0).abs() < 1e-6);
            let back = denormalize(&n.cloud, n.center, n.scale);
            for (a, b) in back.points.iter().zip(&cloud.points) {
                assert!(close(*a, *b, 1e-6));
            }
        }
    }
}
