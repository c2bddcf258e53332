//! Input generators shared by the benchmarks.

use rand::Rng;
use rapd_core::geometry::{Point3, PointCloud};
use rapd_core::sampling::rng_from_seed;

/// `n` points uniform in `[-1, 1]^3`.
pub fn random_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

pub fn random_cloud(n: usize, seed: u64) -> PointCloud {
    PointCloud::new(random_points(n, seed)).expect("nonempty finite points")
}
