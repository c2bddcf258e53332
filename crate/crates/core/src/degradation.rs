//! Operators that reduce a predicted complete cloud back to a partial one,
//! so that it can be compared against an observed partial input.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, ensure_nonempty, nearest, nearest_neighbors, Point3, PointCloud};
use crate::sampling::{resample_indices, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradeMethod {
    /// Union of each partial point's k nearest predicted points.
    KMask,
    /// Predicted points whose voxel cell also holds a partial point.
    VoxelMask,
    /// Predicted points within `tau` of the partial cloud.
    TauMask,
    /// Uniform subset sized like the partial cloud.
    RandomDownsample,
}

impl DegradeMethod {
    pub const ALL: [DegradeMethod; 4] =
        [DegradeMethod::KMask, DegradeMethod::VoxelMask, DegradeMethod::TauMask, DegradeMethod::RandomDownsample];

    pub fn as_str(self) -> &'static str {
        match self {
            DegradeMethod::KMask => "k_mask",
            DegradeMethod::VoxelMask => "voxel_mask",
            DegradeMethod::TauMask => "tau_mask",
            DegradeMethod::RandomDownsample => "random_downsample",
        }
    }
}

impl fmt::Display for DegradeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DegradeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DegradeMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s.replace('-', "_"))
            .ok_or_else(|| Error::argument(format!("unknown degradation method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradationConfig {
    pub method: DegradeMethod,
    pub k: usize,
    pub tau: f64,
    pub voxel_resolution: usize,
    pub output_size: usize,
    pub seed: u64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self { method: DegradeMethod::KMask, k: 4, tau: 0.05, voxel_resolution: 32, output_size: 2048, seed: 0 }
    }
}

impl DegradationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::argument("degradation k must be >= 1"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::argument("degradation tau must be > 0"));
        }
        if self.voxel_resolution < 2 {
            return Err(Error::argument("voxel resolution must be >= 2"));
        }
        if self.output_size < 1 {
            return Err(Error::argument("degradation output size must be >= 1"));
        }
        Ok(())
    }
}

/// A degraded cloud plus the bookkeeping needed to route gradients back to
/// the predicted points.
#[derive(Clone, Debug)]
pub struct Degraded {
    pub cloud: PointCloud,
    /// Selected indices into `predicted`, ascending and unique.
    pub selection: Vec<usize>,
    /// For every output point, the predicted index it was copied from.
    pub source: Vec<usize>,
    /// The mask selected nothing and the single nearest point was used.
    pub fallback: bool,
}

/// Voxel cell of a point on a uniform grid over `[-1, 1]^3`.
pub fn voxel_index(p: Point3, resolution: usize) -> [usize; 3] {
    let r = resolution as f64;
    let cell = |c: f64| (((c + 1.0) * 0.5 * r).floor().max(0.0) as usize).min(resolution - 1);
    [cell(p[0]), cell(p[1]), cell(p[2])]
}

/// Selection step of [`degrade`], before resampling.
pub fn select<R: Rng + ?Sized>(
    predicted: &[Point3],
    partial: &[Point3],
    cfg: &DegradationConfig,
    rng: &mut R,
) -> Result<(Vec<usize>, bool)> {
    ensure_nonempty(predicted, "predicted")?;
    ensure_nonempty(partial, "partial")?;
    cfg.validate()?;
    let mut chosen = match cfg.method {
        DegradeMethod::KMask => {
            let k = cfg.k.min(predicted.len());
            let mut hit = vec![false; predicted.len()];
            for row in nearest_neighbors(partial, predicted, k)? {
                for n in row {
                    hit[n.index] = true;
                }
            }
            flagged(&hit)
        }
        DegradeMethod::TauMask => {
            let t2 = cfg.tau * cfg.tau;
            (0..predicted.len()).filter(|&j| nearest(predicted[j], partial).dist2 <= t2).collect()
        }
        DegradeMethod::VoxelMask => {
            let occupied: std::collections::HashSet<[usize; 3]> =
                partial.iter().map(|p| voxel_index(*p, cfg.voxel_resolution)).collect();
            (0..predicted.len())
                .filter(|&j| occupied.contains(&voxel_index(predicted[j], cfg.voxel_resolution)))
                .collect()
        }
        DegradeMethod::RandomDownsample => {
            let n = partial.len().min(predicted.len());
            let mut idx = rand::seq::index::sample(rng, predicted.len(), n).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    let fallback = chosen.is_empty();
    if fallback {
        chosen.push(globally_nearest(predicted, partial));
    }
    Ok((chosen, fallback))
}

/// Degrades `predicted` toward the observation pattern of `partial`, then
/// resamples the selection to `cfg.output_size` points.
pub fn degrade(predicted: &PointCloud, partial: &PointCloud, cfg: &DegradationConfig) -> Result<Degraded> {
    let mut rng = rng_from_seed(cfg.seed);
    degrade_with_rng(predicted, partial, cfg, &mut rng)
}

pub fn degrade_with_rng<R: Rng + ?Sized>(
    predicted: &PointCloud,
    partial: &PointCloud,
    cfg: &DegradationConfig,
    rng: &mut R,
) -> Result<Degraded> {
    let (selection, fallback) = select(&predicted.points, &partial.points, cfg, rng)?;
    if fallback {
        log::warn!("{} selected no points; using the nearest predicted point", cfg.method);
    }
    let source: Vec<usize> =
        resample_indices(selection.len(), cfg.output_size, rng).into_iter().map(|i| selection[i]).collect();
    let cloud = predicted.with_points(source.iter().map(|&j| predicted.points[j]).collect());
    Ok(Degraded { cloud, selection, source, fallback })
}

fn flagged(hit: &[bool]) -> Vec<usize> {
    hit.iter().enumerate().filter_map(|(i, &h)| h.then_some(i)).collect()
}

fn globally_nearest(predicted: &[Point3], partial: &[Point3]) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for (j, y) in predicted.iter().enumerate() {
        for x in partial {
            let d = dist2(*x, *y);
            if d < best.0 {
                best = (d, j);
            }
        }
    }
    best.1
}
