//! Partial views: a half-space cut plus a removed ball patch.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{Error, Result};
use crate::geometry::{dist2, dot, Point3, PointCloud};
use crate::sampling::{derive_seed, resample_indices, rng_from_seed};

/// Fewest surviving points accepted before resampling, for large clouds.
pub const MIN_SURVIVORS: usize = 32;
/// Attempts with fresh view seeds before giving up.
pub const MAX_VIEW_RETRIES: u32 = 16;
pub const PATCH_RADIUS: f64 = 0.15;
pub const OFFSET_RANGE: (f64, f64) = (-0.2, 0.4);

/// Explicit occlusion parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewParams {
    /// Points with `<p, direction> > offset` are dropped.
    pub direction: Point3,
    pub offset: f64,
    /// Ball removed from the survivors, if any.
    pub patch: Option<(Point3, f64)>,
}

/// A partial cloud and the indices of `complete` it was drawn from.
#[derive(Clone, Debug)]
pub struct PartialView {
    pub cloud: PointCloud,
    /// Indices into the complete cloud that survived the cut and the patch.
    pub survivors: Vec<usize>,
    pub view: ViewParams,
}

/// Survivor threshold for a cloud of `n` points: [`MIN_SURVIVORS`], relaxed
/// to an eighth of the cloud for small clouds.
pub fn min_survivors(n: usize) -> usize {
    MIN_SURVIVORS.min((n / 8).max(1))
}

/// Applies `view` to `complete` and resamples the survivors (with
/// replacement when needed) back to the complete cloud's size.
pub fn make_partial_with<R: Rng + ?Sized>(
    complete: &PointCloud,
    view: &ViewParams,
    rng: &mut R,
) -> Result<PartialView> {
    let survivors: Vec<usize> = (0..complete.len())
        .filter(|&i| {
            let p = complete.points[i];
            dot(p, view.direction) <= view.offset && view.patch.is_none_or(|(c, r)| dist2(p, c) > r * r)
        })
        .collect();
    let min = min_survivors(complete.len());
    if survivors.len() < min {
        return Err(Error::argument(format!("view keeps {} points, fewer than {min}", survivors.len())));
    }
    let picks = resample_indices(survivors.len(), complete.len(), rng);
    let points = picks.iter().map(|&k| complete.points[survivors[k]]).collect();
    Ok(PartialView { cloud: complete.with_points(points), survivors, view: view.clone() })
}

/// Random view: uniform cut direction, offset in [`OFFSET_RANGE`], and a
/// ball patch of radius [`PATCH_RADIUS`] around a random surviving point.
pub fn make_partial(complete: &PointCloud, view_seed: u64) -> Result<PartialView> {
    let mut last_err = None;
    for attempt in 0..MAX_VIEW_RETRIES {
        let mut rng = rng_from_seed(derive_seed(view_seed, &[attempt as u64]));
        let direction: [f64; 3] = UnitSphere.sample(&mut rng);
        let offset = rng.gen_range(OFFSET_RANGE.0..=OFFSET_RANGE.1);
        let kept: Vec<Point3> = complete.points.iter().copied().filter(|p| dot(*p, direction) <= offset).collect();
        if kept.is_empty() {
            last_err = Some(Error::argument("half-space cut removed every point"));
            continue;
        }
        let center = kept[rng.gen_range(0..kept.len())];
        let view = ViewParams { direction, offset, patch: Some((center, PATCH_RADIUS)) };
        match make_partial_with(complete, &view, &mut rng) {
            Ok(v) => return Ok(v),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::argument("could not synthesize a partial view")))
}
