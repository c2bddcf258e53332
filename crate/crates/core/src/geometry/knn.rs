use super::{dist2, Point3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

/// Closest reference point to `query`; ties go to the lower index.
///
/// `reference` must be nonempty.
#[inline]
pub fn nearest(query: Point3, reference: &[Point3]) -> Neighbor {
    let mut best = Neighbor { index: 0, dist2: f64::INFINITY };
    for (j, r) in reference.iter().enumerate() {
        let d = dist2(query, *r);
        if d < best.dist2 {
            best = Neighbor { index: j, dist2: d };
        }
    }
    best
}

/// Exact k-nearest neighbours by exhaustive scan.
///
/// Each row is sorted by ascending squared distance, ties broken by lower
/// reference index.
pub fn nearest_neighbors<Q, R>(query: &Q, reference: &R, k: usize) -> Result<Vec<Vec<Neighbor>>>
where
    Q: AsRef<[Point3]> + ?Sized,
    R: AsRef<[Point3]> + ?Sized,
{
    let reference = reference.as_ref();
    if k == 0 {
        return Err(Error::Size("k must be positive".into()));
    }
    if k > reference.len() {
        return Err(Error::Size(format!("k = {k} exceeds reference size {}", reference.len())));
    }
    Ok(query.as_ref().iter().map(|q| knn_one(*q, reference, k)).collect())
}

fn knn_one(q: Point3, reference: &[Point3], k: usize) -> Vec<Neighbor> {
    let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
    for (j, r) in reference.iter().enumerate() {
        let d = dist2(q, *r);
        if best.len() == k && d >= best[k - 1].dist2 {
            continue;
        }
        // Equal distances keep insertion (= index) order.
        let pos = best.partition_point(|n| n.dist2 <= d);
        best.insert(pos, Neighbor { index: j, dist2: d });
        best.truncate(k);
    }
    best
}
