use super::{dist2, ensure_nonempty, Point3};
use crate::error::{Error, Result};

/// Largest cloud size accepted by [`emd_distance`] (exact O(n^3) assignment).
pub const MAX_EMD_POINTS: usize = 512;

/// Optimal solution of a square assignment problem together with the dual
/// potentials that certify it: `row_potential[i] + col_potential[j] <= cost[i][j]`
/// for all pairs, with equality on the matching.
#[derive(Clone, Debug)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
    pub cost: f64,
}

/// Minimum-cost perfect matching on an `n x n` row-major cost matrix
/// (Hungarian method with potentials).
pub fn solve_assignment(n: usize, cost: &[f64]) -> Assignment {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    let at = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    // 1-based; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    let total = row_to_col.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Assignment { row_to_col, row_potential: u[1..].to_vec(), col_potential: v[1..].to_vec(), cost: total }
}

/// Earth mover's distance between equal-size clouds: mean Euclidean length
/// of the optimal one-to-one matching.
pub fn emd_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: AsRef<[Point3]> + ?Sized,
    B: AsRef<[Point3]> + ?Sized,
{
    let (a, b) = (a.as_ref(), b.as_ref());
    ensure_nonempty(a, "first")?;
    ensure_nonempty(b, "second")?;
    if a.len() != b.len() {
        return Err(Error::UnsupportedSize(format!("EMD needs equal sizes, got {} and {}", a.len(), b.len())));
    }
    if a.len() > MAX_EMD_POINTS {
        return Err(Error::UnsupportedSize(format!("EMD supports at most {MAX_EMD_POINTS} points, got {}", a.len())));
    }
    let n = a.len();
    let mut cost = Vec::with_capacity(n * n);
    for x in a {
        for y in b {
            cost.push(dist2(*x, *y).sqrt());
        }
    }
    Ok(solve_assignment(n, &cost).cost / n as f64)
}
