use super::{ensure_nonempty, nearest, MetricConfig, Point3};
use crate::error::Result;

/// Chamfer distance with gradients with respect to both clouds.
#[derive(Clone, Debug)]
pub struct ChamferGrad {
    pub value: f64,
    pub grad_a: Vec<Point3>,
    pub grad_b: Vec<Point3>,
}

/// `gamma * mean_{x in a} min_y |x-y|^2 + mean_{y in b} min_x |y-x|^2`.
///
/// `a` is the prediction side in training, so `gamma` weighs how well every
/// predicted point is explained by the target.
pub fn chamfer_distance<A, B>(a: &A, b: &B, cfg: &MetricConfig) -> Result<f64>
where
    A: AsRef<[Point3]> + ?Sized,
    B: AsRef<[Point3]> + ?Sized,
{
    let (a, b) = (a.as_ref(), b.as_ref());
    ensure_nonempty(a, "first")?;
    ensure_nonempty(b, "second")?;
    let ab: f64 = a.iter().map(|x| nearest(*x, b).dist2).sum::<f64>() / a.len() as f64;
    let ba: f64 = b.iter().map(|y| nearest(*y, a).dist2).sum::<f64>() / b.len() as f64;
    Ok(cfg.gamma * ab + ba)
}

/// Value and (sub)gradient of [`chamfer_distance`]. Ties in the nearest
/// neighbour use the lowest index, as everywhere else.
pub fn chamfer_value_and_grad(a: &[Point3], b: &[Point3], gamma: f64) -> Result<ChamferGrad> {
    ensure_nonempty(a, "first")?;
    ensure_nonempty(b, "second")?;
    let wa = gamma / a.len() as f64;
    let wb = 1.0 / b.len() as f64;
    let mut grad_a = vec![[0.0; 3]; a.len()];
    let mut grad_b = vec![[0.0; 3]; b.len()];
    let mut sum_ab = 0.0;
    let mut sum_ba = 0.0;
    for (i, x) in a.iter().enumerate() {
        let nn = nearest(*x, b);
        sum_ab += nn.dist2;
        let y = b[nn.index];
        for d in 0..3 {
            let g = 2.0 * wa * (x[d] - y[d]);
            grad_a[i][d] += g;
            grad_b[nn.index][d] -= g;
        }
    }
    for (j, y) in b.iter().enumerate() {
        let nn = nearest(*y, a);
        sum_ba += nn.dist2;
        let x = a[nn.index];
        for d in 0..3 {
            let g = 2.0 * wb * (y[d] - x[d]);
            grad_b[j][d] += g;
            grad_a[nn.index][d] -= g;
        }
    }
    let value = gamma * sum_ab / a.len() as f64 + sum_ba / b.len() as f64;
    Ok(ChamferGrad { value, grad_a, grad_b })
}

/// F-score at `cfg.f1_threshold` (Euclidean distance, inclusive).
pub fn f1_score<A, B>(pred: &A, gt: &B, cfg: &MetricConfig) -> Result<f64>
where
    A: AsRef<[Point3]> + ?Sized,
    B: AsRef<[Point3]> + ?Sized,
{
    let (pred, gt) = (pred.as_ref(), gt.as_ref());
    ensure_nonempty(pred, "prediction")?;
    ensure_nonempty(gt, "ground-truth")?;
    let t2 = cfg.f1_threshold * cfg.f1_threshold;
    let hits = |from: &[Point3], to: &[Point3]| from.iter().filter(|p| nearest(**p, to).dist2 <= t2).count();
    let precision = hits(pred, gt) as f64 / pred.len() as f64;
    let recall = hits(gt, pred) as f64 / gt.len() as f64;
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(gamma: f64) -> MetricConfig {
        MetricConfig { gamma, ..Default::default() }
    }

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
    }

    fn oracle(a: &[Point3], b: &[Point3], gamma: f64) -> f64 {
        let mut s1 = 0.0;
        for x in a {
            let mut m = f64::INFINITY;
            for y in b {
                m = m.min(dist2(*x, *y));
            }
            s1 += m;
        }
        let mut s2 = 0.0;
        for y in b {
            let mut m = f64::INFINITY;
            for x in a {
                m = m.min(dist2(*x, *y));
            }
            s2 += m;
        }
        gamma * s1 / a.len() as f64 + s2 / b.len() as f64
    }

    #[test]
    fn hand_cases() {
        let a = [[0.0, 0.0, 0.0]];
        let b = [[1.0, 0.0, 0.0]];
        assert_eq!(chamfer_distance(&a, &b, &cfg(1.0)).unwrap(), 2.0);
        assert_eq!(chamfer_distance(&a, &a, &cfg(1.0)).unwrap(), 0.0);
        let empty: [Point3; 0] = [];
        assert!(chamfer_distance(&empty, &a, &cfg(1.0)).is_err());
        assert!(f1_score(&a, &empty, &cfg(1.0)).is_err());
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = cloud(&mut rng, 64);
            let b = cloud(&mut rng, 48);
            let g = rng.gen_range(0.0..2.0);
            let v = chamfer_distance(&a, &b, &cfg(g)).unwrap();
            assert!((v - oracle(&a, &b, g)).abs() < 1e-9);
            let vg = chamfer_value_and_grad(&a, &b, g).unwrap();
            assert!((vg.value - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for _ in 0..5 {
            let a = cloud(&mut rng, 12);
            let b = cloud(&mut rng, 9);
            let g = chamfer_value_and_grad(&a, &b, 0.7).unwrap();
            for (which, grads) in [(0, &g.grad_a), (1, &g.grad_b)] {
                for i in 0..grads.len() {
                    for d in 0..3 {
                        let f = |delta: f64| {
                            let (mut a2, mut b2) = (a.clone(), b.clone());
                            if which == 0 {
                                a2[i][d] += delta;
                            } else {
                                b2[i][d] += delta;
                            }
                            oracle(&a2, &b2, 0.7)
                        };
                        let fd = (f(h) - f(-h)) / (2.0 * h);
                        let an = grads[i][d];
                        assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-6), "{fd} vs {an}");
                    }
                }
            }
        }
    }

    #[test]
    fn f1_identity_and_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = cloud(&mut rng, 32);
        assert_eq!(f1_score(&a, &a, &cfg(1.0)).unwrap(), 1.0);
        let far: Vec<Point3> = a.iter().map(|p| [p[0] + 10.0, p[1], p[2]]).collect();
        assert_eq!(f1_score(&a, &far, &cfg(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn f1_monotone_in_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = cloud(&mut rng, 64);
        let b = cloud(&mut rng, 64);
        let mut last = 0.0;
        for t in [0.01, 0.05, 0.1, 0.2, 0.4, 1.0, 4.0] {
            let f = f1_score(&a, &b, &MetricConfig { f1_threshold: t, ..Default::default() }).unwrap();
            assert!(f >= last);
            last = f;
        }
        assert_eq!(last, 1.0);
    }
}
