//! Training objectives: latent distillation distances, least-squares
//! adversarial losses, category-level latent priors and the weighted total.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{softmax, LatentCode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentDistanceKind {
    Kl,
    Js,
    L1,
    Cosine,
}

impl LatentDistanceKind {
    pub const ALL: [LatentDistanceKind; 4] =
        [LatentDistanceKind::Kl, LatentDistanceKind::Js, LatentDistanceKind::L1, LatentDistanceKind::Cosine];

    pub fn as_str(self) -> &'static str {
        match self {
            LatentDistanceKind::Kl => "kl",
            LatentDistanceKind::Js => "js",
            LatentDistanceKind::L1 => "l1",
            LatentDistanceKind::Cosine => "cosine",
        }
    }
}

impl fmt::Display for LatentDistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LatentDistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown latent distance `{s}`")))
    }
}

fn check_pair(target: &LatentCode, current: &LatentCode) -> Result<()> {
    if target.dim() != current.dim() {
        return Err(Error::Size(format!("latent dims differ: {} vs {}", target.dim(), current.dim())));
    }
    if target.dim() == 0 {
        return Err(Error::argument("empty latent code"));
    }
    for (name, code) in [("target", target), ("current", current)] {
        if let Some(i) = code.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { entry: format!("{name}[{i}]") });
        }
    }
    Ok(())
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(pi, _)| **pi > 0.0).map(|(pi, qi)| pi * (pi / qi).ln()).sum()
}

/// `KL(softmax(target) || softmax(current))`.
pub fn latent_kl(target: &LatentCode, current: &LatentCode) -> Result<f64> {
    latent_distance(LatentDistanceKind::Kl, target, current).map(|(v, _)| v)
}

/// One of the alternative latent distances.
pub fn latent_distance_alt(kind: LatentDistanceKind, target: &LatentCode, current: &LatentCode) -> Result<f64> {
    latent_distance(kind, target, current).map(|(v, _)| v)
}

/// Value and gradient with respect to `current`. `target` is a constant.
///
/// `kl` and `js` compare softmax distributions of the codes; `l1` (mean
/// absolute difference) and `cosine` (one minus cosine similarity) use the
/// raw codes.
pub fn latent_distance(kind: LatentDistanceKind, target: &LatentCode, current: &LatentCode) -> Result<(f64, Vec<f64>)> {
    check_pair(target, current)?;
    let (t, c) = (target.as_slice(), current.as_slice());
    match kind {
        LatentDistanceKind::Kl => {
            let p = softmax(t);
            let q = softmax(c);
            let grad = q.iter().zip(&p).map(|(qi, pi)| qi - pi).collect();
            Ok((kl(&p, &q).max(0.0), grad))
        }
        LatentDistanceKind::Js => {
            let p = softmax(t);
            let q = softmax(c);
            let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
            let value = 0.5 * kl(&p, &m) + 0.5 * kl(&q, &m);
            // dJS/dq_j = 0.5 ln(q_j / m_j), then through the softmax Jacobian.
            let g: Vec<f64> = q.iter().zip(&m).map(|(qi, mi)| 0.5 * (qi / mi).ln()).collect();
            let mean: f64 = q.iter().zip(&g).map(|(a, b)| a * b).sum();
            let grad = q.iter().zip(&g).map(|(qi, gi)| qi * (gi - mean)).collect();
            Ok((value.max(0.0), grad))
        }
        LatentDistanceKind::L1 => {
            let n = t.len() as f64;
            let value = t.iter().zip(c).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
            let grad = t
                .iter()
                .zip(c)
                .map(|(a, b)| {
                    if b > a {
                        1.0 / n
                    } else if b < a {
                        -1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok((value, grad))
        }
        LatentDistanceKind::Cosine => {
            let nt = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nc = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nt == 0.0 || nc == 0.0 {
                return Err(Error::argument("cosine distance of a zero-norm code"));
            }
            let dot: f64 = t.iter().zip(c).map(|(a, b)| a * b).sum();
            let cos = dot / (nt * nc);
            let grad = t.iter().zip(c).map(|(a, b)| -(a / (nt * nc) - cos * b / (nc * nc))).collect();
            Ok((1.0 - cos, grad))
        }
    }
}

/// Least-squares discriminator loss `(real - 1)^2 + fake^2`.
pub fn adversarial_d_loss(score_real: f64, score_fake: f64) -> f64 {
    (score_real - 1.0).powi(2) + score_fake.powi(2)
}

/// Gradient of [`adversarial_d_loss`] with respect to `(real, fake)`.
pub fn adversarial_d_grad(score_real: f64, score_fake: f64) -> (f64, f64) {
    (2.0 * (score_real - 1.0), 2.0 * score_fake)
}

/// Least-squares generator loss `(fake - 1)^2`.
pub fn adversarial_g_loss(score_fake: f64) -> f64 {
    (score_fake - 1.0).powi(2)
}

pub fn adversarial_g_grad(score_fake: f64) -> f64 {
    2.0 * (score_fake - 1.0)
}

/// Per-category arithmetic mean of raw latent codes.
pub fn category_mean_code(codes: &[LatentCode], labels: &[u32]) -> Result<BTreeMap<u32, LatentCode>> {
    if codes.len() != labels.len() {
        return Err(Error::Size(format!("{} codes but {} labels", codes.len(), labels.len())));
    }
    let mut sums: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    for (code, &label) in codes.iter().zip(labels) {
        let entry = sums.entry(label).or_insert_with(|| (vec![0.0; code.dim()], 0));
        if entry.0.len() != code.dim() {
            return Err(Error::Size("latent codes of different dimension".into()));
        }
        entry.0.iter_mut().zip(code.as_slice()).for_each(|(s, v)| *s += v);
        entry.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, LatentCode(s.into_iter().map(|v| v / n as f64).collect()))).collect())
}

/// Mean of all category means, used when a sample's category has no prior.
pub fn global_mean_code(means: &BTreeMap<u32, LatentCode>) -> Option<LatentCode> {
    let first = means.values().next()?;
    let mut acc = vec![0.0; first.dim()];
    for code in means.values() {
        acc.iter_mut().zip(code.as_slice()).for_each(|(a, v)| *a += v);
    }
    let n = means.len() as f64;
    Some(LatentCode(acc.into_iter().map(|v| v / n).collect()))
}

/// Weights of the generator objective. The two latent-distillation terms
/// share a step schedule over epochs; the remaining weights are constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// `(first epoch, weight)` steps for the paired and unpaired latent terms.
    pub schedule: Vec<(u32, f64)>,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { schedule: vec![(1, 5.0), (20, 2.0), (100, 1.0)], lambda3: 1.0, lambda4: 0.5, lambda5: 0.1 }
    }
}

/// Reference epoch count the default schedule breakpoints refer to.
pub const REFERENCE_EPOCHS: u32 = 150;

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        match self.schedule.first() {
            Some((1, _)) => {}
            _ => return Err(Error::argument("loss schedule must start at epoch 1")),
        }
        if self.schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::argument("loss schedule epochs must be strictly increasing"));
        }
        let all = self.schedule.iter().map(|s| s.1).chain([self.lambda3, self.lambda4, self.lambda5]);
        for v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::argument(format!("loss weights must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Weight of the latent terms at `epoch` (1-based).
    pub fn latent_weight(&self, epoch: u32) -> f64 {
        self.schedule.iter().take_while(|(start, _)| *start <= epoch).last().map_or(0.0, |s| s.1)
    }

    /// Schedule with breakpoints rescaled for a shorter run.
    ///
    /// Runs of at least 100 epochs keep the absolute breakpoints; shorter runs
    /// scale them by `epochs / 150`, rounding, and push collisions forward
    /// one epoch so the steps stay strictly increasing.
    pub fn scaled_for(&self, epochs: u32) -> LossWeights {
        if epochs >= 100 {
            return self.clone();
        }
        let ratio = epochs as f64 / REFERENCE_EPOCHS as f64;
        let mut schedule: Vec<(u32, f64)> = Vec::with_capacity(self.schedule.len());
        for &(start, w) in &self.schedule {
            let mut e = ((start as f64 * ratio).round() as u32).max(1);
            if let Some(&(prev, _)) = schedule.last() {
                e = e.max(prev + 1);
            }
            schedule.push((e, w));
        }
        LossWeights { schedule, ..self.clone() }
    }
}

/// Unweighted generator loss terms of one step or epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub z_paired: f64,
    pub z_unpaired: f64,
    pub cd_paired: f64,
    pub cd_unpaired: f64,
    pub g: f64,
}

impl LossTerms {
    pub fn unit() -> Self {
        Self { z_paired: 1.0, z_unpaired: 1.0, cd_paired: 1.0, cd_unpaired: 1.0, g: 1.0 }
    }
}

/// Weighted generator objective at `epoch`.
pub fn total_loss(terms: &LossTerms, weights: &LossWeights, epoch: u32) -> f64 {
    let lz = weights.latent_weight(epoch);
    lz * terms.z_paired
        + lz * terms.z_unpaired
        + weights.lambda3 * terms.cd_paired
        + weights.lambda4 * terms.cd_unpaired
        + weights.lambda5 * terms.g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_code(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> LatentCode {
        LatentCode((0..n).map(|_| rng.gen_range(-scale..scale)).collect())
    }

    // direct two-pass oracle, no shared helpers
    fn kl_oracle(t: &[f64], c: &[f64]) -> f64 {
        let zt: f64 = t.iter().map(|v| v.exp()).sum();
        let zc: f64 = c.iter().map(|v| v.exp()).sum();
        t.iter()
            .zip(c)
            .map(|(a, b)| {
                let p = a.exp() / zt;
                let q = b.exp() / zc;
                p * (p / q).ln()
            })
            .sum()
    }

    #[test]
    fn kl_hand_case() {
        let t = LatentCode(vec![0.0, 0.0]);
        let c = LatentCode(vec![3f64.ln(), 0.0]);
        let expect = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((latent_kl(&t, &c).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.1438).abs() < 1e-4);
        assert_eq!(latent_kl(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn kl_matches_oracle_and_is_asymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let t = random_code(&mut rng, 1024, 3.0);
            let c = random_code(&mut rng, 1024, 3.0);
            let v = latent_kl(&t, &c).unwrap();
            assert!(v >= 0.0);
            assert!((v - kl_oracle(&t.0, &c.0)).abs() < 1e-10);
            assert!((v - latent_kl(&c, &t).unwrap()).abs() > 1e-8);
        }
    }

    #[test]
    fn alternatives_zero_on_equal_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_code(&mut rng, 16, 1.0);
        for kind in LatentDistanceKind::ALL {
            assert!(latent_distance_alt(kind, &t, &t).unwrap().abs() < 1e-12, "{kind}");
        }
        let neg = LatentCode(t.0.iter().map(|v| -v).collect());
        assert!((latent_distance_alt(LatentDistanceKind::Cosine, &t, &neg).unwrap() - 2.0).abs() < 1e-12);
        assert!(latent_distance_alt(LatentDistanceKind::Cosine, &t, &LatentCode::zeros(16)).is_err());
    }

    #[test]
    fn alternatives_match_direct_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let t = random_code(&mut rng, 64, 2.0);
            let c = random_code(&mut rng, 64, 2.0);
            let l1: f64 = t.0.iter().zip(&c.0).map(|(a, b)| (a - b).abs()).sum::<f64>() / 64.0;
            let dot: f64 = t.0.iter().zip(&c.0).map(|(a, b)| a * b).sum();
            let nt: f64 = t.0.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nc: f64 = c.0.iter().map(|a| a * a).sum::<f64>().sqrt();
            let zt: f64 = t.0.iter().map(|v| v.exp()).sum();
            let zc: f64 = c.0.iter().map(|v| v.exp()).sum();
            let mut js = 0.0;
            for (a, b) in t.0.iter().zip(&c.0) {
                let p = a.exp() / zt;
                let q = b.exp() / zc;
                let m = 0.5 * (p + q);
                js += 0.5 * p * (p / m).ln() + 0.5 * q * (q / m).ln();
            }
            let alt = |k| latent_distance_alt(k, &t, &c).unwrap();
            assert!((alt(LatentDistanceKind::L1) - l1).abs() < 1e-10);
            assert!((alt(LatentDistanceKind::Cosine) - (1.0 - dot / (nt * nc))).abs() < 1e-10);
            assert!((alt(LatentDistanceKind::Js) - js).abs() < 1e-10);
            let rev = latent_distance_alt(LatentDistanceKind::Js, &c, &t).unwrap();
            assert!((alt(LatentDistanceKind::Js) - rev).abs() < 1e-12);
        }
    }

    #[test]
    fn latent_gradients_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-5;
        for kind in LatentDistanceKind::ALL {
            let t = random_code(&mut rng, 12, 2.0);
            let c = random_code(&mut rng, 12, 2.0);
            let (_, g) = latent_distance(kind, &t, &c).unwrap();
            for i in 0..12 {
                let mut up = c.clone();
                up.0[i] += h;
                let mut dn = c.clone();
                dn.0[i] -= h;
                let fd = (latent_distance_alt(kind, &t, &up).unwrap() - latent_distance_alt(kind, &t, &dn).unwrap())
                    / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-4 * g[i].abs().max(fd.abs()) + 1e-9, "{kind}[{i}]: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn adversarial_losses() {
        assert_eq!(adversarial_d_loss(1.0, 0.0), 0.0);
        assert_eq!(adversarial_d_loss(0.5, 0.5), 0.5);
        assert_eq!(adversarial_g_loss(1.0), 0.0);
        assert_eq!(adversarial_g_loss(0.0), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (r, f) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            assert_eq!(adversarial_d_loss(r, f), (r - 1.0) * (r - 1.0) + f * f);
            assert!(adversarial_d_loss(r, f) > 0.0);
            assert_eq!(adversarial_g_loss(f), (f - 1.0) * (f - 1.0));
        }
    }

    #[test]
    fn category_means() {
        let v = LatentCode(vec![1.0, -2.0, 3.0]);
        let neg = LatentCode(vec![-1.0, 2.0, -3.0]);
        let m = category_mean_code(&[v.clone(), neg, v.clone()], &[0, 0, 7]).unwrap();
        assert_eq!(m[&0], LatentCode::zeros(3));
        assert_eq!(m[&7], v);
        assert!(category_mean_code(&[v], &[]).is_err());
    }

    #[test]
    fn category_means_match_streaming() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let codes: Vec<LatentCode> = (0..50).map(|_| random_code(&mut rng, 8, 5.0)).collect();
        let labels: Vec<u32> = (0..50).map(|_| rng.gen_range(0..4)).collect();
        let m = category_mean_code(&codes, &labels).unwrap();
        for (&cat, mean) in &m {
            let mut run = [0.0; 8];
            let mut n = 0.0;
            for (c, _) in codes.iter().zip(&labels).filter(|(_, l)| **l == cat) {
                n += 1.0;
                for d in 0..8 {
                    run[d] += (c.0[d] - run[d]) / n;
                }
            }
            for d in 0..8 {
                assert!((mean.0[d] - run[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn schedule_values() {
        let w = LossWeights::default();
        w.validate().unwrap();
        let unit = LossTerms::unit();
        assert_eq!(total_loss(&LossTerms::default(), &w, 1), 0.0);
        assert!((total_loss(&unit, &w, 1) - 11.6).abs() < 1e-12);
        assert!((total_loss(&unit, &w, 19) - 11.6).abs() < 1e-12);
        assert!((total_loss(&unit, &w, 20) - 5.6).abs() < 1e-12);
        assert!((total_loss(&unit, &w, 100) - 3.6).abs() < 1e-12);
        assert!((total_loss(&unit, &w, 150) - 3.6).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for e in 1..=200 {
            let v = total_loss(&unit, &w, e);
            assert!(v <= last);
            if v < last && e > 1 {
                assert!(e == 20 || e == 100);
            }
            last = v;
        }
    }

    #[test]
    fn schedule_scaling() {
        let w = LossWeights::default();
        assert_eq!(w.scaled_for(150).schedule, w.schedule);
        assert_eq!(w.scaled_for(100).schedule, w.schedule);
        assert_eq!(w.scaled_for(75).schedule, vec![(1, 5.0), (10, 2.0), (50, 1.0)]);
        assert_eq!(w.scaled_for(10).schedule, vec![(1, 5.0), (2, 2.0), (7, 1.0)]);
        assert_eq!(w.scaled_for(1).schedule, vec![(1, 5.0), (2, 2.0), (3, 1.0)]);
        for e in [1, 5, 10, 30, 60, 99] {
            w.scaled_for(e).validate().unwrap();
        }
        let bad = LossWeights { schedule: vec![(2, 1.0)], ..w.clone() };
        assert!(bad.validate().is_err());
    }
}
