use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::eval::{evaluate, split_validation};
use super::history::EpochRecord;
use super::{ordered_map, sum_grads, Observer, StagePrior, TrainingConfig};
use crate::dataio::{Checkpoint, Dataset, SplitRole};
use crate::degradation::{degrade_with_rng, DegradationConfig};
use crate::error::{Error, Result};
use crate::geometry::{chamfer_value_and_grad, Point3, PointCloud};
use crate::losses::{
    adversarial_d_grad, adversarial_d_loss, adversarial_g_grad, adversarial_g_loss, global_mean_code, latent_distance,
    total_loss, LatentDistanceKind, LossTerms, LossWeights,
};
use crate::nets::{
    decoder_backward, decoder_forward_traced, discriminator_backward, discriminator_forward_traced, distill_weights,
    encoder_backward, encoder_forward, encoder_forward_traced, init_params, LatentCode, ModelParams, Role,
};
use crate::optim::Adam;
use crate::sampling::{derive_seed, rng_from_seed};

/// Completion network: encoder followed by decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub encoder: ModelParams,
    pub decoder: ModelParams,
}

impl Generator {
    pub fn complete(&self, points: &[Point3]) -> Result<Vec<Point3>> {
        let z = encoder_forward(&self.encoder, points)?;
        crate::nets::decoder_forward(&self.decoder, &z)
    }

    pub fn to_checkpoint(&self, epoch: u32, digest: [u8; 32]) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(epoch, digest);
        c.insert_params("encoder", &self.encoder)?;
        c.insert_params("decoder", &self.decoder)?;
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        Ok(Self { encoder: c.params("encoder", Role::Encoder)?, decoder: c.params("decoder", Role::Decoder)? })
    }
}

/// Loss weights at one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepWeights {
    pub latent: f64,
    pub cd_paired: f64,
    pub cd_unpaired: f64,
    pub g: f64,
}

impl StepWeights {
    pub fn at(weights: &LossWeights, epoch: u32) -> Self {
        Self {
            latent: weights.latent_weight(epoch),
            cd_paired: weights.lambda3,
            cd_unpaired: weights.lambda4,
            g: weights.lambda5,
        }
    }

    pub fn total(&self, t: &LossTerms) -> f64 {
        self.latent * (t.z_paired + t.z_unpaired)
            + self.cd_paired * t.cd_paired
            + self.cd_unpaired * t.cd_unpaired
            + self.g * t.g
    }
}

pub struct PairedSample<'a> {
    pub partial: &'a [Point3],
    pub complete: &'a [Point3],
    /// Complete-cloud code; `None` disables the paired latent term.
    pub z_target: Option<&'a LatentCode>,
}

pub struct UnpairedSample<'a> {
    pub partial: &'a PointCloud,
    /// Category-level prior code; `None` disables the unpaired latent term.
    pub z_target: Option<&'a LatentCode>,
    pub degrade_seed: u64,
}

pub struct StepSettings<'a> {
    pub latent_distance: LatentDistanceKind,
    pub gamma: f64,
    pub degradation: &'a DegradationConfig,
    pub weights: StepWeights,
    /// Scores degraded predictions for the generator's adversarial term.
    pub discriminator: Option<&'a ModelParams>,
}

/// Batch-mean loss terms and generator gradients of one step.
pub struct GeneratorStep {
    pub terms: LossTerms,
    pub total: f64,
    pub encoder_grad: ModelParams,
    pub decoder_grad: ModelParams,
    /// Degraded predictions, detached, for the discriminator update.
    pub degraded: Vec<Vec<Point3>>,
}

struct SampleOut {
    z: f64,
    cd: f64,
    g: f64,
    ge: ModelParams,
    gd: ModelParams,
    degraded: Vec<Point3>,
}

fn run_sample(
    gen: &Generator,
    partial: &[Point3],
    z_target: Option<&LatentCode>,
    s: &StepSettings,
    latent_w: f64,
    // Returns the loss gradient w.r.t. the prediction, plus (cd, g, degraded).
    head: impl FnOnce(&[Point3]) -> Result<(Vec<Point3>, f64, f64, Vec<Point3>)>,
) -> Result<SampleOut> {
    let (z, et) = encoder_forward_traced(&gen.encoder, partial)?;
    let (pred, dt) = decoder_forward_traced(&gen.decoder, &z)?;
    let (d_pred, cd, g, degraded) = head(&pred)?;
    let mut ge = gen.encoder.zeros_like();
    let mut gd = gen.decoder.zeros_like();
    let mut dz = decoder_backward(&gen.decoder, &dt, &d_pred, &mut gd)?;
    let mut zv = 0.0;
    if let Some(t) = z_target {
        let (v, grad) = latent_distance(s.latent_distance, t, &z)?;
        zv = v;
        dz.iter_mut().zip(grad).for_each(|(a, b)| *a += latent_w * b);
    }
    encoder_backward(&gen.encoder, &et, &dz, &mut ge)?;
    Ok(SampleOut { z: zv, cd, g, ge, gd, degraded })
}

fn scaled(points: &[Point3], s: f64) -> Vec<Point3> {
    points.iter().map(|p| [p[0] * s, p[1] * s, p[2] * s]).collect()
}

/// Loss terms and generator gradients for one paired and one unpaired batch.
///
/// Every term is a mean over its batch and the gradients are those of
/// `settings.weights.total(terms)`. Degradation indices are constants.
pub fn generator_step(
    gen: &Generator,
    paired: &[PairedSample],
    unpaired: &[UnpairedSample],
    s: &StepSettings,
) -> Result<GeneratorStep> {
    let w = s.weights;
    let np = paired.len().max(1) as f64;
    let nu = unpaired.len().max(1) as f64;
    let p_out = ordered_map(paired, |p| {
        run_sample(gen, p.partial, p.z_target, s, w.latent / np, |pred| {
            let cd = chamfer_value_and_grad(pred, p.complete, s.gamma)?;
            Ok((scaled(&cd.grad_a, w.cd_paired / np), cd.value, 0.0, Vec::new()))
        })
    })?;
    let u_out = ordered_map(unpaired, |u| {
        run_sample(gen, &u.partial.points, u.z_target, s, w.latent / nu, |pred| {
            let predicted =
                PointCloud::new(pred.to_vec()).map_err(|_| Error::Numerical { entry: "decoder output".into() })?;
            let mut rng = rng_from_seed(u.degrade_seed);
            let deg = degrade_with_rng(&predicted, u.partial, s.degradation, &mut rng)?;
            let cd = chamfer_value_and_grad(&deg.cloud.points, &u.partial.points, s.gamma)?;
            let mut d_deg = scaled(&cd.grad_a, w.cd_unpaired / nu);
            let mut g = 0.0;
            if let Some(disc) = s.discriminator {
                let (score, tr) = discriminator_forward_traced(disc, &deg.cloud.points)?;
                g = adversarial_g_loss(score);
                let d_in = discriminator_backward(disc, &tr, adversarial_g_grad(score) * w.g / nu, None, true)?
                    .expect("input gradient requested");
                for (a, b) in d_deg.iter_mut().zip(d_in) {
                    (0..3).for_each(|k| a[k] += b[k]);
                }
            }
            let mut d_pred = vec![[0.0; 3]; pred.len()];
            for (k, &j) in deg.source.iter().enumerate() {
                (0..3).for_each(|d| d_pred[j][d] += d_deg[k][d]);
            }
            Ok((d_pred, cd.value, g, deg.cloud.points))
        })
    })?;
    let mean = |xs: &[SampleOut], f: fn(&SampleOut) -> f64, n: f64| xs.iter().map(f).sum::<f64>() / n;
    let terms = LossTerms {
        z_paired: mean(&p_out, |o| o.z, np),
        z_unpaired: mean(&u_out, |o| o.z, nu),
        cd_paired: mean(&p_out, |o| o.cd, np),
        cd_unpaired: mean(&u_out, |o| o.cd, nu),
        g: mean(&u_out, |o| o.g, nu),
    };
    let all = p_out.iter().chain(&u_out);
    let encoder_grad = sum_grads(&gen.encoder, all.clone().map(|o| &o.ge), 1.0)?;
    let decoder_grad = sum_grads(&gen.decoder, all.map(|o| &o.gd), 1.0)?;
    Ok(GeneratorStep {
        total: w.total(&terms),
        terms,
        encoder_grad,
        decoder_grad,
        degraded: u_out.into_iter().map(|o| o.degraded).collect(),
    })
}

/// Mean least-squares discriminator loss over (real, fake) pairs and its
/// parameter gradient. Fakes are constants.
pub fn discriminator_grads(
    disc: &ModelParams,
    reals: &[&[Point3]],
    fakes: &[Vec<Point3>],
) -> Result<(f64, ModelParams)> {
    if reals.len() != fakes.len() || reals.is_empty() {
        return Err(Error::argument("discriminator batch needs matching nonempty real and fake sets"));
    }
    let n = reals.len() as f64;
    let idx: Vec<usize> = (0..reals.len()).collect();
    let out = ordered_map(&idx, |&i| {
        let (r, tr) = discriminator_forward_traced(disc, reals[i])?;
        let (f, tf) = discriminator_forward_traced(disc, &fakes[i])?;
        let (dr, df) = adversarial_d_grad(r, f);
        let mut g = disc.zeros_like();
        discriminator_backward(disc, &tr, dr / n, Some(&mut g), false)?;
        discriminator_backward(disc, &tf, df / n, Some(&mut g), false)?;
        Ok((adversarial_d_loss(r, f), g))
    })?;
    let loss = out.iter().map(|o| o.0).sum::<f64>() / n;
    Ok((loss, sum_grads(disc, out.iter().map(|o| &o.1), 1.0)?))
}

/// Result of the second stage.
#[derive(Clone, Debug)]
pub struct Stage2Outcome {
    /// Parameters at the epoch with the lowest validation CD.
    pub best: Generator,
    pub best_epoch: u32,
    pub last: Generator,
    pub discriminator: Option<ModelParams>,
    pub history: Vec<EpochRecord>,
}

/// Initial generator: copies of the prior where weight distillation is on,
/// fresh initialization elsewhere.
pub fn initial_generator(prior: Option<&StagePrior>, cfg: &TrainingConfig) -> Result<Generator> {
    let f = &cfg.flags;
    let mut encoder = init_params(Role::Encoder, &cfg.net, derive_seed(cfg.seed, &[5]))?;
    let mut decoder = init_params(Role::Decoder, &cfg.net, derive_seed(cfg.seed, &[6]))?;
    if let Some(p) = prior {
        if f.use_weight_distill_encoder {
            encoder = distill_weights(&p.encoder_incomplete, &encoder)?;
        }
        if f.use_weight_distill_decoder {
            decoder = distill_weights(&p.decoder_complete, &decoder)?;
        }
    }
    Ok(Generator { encoder, decoder })
}

/// Trains the completion network on the paired and unpaired training roles of
/// `data`, selecting the epoch with the best CD on the validation half of the
/// test pairs.
///
/// Every epoch has `ceil(|unpaired incomplete| / batch)` steps in every mode,
/// so ablations see the same number of paired updates. A step draws a paired
/// batch of `min(batch, K)` pairs, cycling through a shuffled order, and one
/// unpaired batch. Generator gradients use the discriminator from before the
/// step; the discriminator is then updated once on the detached degraded
/// predictions.
pub fn train_stage2(
    prior: Option<&StagePrior>,
    data: &Dataset,
    cfg: &TrainingConfig,
    observer: &mut dyn Observer,
) -> Result<Stage2Outcome> {
    cfg.validate()?;
    let flags = cfg.flags;
    let prior = match prior {
        Some(p) => {
            p.check_arch(cfg)?;
            Some(p)
        }
        None if flags.needs_prior() => {
            return Err(Error::argument("weight or feature distillation is enabled but no prior was given"))
        }
        None => None,
    };
    let pairs = data.pairs(false)?;
    if pairs.is_empty() {
        return Err(Error::argument("stage 2 needs at least one paired sample"));
    }
    let unpaired: Vec<(&PointCloud, Option<u32>)> =
        data.items(SplitRole::UnpairedIncomplete).map(|(i, c)| (c, Some(i.category))).collect();
    if flags.use_self_supervised && unpaired.is_empty() {
        return Err(Error::argument("self-supervision is enabled but there are no unpaired incomplete clouds"));
    }
    let test_pairs = data.pairs(true)?;
    let (val_pairs, _) = split_validation(&test_pairs)?;

    let z_paired: Vec<Option<LatentCode>> = match prior {
        Some(p) if flags.use_feature_distill => {
            ordered_map(&pairs, |(_, c)| encoder_forward(&p.encoder_complete, &c.points).map(Some))?
        }
        _ => vec![None; pairs.len()],
    };
    let z_unpaired: Vec<Option<LatentCode>> = match prior {
        Some(p) if flags.use_feature_distill && flags.use_self_supervised => {
            let global = global_mean_code(&p.category_means);
            let mut warned = BTreeSet::new();
            unpaired
                .iter()
                .map(|(_, cat)| match cat.and_then(|c| p.category_means.get(&c)) {
                    Some(z) => Ok(Some(z.clone())),
                    None => {
                        if warned.insert(*cat) {
                            log::warn!("no category mean for {cat:?}; using the global mean");
                        }
                        global.clone().map(Some).ok_or_else(|| Error::argument("prior has no category means"))
                    }
                })
                .collect::<Result<_>>()?
        }
        _ => vec![None; unpaired.len()],
    };

    let mut gen = initial_generator(prior, cfg)?;
    let mut disc = if flags.uses_discriminator() {
        Some(init_params(Role::Discriminator, &cfg.net, derive_seed(cfg.seed, &[7]))?)
    } else {
        None
    };
    let mut opt_e = Adam::new(cfg.optimizer.clone(), &gen.encoder);
    let mut opt_d = Adam::new(cfg.optimizer.clone(), &gen.decoder);
    let mut opt_disc = disc.as_ref().map(|d| Adam::new(cfg.optimizer.clone(), d));
    let weights = cfg.effective_weights();
    let b = cfg.batch_size;
    let pool = if unpaired.is_empty() { pairs.len() } else { unpaired.len() };
    let steps = pool.div_ceil(b).max(1);
    let bp = b.min(pairs.len());

    let mut history = Vec::with_capacity(cfg.stage2_epochs as usize);
    let mut best: Option<(f64, u32, Generator)> = None;
    for epoch in 1..=cfg.stage2_epochs {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[20, epoch as u64]));
        let mut p_order: Vec<usize> = (0..pairs.len()).collect();
        p_order.shuffle(&mut rng);
        let mut u_order: Vec<usize> = (0..unpaired.len()).collect();
        u_order.shuffle(&mut rng);
        let settings_base = StepWeights::at(&weights, epoch);
        let mut sums = LossTerms::default();
        let mut sum_d = 0.0;
        for step in 0..steps {
            let paired_batch: Vec<PairedSample> = (0..bp)
                .map(|j| {
                    let i = p_order[(step * bp + j) % pairs.len()];
                    PairedSample {
                        partial: &pairs[i].0.points,
                        complete: &pairs[i].1.points,
                        z_target: z_paired[i].as_ref(),
                    }
                })
                .collect();
            let unpaired_batch: Vec<UnpairedSample> = if flags.use_self_supervised {
                u_order[(step * b).min(u_order.len())..((step + 1) * b).min(u_order.len())]
                    .iter()
                    .map(|&i| UnpairedSample {
                        partial: unpaired[i].0,
                        z_target: z_unpaired[i].as_ref(),
                        degrade_seed: derive_seed(
                            cfg.degradation.seed,
                            &[cfg.seed, epoch as u64, step as u64, i as u64],
                        ),
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let settings = StepSettings {
                latent_distance: cfg.latent_distance,
                gamma: cfg.metric.gamma,
                degradation: &cfg.degradation,
                weights: settings_base,
                discriminator: disc.as_ref(),
            };
            let out = generator_step(&gen, &paired_batch, &unpaired_batch, &settings)?;
            if !out.total.is_finite() {
                return Err(Error::Numerical { entry: format!("stage 2 epoch {epoch} step {step}: generator loss") });
            }
            if let (Some(d), Some(opt)) = (disc.as_mut(), opt_disc.as_mut()) {
                if !unpaired_batch.is_empty() {
                    let reals: Vec<&[Point3]> = unpaired_batch.iter().map(|u| u.partial.points.as_slice()).collect();
                    let (loss_d, grad) = discriminator_grads(d, &reals, &out.degraded)?;
                    if !loss_d.is_finite() {
                        return Err(Error::Numerical {
                            entry: format!("stage 2 epoch {epoch} step {step}: discriminator loss"),
                        });
                    }
                    opt.step(d, &grad)?;
                    sum_d += loss_d;
                }
            }
            opt_e.step(&mut gen.encoder, &out.encoder_grad)?;
            opt_d.step(&mut gen.decoder, &out.decoder_grad)?;
            let t = out.terms;
            sums.z_paired += t.z_paired;
            sums.z_unpaired += t.z_unpaired;
            sums.cd_paired += t.cd_paired;
            sums.cd_unpaired += t.cd_unpaired;
            sums.g += t.g;
        }
        let n = steps as f64;
        let terms = LossTerms {
            z_paired: sums.z_paired / n,
            z_unpaired: sums.z_unpaired / n,
            cd_paired: sums.cd_paired / n,
            cd_unpaired: sums.cd_unpaired / n,
            g: sums.g / n,
        };
        let val = evaluate(&gen, &val_pairs, &cfg.metric)?;
        let has_z_p = flags.use_feature_distill && prior.is_some();
        let ss = flags.use_self_supervised;
        let record = EpochRecord {
            epoch,
            loss_total: total_loss(&terms, &weights, epoch),
            z_paired: has_z_p.then_some(terms.z_paired),
            z_unpaired: (has_z_p && ss).then_some(terms.z_unpaired),
            cd_paired: terms.cd_paired,
            cd_unpaired: ss.then_some(terms.cd_unpaired),
            g: disc.is_some().then_some(terms.g),
            d: disc.is_some().then_some(sum_d / n),
            val_cd_e4: val.cd_e4,
            val_f1: val.f1,
        };
        log::info!(
            "stage 2 epoch {epoch}: total {:.6e}, cd paired {:.6e}, val cd x1e4 {:.4}, val f1 {:.4}",
            record.loss_total,
            record.cd_paired,
            record.val_cd_e4,
            record.val_f1
        );
        let is_best = best.as_ref().is_none_or(|(v, _, _)| record.val_cd_e4 < *v);
        if is_best {
            best = Some((record.val_cd_e4, epoch, gen.clone()));
        }
        observer.stage2_epoch(&record, &gen, is_best)?;
        history.push(record);
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(Stage2Outcome { best, best_epoch, last: gen, discriminator: disc, history })
}
