use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataio::{generate_dataset, Dataset, SplitConfig, SplitRole};
use crate::degradation::DegradationConfig;
use crate::geometry::{MetricConfig, Point3, PointCloud};
use crate::losses::{LatentDistanceKind, LossWeights};
use crate::nets::{
    decoder_forward, encoder_forward, init_params, DecoderArch, DiscriminatorArch, EncoderArch, LatentCode,
    ModelParams, NetConfig, Role,
};

fn tiny_net(points: usize) -> NetConfig {
    NetConfig {
        encoder: EncoderArch { point_widths: vec![4, 6], global_widths: vec![8, 5] },
        decoder: DecoderArch { hidden_widths: vec![7], num_points: points },
        discriminator: DiscriminatorArch { point_widths: vec![4, 5], head_widths: vec![3] },
    }
}

fn tiny_cfg(points: usize) -> TrainingConfig {
    let mut c = TrainingConfig::desk();
    c.net = tiny_net(points);
    c.degradation = DegradationConfig { output_size: points, k: 2, ..Default::default() };
    c.stage1_epochs = 2;
    c.stage2_epochs = 2;
    c.batch_size = 4;
    c
}

fn small_data(points: usize) -> Dataset {
    let split = SplitConfig { num_pairs: 8, paired_fraction: 0.25, num_test_pairs: 2, ..Default::default() };
    generate_dataset(&split, points, 0).unwrap().0
}

fn prior_for(data: &Dataset, cfg: &TrainingConfig) -> StagePrior {
    train_stage1(&data.role(SplitRole::UnpairedComplete), &data.role(SplitRole::UnpairedIncomplete), cfg, &mut Quiet)
        .unwrap()
        .0
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

#[test]
fn stage1_smoke_and_determinism() {
    let data = small_data(16);
    let cfg = TrainingConfig { stage1_epochs: 1, ..tiny_cfg(16) };
    let complete: Vec<&PointCloud> = data.role(SplitRole::UnpairedComplete).into_iter().take(4).collect();
    let incomplete: Vec<&PointCloud> = data.role(SplitRole::UnpairedIncomplete).into_iter().take(4).collect();
    let (a, hist) = train_stage1(&complete, &incomplete, &cfg, &mut Quiet).unwrap();
    assert_eq!(hist.len(), 1);
    assert!(!a.category_means.is_empty());
    assert!(a.encoder_complete.is_frozen());
    assert!(!a.encoder_incomplete.is_empty() && !a.decoder_complete.is_empty());
    let (b, _) = train_stage1(&complete, &incomplete, &cfg, &mut Quiet).unwrap();
    assert_eq!(a, b);
    assert!(train_stage1(&[], &incomplete, &cfg, &mut Quiet).is_err());
}

#[test]
fn prior_checkpoint_round_trip() {
    let data = small_data(16);
    let cfg = tiny_cfg(16);
    let prior = prior_for(&data, &cfg);
    let back = StagePrior::from_checkpoint(
        &crate::dataio::Checkpoint::decode(&prior.to_checkpoint(2, [1; 32]).unwrap().encode()).unwrap(),
    )
    .unwrap();
    back.check_arch(&cfg).unwrap();
    assert_eq!(back.category_means.keys().collect::<Vec<_>>(), prior.category_means.keys().collect::<Vec<_>>());
    let bad = TrainingConfig { net: tiny_net(8), ..tiny_cfg(8) };
    assert!(back.check_arch(&bad).is_err());
}

#[test]
fn distilled_generator_reproduces_stage1_composition() {
    let data = small_data(16);
    let cfg = tiny_cfg(16);
    let prior = prior_for(&data, &cfg);
    let gen = initial_generator(Some(&prior), &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x = cloud(&mut rng, 16);
        let expect =
            decoder_forward(&prior.decoder_complete, &encoder_forward(&prior.encoder_incomplete, &x).unwrap()).unwrap();
        assert_eq!(gen.complete(&x).unwrap(), expect);
    }
    let fresh = initial_generator(None, &TrainingConfig { flags: AblationFlags::none(), ..cfg.clone() }).unwrap();
    assert_ne!(fresh.encoder, prior.encoder_incomplete);
}

#[test]
fn supervised_mode_logs_only_paired_chamfer() {
    let data = small_data(16);
    let cfg = TrainingConfig { flags: AblationFlags::none(), stage2_epochs: 1, ..tiny_cfg(16) };
    let out = train_stage2(None, &data, &cfg, &mut Quiet).unwrap();
    let r = out.history[0];
    assert!(
        r.z_paired.is_none() && r.z_unpaired.is_none() && r.cd_unpaired.is_none() && r.g.is_none() && r.d.is_none()
    );
    assert!(r.cd_paired > 0.0 && r.loss_total == r.cd_paired);
    let csv = stage2_csv(&out.history);
    assert_eq!(csv.lines().nth(1).unwrap().split(',').filter(|f| f.is_empty()).count(), 5);
    assert!(out.discriminator.is_none());
}

#[test]
fn full_mode_is_deterministic_and_leaves_prior_untouched() {
    let data = small_data(16);
    let cfg = tiny_cfg(16);
    let prior = prior_for(&data, &cfg);
    let frozen = prior.encoder_complete.clone();
    let a = train_stage2(Some(&prior), &data, &cfg, &mut Quiet).unwrap();
    assert_eq!(prior.encoder_complete, frozen);
    let b = train_stage2(Some(&prior), &data, &cfg, &mut Quiet).unwrap();
    assert_eq!(stage2_csv(&a.history), stage2_csv(&b.history));
    assert_eq!(a.last, b.last);
    let r = a.history[1];
    assert!(r.z_paired.is_some() && r.z_unpaired.is_some() && r.g.is_some() && r.d.is_some());
    assert!(a.history.iter().any(|h| h.val_cd_e4 == a.history[a.best_epoch as usize - 1].val_cd_e4));
    assert_ne!(a.last.encoder, prior.encoder_incomplete);
    assert!(train_stage2(None, &data, &cfg, &mut Quiet).is_err());
}

#[test]
fn schedule_applies_to_epoch_totals() {
    let data = small_data(16);
    let cfg = TrainingConfig { stage2_epochs: 3, ..tiny_cfg(16) };
    let prior = prior_for(&data, &cfg);
    let out = train_stage2(Some(&prior), &data, &cfg, &mut Quiet).unwrap();
    let w = cfg.effective_weights();
    for r in &out.history {
        let lam = w.latent_weight(r.epoch);
        let expect = lam * (r.z_paired.unwrap() + r.z_unpaired.unwrap())
            + w.lambda3 * r.cd_paired
            + w.lambda4 * r.cd_unpaired.unwrap()
            + w.lambda5 * r.g.unwrap();
        assert!((r.loss_total - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }
}

// ---- gradients of the composite objective ----

fn rel_ok(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-4 * a.abs().max(b.abs()) + 1e-9
}

fn fd_params(params: &ModelParams, grads: &ModelParams, loss: &dyn Fn(&ModelParams) -> f64, what: &str) {
    let h = 1e-5;
    for (name, t) in params.iter() {
        for i in 0..t.len() {
            let mut p = params.clone();
            p.get_mut(name).unwrap().data_mut()[i] += h;
            let up = loss(&p);
            p.get_mut(name).unwrap().data_mut()[i] -= 2.0 * h;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            let an = grads.get(name).unwrap().data()[i];
            assert!(rel_ok(an, fd), "{what} {name}[{i}]: analytic {an} vs fd {fd}");
        }
    }
}

#[test]
fn composite_objective_matches_finite_differences() {
    let n = 8;
    let net = tiny_net(n);
    let deg = DegradationConfig { output_size: n, k: 2, ..Default::default() };
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let gen = Generator {
            encoder: init_params(Role::Encoder, &net, seed).unwrap(),
            decoder: init_params(Role::Decoder, &net, seed + 50).unwrap(),
        };
        let disc = init_params(Role::Discriminator, &net, seed + 99).unwrap();
        let pp: Vec<(Vec<Point3>, Vec<Point3>)> = (0..2).map(|_| (cloud(&mut rng, n), cloud(&mut rng, n))).collect();
        let up: Vec<PointCloud> = (0..2).map(|_| PointCloud::new(cloud(&mut rng, n)).unwrap()).collect();
        let zt: Vec<LatentCode> =
            (0..4).map(|_| LatentCode((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
        for kind in LatentDistanceKind::ALL {
            let weights = StepWeights::at(&LossWeights::default(), 1 + seed as u32 * 40);
            let settings = StepSettings {
                latent_distance: kind,
                gamma: 1.0,
                degradation: &deg,
                weights,
                discriminator: Some(&disc),
            };
            let paired: Vec<PairedSample> = pp
                .iter()
                .zip(&zt)
                .map(|((a, b), z)| PairedSample { partial: a, complete: b, z_target: Some(z) })
                .collect();
            let unpaired: Vec<UnpairedSample> = up
                .iter()
                .zip(&zt[2..])
                .enumerate()
                .map(|(i, (c, z))| UnpairedSample { partial: c, z_target: Some(z), degrade_seed: i as u64 })
                .collect();
            let out = generator_step(&gen, &paired, &unpaired, &settings).unwrap();
            assert!(out.terms.z_paired > 0.0 && out.terms.cd_unpaired > 0.0 && out.terms.g > 0.0);
            let loss_e = |p: &ModelParams| {
                let g = Generator { encoder: p.clone(), decoder: gen.decoder.clone() };
                generator_step(&g, &paired, &unpaired, &settings).unwrap().total
            };
            let loss_d = |p: &ModelParams| {
                let g = Generator { encoder: gen.encoder.clone(), decoder: p.clone() };
                generator_step(&g, &paired, &unpaired, &settings).unwrap().total
            };
            fd_params(&gen.encoder, &out.encoder_grad, &loss_e, kind.as_str());
            fd_params(&gen.decoder, &out.decoder_grad, &loss_d, kind.as_str());

            let reals: Vec<&[Point3]> = up.iter().map(|c| c.points.as_slice()).collect();
            let (_, dg) = discriminator_grads(&disc, &reals, &out.degraded).unwrap();
            let loss_disc = |p: &ModelParams| discriminator_grads(p, &reals, &out.degraded).unwrap().0;
            fd_params(&disc, &dg, &loss_disc, "discriminator");
        }
    }
}

// ---- evaluation ----

#[test]
fn evaluation_contracts() {
    let data = small_data(32);
    let metric = MetricConfig::default();
    let gts: Vec<&PointCloud> = data.role(SplitRole::UnpairedComplete);
    let ident: Vec<(&[Point3], &PointCloud)> = gts.iter().map(|c| (c.points.as_slice(), *c)).collect();
    let r = evaluate_predictions(&ident, &metric).unwrap();
    assert_eq!((r.cd_e4, r.f1), (0.0, 1.0));

    let shifted: Vec<Vec<Point3>> =
        gts.iter().map(|c| c.points.iter().map(|p| [p[0] + 0.01, p[1], p[2] * 1.1]).collect()).collect();
    let pairs: Vec<(&[Point3], &PointCloud)> = shifted.iter().map(|p| p.as_slice()).zip(gts.iter().copied()).collect();
    let a = evaluate_predictions(&pairs, &metric).unwrap();
    let mut rev = pairs.clone();
    rev.reverse();
    rev.rotate_left(2);
    let b = evaluate_predictions(&rev, &metric).unwrap();
    assert_eq!((a.cd_e4, a.f1), (b.cd_e4, b.f1));
    assert_eq!(a.per_category, b.per_category);
    let recombined: f64 = a.per_category.values().map(|c| c.cd_e4 * c.count as f64).sum::<f64>() / a.count as f64;
    assert!((recombined - a.cd_e4).abs() <= 1e-9 * a.cd_e4.max(1.0));
    assert_eq!(a.per_category.values().map(|c| c.count).sum::<usize>(), a.count);
    assert!(evaluate_predictions(&[], &metric).is_err());

    let with_emd = evaluate_predictions(&ident, &MetricConfig { emd_enabled: true, ..metric }).unwrap();
    assert_eq!(with_emd.emd, Some(0.0));
}

#[test]
fn validation_split_alternates() {
    let (v, t) = split_validation(&[0, 1, 2, 3, 4]).unwrap();
    assert_eq!((v, t), (vec![0, 2, 4], vec![1, 3]));
    assert_eq!(split_validation(&[7]).unwrap(), (vec![7], vec![7]));
    assert!(split_validation::<u8>(&[]).is_err());
}
