//! Implementations of the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use rapd_core::dataio::{
    generate_dataset, load_checkpoint, read_pcb, read_ply, save_checkpoint, write_ply, Dataset, SplitRole,
};
use rapd_core::degradation::{self, DegradationConfig};
use rapd_core::geometry::{Point3, PointCloud};
use rapd_core::nets::{init_params, Role};
use rapd_core::pipeline::{
    evaluate, evaluate_predictions, split_validation, stage1_csv, stage2_csv, train_stage1, train_stage2, EpochRecord,
    EvalReport, Generator, Observer, Stage1Record, StagePrior,
};
use rapd_core::Error;

use crate::config::RunConfig;
use crate::render::{render_svg, View};
use crate::{
    DegradeArgs, DistillArgs, EvalArgs, EvalSplit, GenDataArgs, PretrainArgs, RenderArgs, ShowConfigArgs,
    TrainOverrides,
};

pub const WORKERS_ENV: &str = "RAPD_WORKERS";
pub const PRIOR_FILE: &str = "prior.rpdc";
pub const STAGE1_METRICS_FILE: &str = "stage1_metrics.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const BEST_FILE: &str = "best.rpdc";
pub const LAST_FILE: &str = "last.rpdc";
pub const CONFIG_FILE: &str = "config.toml";

fn arg_err(msg: impl Into<String>) -> anyhow::Error {
    Error::Argument(msg.into()).into()
}

/// Worker count from `RAPD_WORKERS`; 0 means serial. Defaults to the
/// number of available cores.
pub fn workers_from_env() -> anyhow::Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            v.trim().parse().map_err(|_| arg_err(format!("{WORKERS_ENV} must be a non-negative integer, got `{v}`")))
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Sizes the global rayon pool. Results never depend on the worker count.
pub fn init_thread_pool(workers: usize) {
    if rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build_global().is_err() {
        info!("thread pool already initialized");
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn require(path: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> anyhow::Result<PathBuf> {
    path.or_else(|| fallback.clone()).ok_or_else(|| arg_err(format!("missing {flag} (flag or [paths] entry)")))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io { path: path.to_path_buf(), source: e }.into())
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e }.into())
}

fn apply_training(cfg: &mut RunConfig, o: &TrainOverrides) {
    set(&mut cfg.training.optimizer.learning_rate, o.lr);
    set(&mut cfg.training.batch_size, o.batch_size);
    if let Some(seed) = o.seed {
        cfg.training.seed = seed;
        cfg.training.degradation.seed = seed;
    }
}

pub fn gen_data(a: GenDataArgs, workers: usize) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    set(&mut cfg.split.num_pairs, a.num_pairs);
    set(&mut cfg.split.paired_fraction, a.paired_fraction);
    set(&mut cfg.split.num_categories, a.categories);
    set(&mut cfg.split.num_test_pairs, a.num_test_pairs);
    set(&mut cfg.split.seed, a.seed);
    set(&mut cfg.num_points, a.num_points);
    cfg.validate()?;
    let out = require(a.out, &cfg.paths.out, "--out")?;
    if !a.force && fs::read_dir(&out).map(|mut d| d.next().is_some()).unwrap_or(false) {
        return Err(arg_err(format!("{} is not empty (use --force to overwrite)", out.display())));
    }
    let (data, clamped) = generate_dataset(&cfg.split, cfg.num_points, workers)?;
    create_dir(&out)?;
    data.save(&out)?;
    write_file(&out.join(CONFIG_FILE), cfg.to_toml())?;
    if clamped {
        println!("paired fraction clamped: {} paired shapes", data.role(SplitRole::PairedComplete).len());
    }
    for role in SplitRole::ALL {
        println!("{} {}", role.as_str(), data.role(role).len());
    }
    Ok(())
}

fn load_data(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

struct Stage1Log;

impl Observer for Stage1Log {
    fn stage1_epoch(&mut self, r: &Stage1Record) -> rapd_core::Result<()> {
        info!("stage1 epoch {} cd_complete {:.6e} cd_incomplete {:.6e}", r.epoch, r.cd_complete, r.cd_incomplete);
        Ok(())
    }
}

pub fn pretrain(a: PretrainArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    set(&mut cfg.training.stage1_epochs, a.train.epochs);
    apply_training(&mut cfg, &a.train);
    cfg.validate()?;
    let data = load_data(&require(a.data, &cfg.paths.data, "--data")?)?;
    let out = require(a.out, &cfg.paths.out, "--out")?;
    let complete = data.role(SplitRole::UnpairedComplete);
    let incomplete = data.role(SplitRole::UnpairedIncomplete);
    for (role, pool) in [(SplitRole::UnpairedComplete, &complete), (SplitRole::UnpairedIncomplete, &incomplete)] {
        if pool.is_empty() {
            return Err(arg_err(format!("dataset has no {} clouds", role.as_str())));
        }
    }
    let (prior, history) = train_stage1(&complete, &incomplete, &cfg.training, &mut Stage1Log)?;
    create_dir(&out)?;
    let ckpt = prior.to_checkpoint(cfg.training.stage1_epochs, cfg.stage1_digest())?;
    save_checkpoint(out.join(PRIOR_FILE), &ckpt)?;
    write_file(&out.join(STAGE1_METRICS_FILE), stage1_csv(&history))?;
    write_file(&out.join(CONFIG_FILE), cfg.to_toml())?;
    if let Some(r) = history.last() {
        println!("stage1 epochs {} cd_complete {:.6e} cd_incomplete {:.6e}", r.epoch, r.cd_complete, r.cd_incomplete);
    }
    Ok(())
}

/// Logs epochs and writes periodic checkpoints.
struct Stage2Writer {
    out: PathBuf,
    every: u32,
    digest: [u8; 32],
}

impl Observer for Stage2Writer {
    fn stage2_epoch(&mut self, r: &EpochRecord, g: &Generator, is_best: bool) -> rapd_core::Result<()> {
        info!(
            "stage2 epoch {} loss {:.6e} val_cd_e4 {:.4}{}",
            r.epoch,
            r.loss_total,
            r.val_cd_e4,
            if is_best { " (best)" } else { "" }
        );
        if self.every > 0 && r.epoch.is_multiple_of(self.every) {
            let path = self.out.join(format!("epoch_{:04}.rpdc", r.epoch));
            rapd_core::dataio::save_checkpoint(path, &g.to_checkpoint(r.epoch, self.digest)?)?;
        }
        Ok(())
    }
}

pub fn distill(a: DistillArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let t = &mut cfg.training;
    set(&mut t.stage2_epochs, a.train.epochs);
    let f = &mut t.flags;
    f.use_weight_distill_encoder &= !a.no_weight_distill_encoder;
    f.use_weight_distill_decoder &= !a.no_weight_distill_decoder;
    f.use_feature_distill &= !a.no_feature_distill;
    f.use_self_supervised &= !a.no_self_sup;
    f.use_discriminator &= !a.no_discriminator;
    if let Some(s) = &a.latent_distance {
        t.latent_distance = s.parse()?;
    }
    if let Some(s) = &a.degradation {
        t.degradation.method = s.parse()?;
    }
    set(&mut t.degradation.k, a.k);
    set(&mut t.degradation.tau, a.tau);
    set(&mut t.degradation.voxel_resolution, a.resolution);
    set(&mut cfg.checkpoint_every, a.checkpoint_every);
    apply_training(&mut cfg, &a.train);
    cfg.validate()?;

    let data = load_data(&require(a.data, &cfg.paths.data, "--data")?)?;
    let out = require(a.out, &cfg.paths.out, "--out")?;
    let prior_path = a.prior.or_else(|| cfg.paths.prior.clone());
    let prior = match (&prior_path, cfg.training.flags.needs_prior()) {
        (Some(p), true) => {
            let ckpt = load_checkpoint(p)?;
            if !ckpt.check_digest(&cfg.stage1_digest()) {
                warn!("prior {} was trained with a different first-stage configuration", p.display());
            }
            Some(StagePrior::from_checkpoint(&ckpt)?)
        }
        (None, true) => return Err(arg_err("distillation is enabled but no --prior was given")),
        (Some(p), false) => {
            info!("ignoring prior {}: no distillation enabled", p.display());
            None
        }
        (None, false) => None,
    };

    create_dir(&out)?;
    let digest = cfg.digest();
    let mut writer = Stage2Writer { out: out.clone(), every: cfg.checkpoint_every, digest };
    let outcome = train_stage2(prior.as_ref(), &data, &cfg.training, &mut writer)?;
    save_checkpoint(out.join(BEST_FILE), &outcome.best.to_checkpoint(outcome.best_epoch, digest)?)?;
    save_checkpoint(out.join(LAST_FILE), &outcome.last.to_checkpoint(cfg.training.stage2_epochs, digest)?)?;
    write_file(&out.join(METRICS_FILE), stage2_csv(&outcome.history))?;
    write_file(&out.join(CONFIG_FILE), cfg.to_toml())?;
    let best = &outcome.history[outcome.best_epoch as usize - 1];
    println!("best epoch {} val_cd_e4 {:.4} val_f1 {:.4}", outcome.best_epoch, best.val_cd_e4, best.val_f1);
    Ok(())
}

fn category_label(c: Option<u32>) -> String {
    c.map_or_else(|| "none".to_string(), |c| c.to_string())
}

/// Per-category rows followed by an `all` row.
pub fn report_csv(r: &EvalReport) -> String {
    let mut s = String::from("category,count,cd_e4,f1\n");
    for (c, st) in &r.per_category {
        s.push_str(&format!("{},{},{:.9e},{:.9e}\n", category_label(*c), st.count, st.cd_e4, st.f1));
    }
    s.push_str(&format!("all,{},{:.9e},{:.9e}\n", r.count, r.cd_e4, r.f1));
    s
}

pub fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let data = load_data(&require(a.data, &cfg.paths.data, "--data")?)?;
    let test = data.pairs(true)?;
    if test.is_empty() {
        return Err(arg_err(format!("dataset has no {} clouds", SplitRole::TestIncomplete.as_str())));
    }
    let (validation, held_out) = split_validation(&test)?;
    let pairs = match a.split {
        EvalSplit::HeldOut => held_out,
        EvalSplit::Validation => validation,
        EvalSplit::All => test,
    };
    let metric = &cfg.training.metric;
    let report = match &a.checkpoint {
        None => {
            let inputs: Vec<(&[Point3], &PointCloud)> = pairs.iter().map(|(p, c)| (p.points.as_slice(), *c)).collect();
            evaluate_predictions(&inputs, metric)?
        }
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let gen = Generator::from_checkpoint(&ckpt)?;
            if a.config.is_some() {
                gen.encoder.check_same_layout(&init_params(Role::Encoder, &cfg.training.net, 0)?)?;
                gen.decoder.check_same_layout(&init_params(Role::Decoder, &cfg.training.net, 0)?)?;
                if !ckpt.check_digest(&cfg.digest()) {
                    warn!("checkpoint {} was trained with a different configuration", path.display());
                }
            }
            evaluate(&gen, &pairs, metric)?
        }
    };
    println!("count {}", report.count);
    println!("cd_e4 {:.4}", report.cd_e4);
    println!("f1 {:.4}", report.f1);
    if let Some(emd) = report.emd {
        println!("emd {emd:.6}");
    }
    println!("{:<10} {:>6} {:>12} {:>8}", "category", "count", "cd_e4", "f1");
    for (c, st) in &report.per_category {
        println!("{:<10} {:>6} {:>12.4} {:>8.4}", category_label(*c), st.count, st.cd_e4, st.f1);
    }
    if let Some(out) = &a.out {
        write_file(out, report_csv(&report))?;
    }
    Ok(())
}

pub fn degrade_cmd_config(a: &DegradeArgs, predicted_len: usize) -> anyhow::Result<DegradationConfig> {
    let mut cfg =
        DegradationConfig { method: a.method.parse()?, output_size: predicted_len, seed: a.seed, ..Default::default() };
    set(&mut cfg.k, a.k);
    set(&mut cfg.tau, a.tau);
    set(&mut cfg.voxel_resolution, a.resolution);
    set(&mut cfg.output_size, a.output_size);
    cfg.validate()?;
    Ok(cfg)
}

pub fn degrade(a: DegradeArgs) -> anyhow::Result<()> {
    let predicted = read_ply(&a.predicted)?;
    let partial = read_ply(&a.partial)?;
    let cfg = degrade_cmd_config(&a, predicted.len())?;
    let d = degradation::degrade(&predicted, &partial, &cfg)?;
    write_ply(&a.out, &d.cloud)?;
    println!(
        "selected {} of {} points{}",
        d.selection.len(),
        predicted.len(),
        if d.fallback { " (fallback)" } else { "" }
    );
    Ok(())
}

pub fn render(a: RenderArgs) -> anyhow::Result<()> {
    let view: View = a.view.parse()?;
    let is_pcb = a.cloud.extension().is_some_and(|e| e.eq_ignore_ascii_case("pcb"));
    let cloud = if is_pcb {
        let mut clouds = read_pcb(&a.cloud)?;
        if a.index >= clouds.len() {
            return Err(arg_err(format!("--index {} out of range ({} clouds)", a.index, clouds.len())));
        }
        clouds.swap_remove(a.index)
    } else {
        read_ply(&a.cloud)?
    };
    if a.size == 0 {
        return Err(arg_err("--size must be positive"));
    }
    write_file(&a.out, render_svg(&cloud.points, view, a.size))?;
    Ok(())
}

pub fn show_config(a: ShowConfigArgs) -> anyhow::Result<()> {
    let cfg = match (&a.preset, &a.config) {
        (Some(p), _) => RunConfig::preset(p)?,
        (None, path) => RunConfig::load_or_default(path.as_deref())?,
    };
    cfg.validate()?;
    print!("{}", cfg.to_toml());
    Ok(())
}
