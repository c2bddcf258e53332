#![allow(dead_code)]

use std::ffi::OsStr;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rapd_cli::RunConfig;
use rapd_core::nets::{DecoderArch, DiscriminatorArch, EncoderArch, NetConfig};

pub const POINTS: usize = 64;

/// Small enough that the whole pipeline runs in seconds.
pub fn tiny_config() -> RunConfig {
    let mut c = RunConfig::desk();
    c.num_points = POINTS;
    c.split.num_pairs = 12;
    c.split.paired_fraction = 0.25;
    c.split.num_test_pairs = 4;
    c.split.num_categories = 3;
    c.training.net = NetConfig {
        encoder: EncoderArch { point_widths: vec![8, 12], global_widths: vec![16, 8] },
        decoder: DecoderArch { hidden_widths: vec![16], num_points: POINTS },
        discriminator: DiscriminatorArch { point_widths: vec![6, 8], head_widths: vec![4] },
    };
    c.training.degradation.output_size = POINTS;
    c.training.stage1_epochs = 2;
    c.training.stage2_epochs = 3;
    c.training.batch_size = 4;
    c
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, cfg.to_toml()).unwrap();
    p
}

pub fn rapd_with<I, S>(workers: &str, args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_rapd"))
        .env("RAPD_WORKERS", workers)
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .unwrap()
}

/// Runs serially and panics with stderr on failure.
pub fn rapd<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    let out = rapd_with("0", args);
    assert!(out.status.success(), "rapd failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Names of files in `dir` whose bytes differ from the same file in `other`.
pub fn differing_files(dir: &Path, other: &Path) -> Vec<String> {
    let mut names: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    names
        .into_iter()
        .filter(|n| fs::read(dir.join(n)).ok() != fs::read(other.join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect()
}

/// gen-data, pretrain, distill (with periodic checkpoints) and eval into
/// `root/{data,prior,run,eval.csv}`.
pub fn run_pipeline(root: &Path, workers: &str) -> Vec<Output> {
    let cfg = write_config(root, &tiny_config());
    let s = |p: &str| root.join(p).into_os_string();
    let mut outs = Vec::new();
    let mut step = |args: Vec<std::ffi::OsString>| {
        let o = rapd_with(workers, &args);
        assert!(o.status.success(), "{:?}: {}", args, stderr(&o));
        outs.push(o);
    };
    step(vec!["gen-data".into(), "--config".into(), cfg.clone().into(), "--out".into(), s("data")]);
    step(vec![
        "pretrain".into(),
        "--config".into(),
        cfg.clone().into(),
        "--data".into(),
        s("data"),
        "--out".into(),
        s("prior"),
    ]);
    step(vec![
        "distill".into(),
        "--config".into(),
        cfg.clone().into(),
        "--data".into(),
        s("data"),
        "--prior".into(),
        root.join("prior").join("prior.rpdc").into(),
        "--out".into(),
        s("run"),
        "--checkpoint-every".into(),
        "1".into(),
    ]);
    step(vec![
        "eval".into(),
        "--config".into(),
        root.join("run").join("config.toml").into(),
        "--data".into(),
        s("data"),
        "--checkpoint".into(),
        root.join("run").join("best.rpdc").into(),
        "--out".into(),
        s("eval.csv"),
    ]);
    outs
}
