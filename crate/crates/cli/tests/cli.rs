mod common;

use std::fs;

use common::*;
use rapd_cli::RunConfig;
use rapd_core::dataio::{read_ply, write_ply, SplitRole};
use rapd_core::geometry::PointCloud;

#[test]
fn pipeline_is_byte_identical_across_runs_and_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let outs = run_pipeline(a.path(), "0");
    run_pipeline(b.path(), "3");
    for sub in ["data", "prior", "run"] {
        assert!(differing_files(&a.path().join(sub), &b.path().join(sub)).is_empty(), "{sub}");
    }
    assert_eq!(fs::read(a.path().join("eval.csv")).unwrap(), fs::read(b.path().join("eval.csv")).unwrap());

    let run = a.path().join("run");
    for f in ["best.rpdc", "last.rpdc", "metrics.csv", "config.toml", "epoch_0001.rpdc", "epoch_0003.rpdc"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(metrics.starts_with("epoch,loss_total,"));
    let eval_csv = fs::read_to_string(a.path().join("eval.csv")).unwrap();
    assert!(eval_csv.starts_with("category,count,cd_e4,f1\n"));
    assert!(eval_csv.lines().last().unwrap().starts_with("all,2,"));

    let gen_out = stdout(&outs[0]);
    assert!(gen_out.contains("paired_complete 3"), "{gen_out}");
    assert!(stdout(&outs[3]).contains("cd_e4"));
}

#[test]
fn gen_data_refuses_non_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("keep.txt"), "x").unwrap();
    let args = ["gen-data", "--num-pairs", "4", "--num-test-pairs", "2", "--num-points", "64", "--out"];
    let o = rapd_with(
        "0",
        args.iter().map(Into::into).chain([dir.path().as_os_str().to_owned()]).collect::<Vec<std::ffi::OsString>>(),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error: argument:"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let mut forced: Vec<std::ffi::OsString> = args.iter().map(Into::into).collect();
    forced.push(dir.path().into());
    forced.push("--force".into());
    rapd(forced);
    assert!(dir.path().join("clouds.pcb").exists());
}

#[test]
fn distill_requires_prior_unless_distillation_is_off() {
    let root = tempfile::tempdir().unwrap();
    let cfg = write_config(root.path(), &tiny_config());
    let data = root.path().join("data");
    rapd(["gen-data".as_ref(), "--config".as_ref(), cfg.as_os_str(), "--out".as_ref(), data.as_os_str()]);
    let base = |out: &str| -> Vec<std::ffi::OsString> {
        vec![
            "distill".into(),
            "--config".into(),
            cfg.clone().into(),
            "--data".into(),
            data.clone().into(),
            "--out".into(),
            root.path().join(out).into(),
        ]
    };
    let o = rapd_with("0", base("a"));
    assert!(stderr(&o).starts_with("error: argument:"), "{}", stderr(&o));

    let mut sup = base("sup");
    for f in ["--no-weight-distill-encoder", "--no-weight-distill-decoder", "--no-feature-distill", "--no-self-sup"] {
        sup.push(f.into());
    }
    rapd(sup);
    let metrics = fs::read_to_string(root.path().join("sup/metrics.csv")).unwrap();
    let row: Vec<&str> = metrics.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    assert_eq!(row.iter().filter(|v| v.is_empty()).count(), 5);
}

#[test]
fn eval_reports_mismatches_and_corruption() {
    let root = tempfile::tempdir().unwrap();
    run_pipeline(root.path(), "0");
    let data = root.path().join("data");
    let best = root.path().join("run/best.rpdc");

    let o = rapd_with(
        "0",
        [
            "eval".as_ref(),
            "--data".as_ref(),
            data.as_os_str(),
            "--identity".as_ref(),
            "--split".as_ref(),
            "all".as_ref(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("count 4"));

    let wide = write_config(root.path(), &RunConfig::desk());
    let o = rapd_with(
        "0",
        [
            "eval".as_ref(),
            "--data".as_ref(),
            data.as_os_str(),
            "--checkpoint".as_ref(),
            best.as_os_str(),
            "--config".as_ref(),
            wide.as_os_str(),
        ],
    );
    assert!(stderr(&o).starts_with("error: structural:"), "{}", stderr(&o));

    let mut bytes = fs::read(&best).unwrap();
    bytes.truncate(bytes.len() - 3);
    let bad = root.path().join("bad.rpdc");
    fs::write(&bad, bytes).unwrap();
    let o = rapd_with(
        "0",
        ["eval".as_ref(), "--data".as_ref(), data.as_os_str(), "--checkpoint".as_ref(), bad.as_os_str()],
    );
    assert!(stderr(&o).starts_with("error: format:"), "{}", stderr(&o));

    let o = rapd_with(
        "0",
        ["eval".as_ref(), "--data".as_ref(), root.path().join("nowhere").as_os_str(), "--identity".as_ref()],
    );
    assert!(stderr(&o).starts_with("error: io:"), "{}", stderr(&o));
}

#[test]
fn degrade_and_render_files() {
    let root = tempfile::tempdir().unwrap();
    let grid: Vec<[f64; 3]> =
        (0..64).map(|i| [(i % 4) as f64 * 0.2, ((i / 4) % 4) as f64 * 0.2, (i / 16) as f64 * 0.2]).collect();
    let predicted = PointCloud::new(grid.clone()).unwrap();
    let partial = PointCloud::new(grid[..8].to_vec()).unwrap();
    let (pp, qp, out) = (root.path().join("pred.ply"), root.path().join("part.ply"), root.path().join("deg.ply"));
    write_ply(&pp, &predicted).unwrap();
    write_ply(&qp, &partial).unwrap();
    let o = rapd([
        "degrade".as_ref(),
        "--predicted".as_ref(),
        pp.as_os_str(),
        "--partial".as_ref(),
        qp.as_os_str(),
        "--method".as_ref(),
        "tau_mask".as_ref(),
        "--tau".as_ref(),
        "0.01".as_ref(),
        "--out".as_ref(),
        out.as_os_str(),
    ]);
    assert!(stdout(&o).starts_with("selected 8 of 64"), "{}", stdout(&o));
    let degraded = read_ply(&out).unwrap();
    assert_eq!(degraded.len(), 64);
    assert!(degraded
        .points
        .iter()
        .all(|p| partial.points.iter().any(|q| (p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6)));

    let svg = root.path().join("a.svg");
    rapd([
        "render".as_ref(),
        "--cloud".as_ref(),
        pp.as_os_str(),
        "--out".as_ref(),
        svg.as_os_str(),
        "--view".as_ref(),
        "-x".as_ref(),
    ]);
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<circle").count(), 64);

    let o = rapd_with(
        "0",
        [
            "render".as_ref(),
            "--cloud".as_ref(),
            pp.as_os_str(),
            "--out".as_ref(),
            svg.as_os_str(),
            "--view".as_ref(),
            "up".as_ref(),
        ],
    );
    assert!(stderr(&o).starts_with("error: argument:"));
    let o = rapd_with(
        "0",
        [
            "degrade".as_ref(),
            "--predicted".as_ref(),
            pp.as_os_str(),
            "--partial".as_ref(),
            qp.as_os_str(),
            "--method".as_ref(),
            "blur".as_ref(),
            "--out".as_ref(),
            out.as_os_str(),
        ],
    );
    assert!(stderr(&o).starts_with("error: argument:"));
}

#[test]
fn show_config_prints_a_loadable_preset() {
    let o = rapd(["show-config", "--preset", "paper"]);
    assert_eq!(RunConfig::parse(&stdout(&o)).unwrap(), RunConfig::paper());
    let o = rapd_with("0", ["show-config", "--preset", "huge"]);
    assert!(stderr(&o).starts_with("error: argument:"));
}

#[test]
fn invalid_worker_count_is_rejected() {
    let o = rapd_with("many", ["show-config"]);
    assert!(stderr(&o).starts_with("error: argument:"));
}

#[test]
fn generated_roles_match_the_request() {
    let root = tempfile::tempdir().unwrap();
    let cfg = write_config(root.path(), &tiny_config());
    let data = root.path().join("d");
    let o = rapd(["gen-data".as_ref(), "--config".as_ref(), cfg.as_os_str(), "--out".as_ref(), data.as_os_str()]);
    let text = stdout(&o);
    for role in SplitRole::ALL {
        assert!(text.lines().any(|l| l.starts_with(role.as_str())), "{role:?}");
    }
    assert!(text.contains("test_complete 4"));
}
