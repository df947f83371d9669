use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynavis::synth::presets;

fn dynavis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynavis")).args(args).output().expect("spawn dynavis")
}

fn ok(args: &[&str]) -> Output {
    let o = dynavis(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A short walker sequence rendered through `synth --spec`.
fn walker_seq(dir: &Path, frames: usize) -> PathBuf {
    let mut spec = presets::constant_walker();
    spec.frames = frames;
    let scene = dir.join("scene.txt");
    std::fs::write(&scene, spec.to_text()).unwrap();
    let seq = dir.join("seq");
    ok(&["synth", "--spec", s(&scene), "--out", s(&seq)]);
    seq
}

#[test]
fn synth_run_eval_map() {
    let dir = tempfile::tempdir().unwrap();
    let seq = walker_seq(dir.path(), 8);
    let p = |n: &str| dir.path().join(n);
    ok(&[
        "run", "--seq", s(&seq), "--out-traj", s(&p("t.txt")), "--diag", s(&p("d.txt")), "--feedback", s(&p("f.txt")), "--timing",
        s(&p("tm.txt")), "--keyframes", s(&p("k.txt")),
    ]);
    let traj = std::fs::read_to_string(p("t.txt")).unwrap();
    assert_eq!(traj.lines().filter(|l| !l.starts_with('#')).count(), 8);
    let diag = std::fs::read_to_string(p("d.txt")).unwrap();
    assert!(diag.starts_with("# frame track_id class dynamic speed_mps depth_m bearing_deg n_points"));
    assert!(diag.lines().skip(1).all(|l| l.split_whitespace().count() == 10));
    let fb = std::fs::read_to_string(p("f.txt")).unwrap();
    assert!(fb.lines().all(|l| l.starts_with("frame=") && l.contains(" msg=\"") && (l.ends_with("risk=0") || l.ends_with("risk=1"))));
    assert!(fb.contains("One person on"));
    let timing = std::fs::read_to_string(p("tm.txt")).unwrap();
    for stage in ["ego", "flow", "dynamic", "feedback", "frame", "fps"] {
        assert!(timing.lines().any(|l| l.starts_with(stage)), "{stage}");
    }

    let e = ok(&["eval", "--est", s(&p("t.txt")), "--gt", s(&seq.join("groundtruth.txt"))]);
    let report = String::from_utf8(e.stdout).unwrap();
    let ate: f64 = report.lines().next().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(ate < 0.01, "{report}");
    assert!(report.contains("matched 8"));

    ok(&["map", "--seq", s(&seq), "--keyframes", s(&p("k.txt")), "--cloud", s(&p("c.txt")), "--octree", s(&p("o.txt"))]);
    let oct = std::fs::read_to_string(p("o.txt")).unwrap();
    assert!(oct.starts_with("resolution 0.05\n"));
    assert!(oct.lines().count() > 100);
    ok(&[
        "map", "--seq", s(&seq), "--keyframes", s(&p("k.txt")), "--resolution", "0.1", "--keep-dynamic", "--cloud", s(&p("c2.txt")),
        "--octree", s(&p("o2.txt")),
    ]);
    assert!(std::fs::read_to_string(p("o2.txt")).unwrap().starts_with("resolution 0.1\n"));
}

#[test]
fn baseline_mode_reports_no_objects() {
    let dir = tempfile::tempdir().unwrap();
    let seq = walker_seq(dir.path(), 3);
    let d = dir.path().join("d.txt");
    ok(&["run", "--seq", s(&seq), "--mode", "baseline", "--out-traj", s(&dir.path().join("t.txt")), "--diag", s(&d)]);
    assert_eq!(std::fs::read_to_string(d).unwrap().lines().count(), 1);
}

#[test]
fn lost_tracking_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let seq = walker_seq(dir.path(), 4);
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "# demand more inliers than features exist\npnp.min_inliers=100000\n").unwrap();
    let o = dynavis(&["run", "--seq", s(&seq), "--config", s(&cfg), "--out-traj", s(&dir.path().join("t.txt"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    // The trajectory is still written.
    assert!(dir.path().join("t.txt").exists());
}

#[test]
fn bad_inputs_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "feature.n_feature=10\n").unwrap();
    let o = dynavis(&["run", "--seq", s(dir.path()), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("c.cfg:1") && err.contains("feature.n_feature"), "{err}");

    let o = dynavis(&["run", "--seq", s(&dir.path().join("missing"))]);
    assert_eq!(o.status.code(), Some(1));
    let o = dynavis(&["synth", "--preset", "nothing", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("static_room"));
    let o = dynavis(&["eval", "--est", s(&cfg), "--gt", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let est = dir.path().join("est.txt");
    let gt = dir.path().join("gt.txt");
    std::fs::write(&est, "0.0 0 0 0 0 0 0 1\n0.1 0 0 0 0 0 0 1\n0.2 0 0 0 0 0 0 1\n").unwrap();
    std::fs::write(&gt, "50.0 0 0 0 0 0 0 1\n50.1 0 0 0 0 0 0 1\n50.2 0 0 0 0 0 0 1\n").unwrap();
    let o = dynavis(&["eval", "--est", s(&est), "--gt", s(&gt)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no associations"));
    let o = dynavis(&["eval", "--est", s(&est), "--gt", s(&est)]);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ATE_RMSE m 0.000000\n"));
    let o = dynavis(&["map", "--seq", s(dir.path()), "--keyframes", s(&est)]);
    assert_eq!(o.status.code(), Some(1));
    let o = dynavis(&["run", "--seq", s(dir.path()), "--mode", "fast"]);
    assert!(!o.status.success());
}
