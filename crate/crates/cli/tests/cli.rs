use std::path::Path;
use std::process::{Command, Output};

fn labelrl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelrl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn synth_eval_replay_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = labelrl(&["synth", "--kind", "crossing_pair", "--count", "3", "--first", "1000", "--out", "scenes"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = labelrl(&["eval", "--controller", "none,force", "--scenes", "scenes/*.json", "--out", "eval"], d);
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("none") && table.contains("force"));
    let csv = std::fs::read_to_string(d.join("eval/metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("method,scene,occ,int,dist"));
    assert_eq!(csv.lines().count(), 7);

    let scene = "scenes/crossing_pair_1000.json";
    let out = labelrl(&["replay", "--scene", scene, "--out", "replay.jsonl"], d);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(d.join("replay.jsonl")).unwrap().lines().count(), 151);

    labelrl_core::policy::ActorCritic::<f32>::new(1).save(&d.join("p.ckpt")).unwrap();
    let out = labelrl(&["heatmap", "--checkpoint", "p.ckpt", "--scene", scene, "--step", "40", "--out", "h.csv"], d);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(d.join("h.csv")).unwrap().lines().count(), 30);

    let out = labelrl(&["heatmap", "--checkpoint", "p.ckpt", "--scene", scene, "--step", "151", "--out", "h.csv"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(labelrl(&["frobnicate"], d).status.code(), Some(1));
    assert_eq!(labelrl(&["eval", "--controller", "rl", "--scenes", "*.json"], d).status.code(), Some(1));
    std::fs::write(d.join("bad.toml"), "[ppo]\nbogus = 1\n").unwrap();
    assert_eq!(labelrl(&["--config", "bad.toml", "eval", "--scenes", "*.json"], d).status.code(), Some(1));
    assert_eq!(labelrl(&["--help"], d).status.code(), Some(0));
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = labelrl(&["train", "--data", "nowhere", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let desk = labelrl_core::harness::RunConfig::load(&dir.join("desk.toml")).unwrap();
    assert_eq!(desk, labelrl_core::harness::RunConfig::default());
    let full = labelrl_core::harness::RunConfig::load(&dir.join("full_scale.toml")).unwrap();
    assert_eq!(full.curriculum.stages(), 5);
    assert_eq!(full.ppo.total_steps, 20_000_000);
}
