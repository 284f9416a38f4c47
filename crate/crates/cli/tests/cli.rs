use std::path::Path;
use std::process::{Command, Output};

use kfcs::harness::{ExperimentConfig, CSV_HEADER};
use kfcs::sensing::{generate_gaussian_matrix, rip_constant, roc_constant};
use kfcs::stability::detection_delay_from_bstar;

fn kfcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfcs")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &str = r#"
model = "random_walk"
m = 40
n = 20
n0 = 30
horizon = 10
s0 = 3
sa = 1
sr = 1
d = 4
smax = 5
noise_scale = 0.05
lambda = 0.15
alpha = 0.3
alpha_del = 0.1
trials = 4
seed = 5
roster = ["kfcs", "lscs", "cs", "genie_kf", "genie_ls"]
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn rip_prints_constants() {
    let o = kfcs(&["rip", "--n", "6", "--m", "12", "--seed", "3", "--order", "2", "--order2", "3"]);
    assert!(o.status.success());
    let lines: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    let a = generate_gaussian_matrix(6, 12, 3);
    assert_eq!(lines, vec![rip_constant(&a, 2).unwrap().delta, roc_constant(&a, 2, 3).unwrap().theta]);
}

#[test]
fn tau_det_prints_integer() {
    let o = kfcs(&["analyze", "tau-det", "--eps", "0.1", "--s", "2", "--bstar", "0.5", "--sigma-sys2", "0.2"]);
    assert!(o.status.success());
    let expect = detection_delay_from_bstar(0.1, 2, 0.5, 0.2).unwrap();
    assert_eq!(stdout(&o).trim(), expect.to_string());
    let bad = kfcs(&["analyze", "tau-det", "--eps", "1.5", "--s", "2", "--bstar", "0.5", "--sigma-sys2", "0.2"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn simulate_writes_csv_and_manifest_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("res");
    let o = kfcs(&[
        "simulate",
        "--config",
        &cfg,
        "--trials",
        "3",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
        "--save-trajectory",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(csv.lines().count(), 1 + 11 * 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trials"], 3);
    assert_eq!(manifest["master_seed"], 9);
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t,index,value");
    assert!(out.join("trajectory.events.json").exists());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        assert!(kfcs(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
        runs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(kfcs(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    let unknown = write_config(dir.path(), "m = 40\nbogus_key = 3\n");
    assert_eq!(kfcs(&["simulate", "--config", &unknown]).status.code(), Some(1));

    let invalid = write_config(dir.path(), "m = 40\nsmax = 80\n");
    assert_eq!(kfcs(&["simulate", "--config", &invalid]).status.code(), Some(1));

    assert_eq!(kfcs(&["simulate"]).status.code(), Some(1));
    assert_eq!(kfcs(&["--help"]).status.code(), Some(0));

    // Output directory that cannot be created: its parent is a regular file.
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    assert_eq!(kfcs(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bounds_csv_for_small_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = kfcs(&["analyze", "bounds", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,a,b,delta,theta,T1,beta_T_bound");
    let parsed = ExperimentConfig::from_toml_str(SMALL).unwrap();
    assert_eq!(lines.count(), parsed.horizon);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
    let o = kfcs(&["analyze", "bounds", "--config", dir.join("small_bounds.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
