use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tropic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tropic")).args(args).env_remove("TROPICAL_SEED").output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).expect("utf-8")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tropic-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn total(report: &str) -> u64 {
    let v: serde_json::Value = serde_json::from_str(report).unwrap();
    v["total"].as_u64().unwrap()
}

#[test]
fn nd_table() {
    assert_eq!(stdout(&tropic(&["nd", "--dmax", "1"])), "1: 1\n");
    let four = stdout(&tropic(&["nd", "--dmax", "4"]));
    assert!(four.lines().any(|l| l == "4: 620"));
    assert_eq!(stdout(&tropic(&["nd", "--dmax", "6"])), stdout(&tropic(&["nd", "--dmax", "6"])));
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&tropic(&["nd", "--dmax", "3", "--format", "json"]))).unwrap();
    assert_eq!(json[2]["n"], "12");
}

#[test]
fn nd_rejects_zero() {
    assert!(!tropic(&["nd", "--dmax", "0"]).status.success());
}

#[test]
fn count_lines_and_conics() {
    for seed in ["1", "2"] {
        assert_eq!(total(&stdout(&tropic(&["count", "-d", "1", "--seed", seed]))), 1);
        assert_eq!(total(&stdout(&tropic(&["count", "-d", "2", "--seed", seed]))), 1);
    }
}

#[test]
fn count_is_deterministic_and_reads_env_seed() {
    let a = stdout(&tropic(&["count", "-d", "2", "--seed", "11"]));
    let b = Command::new(env!("CARGO_BIN_EXE_tropic"))
        .args(["count", "-d", "2"])
        .env("TROPICAL_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(a, stdout(&b));
}

#[test]
fn count_without_seed_fails() {
    assert!(!tropic(&["count", "-d", "1"]).status.success());
}

#[test]
fn count_round_trips_a_configuration() {
    let dir = scratch("config");
    let report: serde_json::Value =
        serde_json::from_str(&stdout(&tropic(&["count", "-d", "2", "--seed", "5", "--ray", "B"]))).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, serde_json::to_string(&report["config"]).unwrap()).unwrap();
    let again = stdout(&tropic(&["count", "-d", "2", "--points", cfg.to_str().unwrap()]));
    assert_eq!(total(&again), 2);
    assert_eq!(report["total"], 2);
}

#[test]
fn count_of_cubics() {
    assert_eq!(total(&stdout(&tropic(&["--jobs", "2", "count", "-d", "3", "--seed", "1"]))), 12);
}

fn sample_line(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join(seed);
    stdout(&tropic(&["count", "-d", "1", "--seed", seed, "--curves", out.to_str().unwrap()]));
    out.join("curve_0.json")
}

#[test]
fn intersect_two_lines() {
    let dir = scratch("intersect");
    let (a, b) = (sample_line(&dir, "3"), sample_line(&dir, "4"));
    let out = stdout(&tropic(&["intersect", a.to_str().unwrap(), b.to_str().unwrap()]));
    assert_eq!(out.lines().last(), Some("total = 1"));
}

#[test]
fn intersect_with_itself_fails() {
    let dir = scratch("self");
    let a = sample_line(&dir, "3");
    assert!(!tropic(&["intersect", a.to_str().unwrap(), a.to_str().unwrap()]).status.success());
}

#[test]
fn render_line() {
    let dir = scratch("render");
    let line = sample_line(&dir, "3");
    let svg = dir.join("line.svg");
    stdout(&tropic(&["render", line.to_str().unwrap(), "--svg", svg.to_str().unwrap()]));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches(r#"class="ray""#).count(), 3);
    assert_eq!(text.matches(r#"class="mark""#).count(), 2);
}

#[test]
fn invariance_of_conics() {
    let out = stdout(&tropic(&["invariance", "-d", "2", "--trials", "1", "--seed", "2"]));
    assert_eq!(out.lines().last(), Some("degree = 2, invariant: yes"));
}
