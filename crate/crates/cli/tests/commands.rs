use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_tmef");

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("tmef-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y"));
    lines.map(|l| l.parse().unwrap()).collect()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new("sim");
    let (a, b) = (dir.path("a.csv"), dir.path("b.csv"));
    for p in [&a, &b] {
        let o = run(&["simulate", "--model", "stable-ar1", "--alpha", "1.5", "--phi", "0.6", "--n", "1000", "--seed", "42", "--out", arg(p)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_csv(&a).len(), 1000);
}

#[test]
fn gamma_series_is_positive() {
    let dir = TempDir::new("gar");
    let p = dir.path("g.csv");
    let o = run(&["simulate", "--model", "gar1", "--alpha", "2", "--lambda", "1", "--nu", "3", "--n", "500", "--seed", "7", "--out", arg(&p)]);
    assert!(o.status.success());
    let ys = read_csv(&p);
    assert_eq!(ys.len(), 500);
    assert!(ys.iter().all(|&y| y > 0.0));
}

#[test]
fn exit_codes() {
    let bad = run(&["simulate", "--model", "gar1", "--alpha", "1", "--lambda", "2", "--nu", "3", "--n", "10"]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = run(&["simulate", "--model", "stable-ar1", "--alpha", "1.5", "--n", "10"]);
    assert_eq!(missing.status.code(), Some(2));
    let unwritable = run(&["simulate", "--model", "binary-markov", "--theta", "0.3", "--n", "10", "--out", "/nonexistent/dir/y.csv"]);
    assert_eq!(unwritable.status.code(), Some(1));
    let no_input = run(&["estimate", "--model", "binary-markov", "--input", "/nonexistent/y.csv"]);
    assert_eq!(no_input.status.code(), Some(1));

    let dir = TempDir::new("exit");
    let p = dir.path("y.csv");
    run(&["simulate", "--model", "stable-ar1", "--alpha", "1.5", "--phi", "0.6", "--n", "300", "--seed", "1", "--out", arg(&p)]);
    let o = run(&["estimate", "--model", "stable-ar1", "--alpha", "1.5", "--input", arg(&p), "--max-iter", "1", "--rel-tol", "1e-15"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["converged"], Value::Bool(false));
}

#[test]
fn stable_estimate_is_within_three_standard_errors() {
    let dir = TempDir::new("stable");
    let p = dir.path("y.csv");
    run(&["simulate", "--model", "stable-ar1", "--alpha", "1.5", "--phi", "0.6", "--n", "2000", "--seed", "42", "--out", arg(&p)]);
    let o = run(&["estimate", "--model", "stable-ar1", "--alpha", "1.5", "--input", arg(&p), "--k", "1"]);
    assert!(o.status.success());
    let v = json(&o);
    let phi = v["theta_hat"][0].as_f64().unwrap();
    let info = v["info_det"].as_f64().unwrap();
    assert!((phi - 0.6).abs() < 3.0 / info.sqrt(), "{phi}, info {info}");
    let eff = v["efficiency_vs_reference"].as_f64().unwrap();
    assert!((eff - 0.913).abs() < 2e-3, "{eff}");
}

#[test]
fn gaussian_moment_estimate_is_least_squares() {
    let dir = TempDir::new("gauss");
    let p = dir.path("y.csv");
    run(&["simulate", "--model", "gaussian-ar1", "--phi", "0.7", "--n", "400", "--seed", "3", "--out", arg(&p)]);
    let o = run(&["estimate", "--model", "gaussian-ar1", "--input", arg(&p), "--kernel", "moment", "--k", "1"]);
    assert!(o.status.success());
    let phi = json(&o)["theta_hat"][0].as_f64().unwrap();
    let y = read_csv(&p);
    let (num, den) = y.windows(2).fold((0.0, 0.0), |(a, b), w| (a + w[0] * w[1], b + w[0] * w[0]));
    assert!((phi - num / den).abs() < 1e-8);
}

#[test]
fn gamma_moment_points_recover_parameters() {
    let dir = TempDir::new("garest");
    let p = dir.path("g.csv");
    run(&["simulate", "--model", "gar1", "--alpha", "2", "--lambda", "1", "--nu", "3", "--n", "2000", "--seed", "7", "--out", arg(&p)]);
    let o = run(&["estimate", "--model", "gar1", "--input", arg(&p), "--kernel", "moment", "--points", "1,2"]);
    assert!(o.status.success());
    let v = json(&o);
    for (i, truth) in [1.0, 2.0, 3.0].iter().enumerate() {
        let e = v["theta_hat"][i].as_f64().unwrap();
        assert!((e - truth).abs() < 0.15 * truth, "{}", v["theta_hat"]);
    }
    assert_eq!(v["efficiency_vs_reference"], Value::Null);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = TempDir::new("cfg");
    let cfg = dir.path("run.cfg");
    std::fs::write(&cfg, "model = binary-markov\ntheta = 0.3\nn = 50\nseed = 1\n").unwrap();
    let a = run(&["simulate", "--config", arg(&cfg)]);
    let b = run(&["simulate", "--config", arg(&cfg), "--n", "20"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout.iter().filter(|&&c| c == b'\n').count(), 51);
    assert_eq!(b.stdout.iter().filter(|&&c| c == b'\n').count(), 21);
}

#[test]
fn info_curves() {
    let out = run(&["info-curve", "--model", "stable-ar1", "--alpha", "2", "--grid", "50"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((values[0] - 0.5).abs() < 1e-6);
    assert!(values.windows(2).all(|w| w[1] < w[0]));

    let out = run(&["info-curve", "--model", "stable-ar1", "--alpha", "1.0", "--window", "0.7,0.9", "--grid", "201"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let (t, v) = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .fold((0.0, f64::MIN), |best, p| if p.1 > best.1 { p } else { best });
    assert!((t - 0.7968).abs() < 2e-3 && (v - 0.324).abs() < 1e-3, "{t} {v}");

    let one = run(&["info-curve", "--model", "stable-ar1", "--alpha", "1.5", "--grid", "1"]);
    assert_eq!(String::from_utf8(one.stdout).unwrap().lines().count(), 2);
}

#[test]
fn table_rows() {
    let out = run(&["table1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = |alpha: &str| -> Vec<f64> {
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(alpha)).unwrap();
        line.split_whitespace().take(5).map(|x| x.parse().unwrap()).collect()
    };
    let r = row("1.7");
    assert!((r[1] - 0.4767).abs() < 5e-4 && (r[2] - 0.428).abs() < 1e-3 && (r[4] - 0.968).abs() < 1e-3);
    let r = row("2.0");
    assert!((r[2] - 0.5).abs() < 1e-9 && (r[4] - 1.0).abs() < 1e-9);
    let r = row("1.3");
    assert!((r[1] - 0.6087).abs() < 5e-4 && (r[2] - 0.358).abs() < 1e-3 && (r[4] - 0.831).abs() < 1e-3);
}

#[test]
fn select_points_reports_a_monotone_trace() {
    let dir = TempDir::new("sel");
    let p = dir.path("y.csv");
    run(&["simulate", "--model", "stable-ar1", "--alpha", "1.3", "--phi", "0.5", "--n", "500", "--seed", "9", "--out", arg(&p)]);
    let o = run(&["select-points", "--model", "stable-ar1", "--alpha", "1.3", "--input", arg(&p), "--k", "3", "--gain-tol", "0"]);
    assert!(o.status.success());
    let v = json(&o);
    let infos: Vec<f64> = v["trace"]["entries"].as_array().unwrap().iter().map(|e| e["info"].as_f64().unwrap()).collect();
    assert_eq!(infos.len(), 3);
    assert!(infos.windows(2).all(|w| w[1] >= w[0]));
}
