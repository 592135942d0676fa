mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use serde_json::Value;

fn htq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htq"))
        .args(args)
        .output()
        .expect("spawn htq")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

fn manifest_of(p: &Path) -> Value {
    let mut name = p.as_os_str().to_owned();
    name.push(".manifest.json");
    serde_json::from_slice(&std::fs::read(PathBuf::from(name)).unwrap()).unwrap()
}

#[test]
fn fit_bundled_dump() {
    let dump = bundled_dump_path();
    let first = htq(&["fit", path_str(&dump)]);
    let t = stdout_json(&first);
    let gamma = t["gamma"].as_f64().unwrap();
    assert!((3.98..=4.02).contains(&gamma), "{gamma}");
    assert_eq!(htq(&["fit", path_str(&dump)]).stdout, first.stdout);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tail.json");
    assert!(htq(&["fit", path_str(&dump), "--out", path_str(&out)]).status.success());
    let m = manifest_of(&out);
    assert_eq!(m["subcommand"], "fit");
    assert_eq!(m["config"]["quantile"], 0.9);
    assert_eq!(m["outputs"][0], path_str(&out));
}

#[test]
fn fit_rejects_all_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let zeros = dir.path().join("zeros.f32");
    std::fs::write(&zeros, vec![0u8; 4 * 1000]).unwrap();
    let out = htq(&["fit", path_str(&zeros)]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 3);
    assert_eq!(err["error"], "input");
    assert!(!err["message"].as_str().unwrap().is_empty());
}

#[test]
fn missing_file_and_bad_flags() {
    assert_eq!(htq(&["fit", "/nonexistent/dump.f32"]).status.code(), Some(3));
    let out = htq(&["solve", "--scheme", "uniform"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
    assert_eq!(htq(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(htq(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_closed_form() {
    let args = [
        "solve",
        "--scheme",
        "uniform",
        "--bits",
        "3",
        "--gamma",
        "4",
        "--rho",
        "0.1",
        "--g-min",
        "0.01",
        "--q-source",
        "unit",
    ];
    let r = stdout_json(&htq(&args));
    let oracle = 0.01 * 4.9f64.powf(1.0 / 3.0);
    let alpha = r["alpha"].as_f64().unwrap();
    assert!((alpha - oracle).abs() < 1e-12, "{alpha}");
    assert_eq!(r["converged"], true);
    assert_eq!(htq(&args).stdout, htq(&args).stdout);
}

#[test]
fn solve_reports_numerical_failure() {
    let out = htq(&[
        "solve", "--scheme", "uniform", "--bits", "1", "--gamma", "4", "--rho", "0.01", "--g-min", "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"], "numerical");
}

#[test]
fn bound_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = htq(&[
        "bound",
        "--gamma",
        "4",
        "--rho",
        "0.1",
        "--g-min",
        "0.01",
        "--sweep-bits",
        "2:5",
        "--csv",
        path_str(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "total_bound").unwrap();
    let totals: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(totals.len(), 4);
    assert!(totals.windows(2).all(|w| w[1] <= w[0]), "{totals:?}");
    assert!(manifest_of(&csv)["config"].is_object());
}

#[test]
fn quantize_then_dequantize() {
    let dir = tempfile::tempdir().unwrap();
    let input = bundled_dump_path();
    for scheme in ["tq", "tnq", "tbq", "qsgd", "nqsgd"] {
        let msg = dir.path().join(format!("{scheme}.htq"));
        let back = dir.path().join(format!("{scheme}.csv"));
        let q = stdout_json(&htq(&[
            "quantize",
            "--bits",
            "3",
            "--scheme",
            scheme,
            path_str(&input),
            path_str(&msg),
        ]));
        let alpha = q["alpha"].as_f64().unwrap();
        let bytes = std::fs::read(&msg).unwrap();
        assert_eq!(&bytes[..4], b"HTQ1");
        let header = if scheme == "tbq" { 24 } else { 16 };
        assert_eq!(bytes.len(), header + (DUMP_LEN * 3).div_ceil(8));
        assert!(manifest_of(&msg)["outputs"].is_array());

        let out = htq(&["dequantize", path_str(&msg), path_str(&back)]);
        assert!(
            out.status.success(),
            "{scheme}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let values: Vec<f64> = std::fs::read_to_string(&back)
            .unwrap()
            .lines()
            .filter_map(|l| l.trim().parse().ok())
            .collect();
        assert_eq!(values.len(), DUMP_LEN, "{scheme}");
        assert!(values.iter().all(|v| v.abs() <= alpha * (1.0 + 1e-6)), "{scheme}");

        let again = dir.path().join(format!("{scheme}-2.htq"));
        htq(&[
            "quantize",
            "--bits",
            "3",
            "--scheme",
            scheme,
            path_str(&input),
            path_str(&again),
        ]);
        assert_eq!(std::fs::read(&again).unwrap(), bytes, "{scheme}");
    }
}

#[test]
fn dequantize_needs_the_codebook_for_tnq() {
    let dir = tempfile::tempdir().unwrap();
    let msg = dir.path().join("m.htq");
    let out = htq(&[
        "quantize",
        "--bits",
        "3",
        "--scheme",
        "tnq",
        path_str(&bundled_dump_path()),
        path_str(&msg),
    ]);
    assert!(out.status.success());
    let mut sidecar = msg.as_os_str().to_owned();
    sidecar.push(".codebook.json");
    std::fs::remove_file(PathBuf::from(sidecar)).unwrap();
    let out = htq(&["dequantize", path_str(&msg), path_str(&dir.path().join("v.f32"))]);
    assert_eq!(out.status.code(), Some(3));
}

fn small_config(dir: &Path) -> PathBuf {
    let text = String::from_utf8(htq(&["config", "print-defaults", "--preset", "logistic"]).stdout).unwrap();
    let mut cfg: toml::Table = text.parse().unwrap();
    cfg["problem"]["rounds"] = toml::Value::Integer(15);
    let path = dir.join("sim.toml");
    std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn simulate_writes_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("m.jsonl");
    let run = |seed: &str| {
        let o = htq(&[
            "--seed",
            seed,
            "simulate",
            "--config",
            path_str(&cfg),
            "--out",
            path_str(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(&out).unwrap()
    };
    let first = run("9");
    assert_eq!(first.lines().count(), 16);
    let last: Value = serde_json::from_str(first.lines().last().unwrap()).unwrap();
    assert_eq!(last["summary"]["seed"], 9);
    let m = manifest_of(&out);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["problem"]["rounds"], 15);
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(run("9"), first);
    assert_ne!(run("10"), first);
}

#[test]
fn compare_emits_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cmp.csv");
    let trade = dir.path().join("trade.csv");
    let o = htq(&[
        "compare",
        "--config",
        path_str(&cfg),
        "--schemes",
        "dsgd,tqsgd,qsgd",
        "--bits",
        "2,4",
        "--out",
        path_str(&out),
        "--tradeoff",
        path_str(&trade),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "scheme,bits,round,loss,grad_norm_sq,cum_bytes"
    );
    // dsgd once, the two compressors at both widths
    assert_eq!(text.lines().count(), 1 + 5 * 15);
    assert_eq!(std::fs::read_to_string(&trade).unwrap().lines().count(), 1 + 5);
    assert!(manifest_of(&out)["config"].is_object());

    let bad = htq(&[
        "compare",
        "--config",
        path_str(&cfg),
        "--schemes",
        "dsgd,nope",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let ok = htq(&["verify", "holder"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.lines().any(|l| l.starts_with("PASS")));
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));

    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("slope.json");
    let slope = htq(&["verify", "slope", "--out", path_str(&report)]);
    assert_eq!(slope.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&slope.stdout)
        .lines()
        .any(|l| l.starts_with("FAIL")));
    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["suite"], "slope");
}

#[test]
fn print_defaults_parses_back() {
    for preset in ["quadratic", "moderate", "logistic"] {
        let out = htq(&["config", "print-defaults", "--preset", preset]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        heavytail::sim::SimConfig::from_toml(&text).unwrap();
    }
}
