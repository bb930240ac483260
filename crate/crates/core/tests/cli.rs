use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voronoi-area"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn alpha_of(v: &Value) -> Vec<f64> {
    v["alpha"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn fit_example_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "fit",
        "--config",
        config("example1.toml").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fit = json(&dir.path().join("fit.json"));
    for (a, e) in alpha_of(&fit).iter().zip([0.48, 0.10, 0.145, 0.275]) {
        assert!((a - e).abs() <= 0.02);
    }
    assert_eq!(fit["converged"], Value::Bool(true));
    assert_eq!(fit["m"].as_f64(), Some(1.75));
}

#[test]
fn fit_single_scale_is_trivial() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "k1.toml",
        "[model]\nscales = [1.0]\n[fit]\ny_targets = [0.5, 1.0, 2.0]\nm = 1.5\n",
    );
    let o = run(&[
        "fit",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(alpha_of(&json(&dir.path().join("fit.json"))), vec![1.0]);
}

#[test]
fn fit_rejects_negative_exponent_with_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "neg.toml",
        "[model]\nscales = [1.0, 0.5]\n\n[fit]\ny_targets = [0.5, 1.0]\nm = -1.0\n",
    );
    let o = run(&[
        "fit",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 6") && err.contains("m"), "{err}");
}

#[test]
fn fit_reports_nonconvergence() {
    let dir = TempDir::new().unwrap();
    let src = fs::read_to_string(config("example1.toml")).unwrap()
        + "\n[fit.solver]\nmax_iterations = 1\nrandom_starts = 0\n";
    let cfg = write(dir.path(), "capped.toml", &src);
    let o = run(&[
        "fit",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("converge"));
    assert_eq!(
        json(&dir.path().join("fit.json"))["converged"],
        Value::Bool(false)
    );
}

#[test]
fn malformed_config_is_line_anchored() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[model]\nscales = [1.0]\ncolour = 3\n",
    );
    let o = run(&["fit", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn generate_is_byte_identical_and_counts_points() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "one.toml",
        "[model]\nscales = [1.0]\n[generate]\nwidth = 60.0\nheight = 60.0\ngrid_nx = 10\ngrid_ny = 10\nseed = 4\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "--threads",
            threads,
            "generate",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["points.csv", "points.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let n = fs::read_to_string(a.join("points.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert!((n as f64 - 3600.0).abs() <= 180.0, "{n}");
    let manifest = json(&a.join("points.json"));
    assert_eq!(manifest["seed"].as_u64(), Some(4));
    assert_eq!(manifest["num_points"].as_u64(), Some(n as u64));

    let c = dir.path().join("c");
    run(&[
        "generate",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_ne!(
        fs::read(a.join("points.csv")).unwrap(),
        fs::read(c.join("points.csv")).unwrap()
    );
}

#[test]
fn generate_example_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let alpha = write(
        dir.path(),
        "alpha.json",
        r#"{"alpha": [0.48, 0.10, 0.145, 0.275]}"#,
    );
    let o = run(&[
        "generate",
        "--config",
        config("example1.toml").to_str().unwrap(),
        "--alpha",
        &alpha,
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = json(&dir.path().join("points.json"));
    assert_eq!(m["subdomain_counts"], serde_json::json!([192, 40, 58, 110]));
    assert!(m["adjacency_penalty"].as_f64().unwrap() >= 0.0);
}

#[test]
fn generate_rejects_mismatched_alpha() {
    let dir = TempDir::new().unwrap();
    let alpha = write(dir.path(), "alpha.json", r#"{"alpha": [0.5, 0.5]}"#);
    let o = run(&[
        "generate",
        "--config",
        config("example1.toml").to_str().unwrap(),
        "--alpha",
        &alpha,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn tessellate_single_point_and_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("one");
    let pts = write(dir.path(), "one.csv", "x,y,label\n1.5,0.5,0\n");
    let o = run(&[
        "tessellate",
        "--points",
        &pts,
        "--width",
        "3",
        "--height",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cells = json(&out.join("cells.json"));
    assert_eq!(cells["cells"].as_array().unwrap().len(), 1);
    assert_eq!(cells["cells"][0]["area"].as_f64(), Some(6.0));
    assert_eq!(cells["cells"][0]["vertices"].as_array().unwrap().len(), 4);
    assert!(fs::read_to_string(out.join("cells.svg"))
        .unwrap()
        .contains("<polygon"));

    // One interior-free cell: analysis warns but still writes its outputs.
    let o = run(&[
        "analyze",
        "--cells",
        out.join("cells.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(out.join("analysis.json").exists() && out.join("histogram.csv").exists());

    let dup = write(dir.path(), "dup.csv", "x,y,label\n1,1,0\n2,1,0\n1,1,0\n");
    let o = run(&[
        "tessellate",
        "--points",
        &dup,
        "--width",
        "3",
        "--height",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("0~2"), "{}", stderr(&o));

    let bad = write(dir.path(), "bad.csv", "x,y,label\n1,1,0\n2,1,0\n1,oops,0\n");
    let o = run(&[
        "tessellate",
        "--points",
        &bad,
        "--width",
        "3",
        "--height",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 4"), "{}", stderr(&o));

    let o = run(&["tessellate", "--points", &pts]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fifty_point_conservation() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("x,y,label\n");
    for i in 0..50u64 {
        let x = ((i * 7919) % 997) as f64 / 997.0 * 5.0;
        let y = ((i * 104_729) % 991) as f64 / 991.0 * 4.0;
        csv.push_str(&format!("{x},{y},0\n"));
    }
    let pts = write(dir.path(), "pts.csv", &csv);
    let o = run(&[
        "tessellate",
        "--points",
        &pts,
        "--width",
        "5",
        "--height",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cells = json(&dir.path().join("cells.json"));
    assert!(cells["relative_area_error"].as_f64().unwrap() < 1e-9);
    let sum: f64 = cells["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["area"].as_f64().unwrap())
        .sum();
    assert!((sum - 20.0).abs() < 20.0 * 1e-9);
}

#[test]
fn pipeline_runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = config("example1.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = run(&[
            "--threads",
            threads,
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let manifest = json(&a.join("manifest.json"));
    let stages: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["fit", "generate", "tessellate", "analyze"]);
    assert_eq!(manifest["exit_code"].as_i64(), Some(0));
    for f in [
        "fit.json",
        "points.csv",
        "points.json",
        "cells.json",
        "cells.svg",
        "histogram.csv",
        "analysis.json",
        "distribution.svg",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let analysis = json(&a.join("analysis.json"));
    assert_eq!(analysis["target_slope"].as_f64(), Some(-1.75));
    assert!(analysis["comparison"].is_array());
}

#[test]
fn pipeline_example_two_alpha() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "pipeline",
        "--config",
        config("example2.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        o.status.code() == Some(0) || o.status.code() == Some(2),
        "{}",
        stderr(&o)
    );
    let alpha = alpha_of(&json(&dir.path().join("fit.json")));
    for (a, e) in alpha.iter().zip([0.50, 0.04, 0.19, 0.11, 0.16]) {
        assert!((a - e).abs() <= 0.02, "{alpha:?}");
    }
}

#[test]
fn pipeline_stops_at_first_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "nogen.toml",
        "[model]\nscales = [1.0, 0.5]\n[fit]\ny_targets = [0.3, 0.5, 1.0]\nm = 1.5\n",
    );
    let out = dir.path().join("run");
    let o = run(&["pipeline", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let manifest = json(&out.join("manifest.json"));
    let stages = manifest["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 2);
    assert_eq!(stages[1]["exit_code"].as_i64(), Some(1));
    assert_eq!(manifest["exit_code"].as_i64(), Some(1));
}

#[test]
fn exclude_boundary_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = config("example1.toml");
    for (flag, name) in [("true", "t"), ("false", "f")] {
        let out = dir.path().join(name);
        let o = run(&[
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--exclude-boundary",
            flag,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let t = json(&dir.path().join("t/analysis.json"));
    let f = json(&dir.path().join("f/analysis.json"));
    assert_eq!(t["exclude_boundary"], Value::Bool(true));
    assert_eq!(f["exclude_boundary"], Value::Bool(false));
    assert!(f["included_cells"].as_u64() > t["included_cells"].as_u64());
    assert_eq!(f["included_cells"], f["total_cells"]);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["fit"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
