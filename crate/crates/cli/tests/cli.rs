use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn afesi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afesi"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn afesi")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Simple LCG so the fixture does not depend on the library's generators.
struct Lcg(u64);

impl Lcg {
    fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    fn normal(&mut self) -> f64 {
        let (u, v) = (self.uniform(), self.uniform());
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

/// `y = signal(x) + N(0, 1)` with four feature columns.
fn write_csv(path: &Path, n: usize, seed: u64, signal: impl Fn(&[f64]) -> f64) {
    let mut rng = Lcg(seed);
    let mut text = String::from("x1,x2,x3,x4,y\n");
    for _ in 0..n {
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let y = signal(&x) + rng.normal();
        writeln!(text, "{},{},{},{},{}", x[0], x[1], x[2], x[3], y).unwrap();
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn test_command_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("data.csv"), 80, 1, |x| x[0].sin());
    let args = ["test", "data.csv", "--target", "y", "--seed", "7"];
    let a = ok(&afesi(&args, dir.path()));
    let b = ok(&afesi(&args, dir.path()));
    assert_eq!(a, b);
    let report: Value = serde_json::from_str(&a).unwrap();
    let results = report["results"].as_array().unwrap();
    assert!(!results.is_empty());
    for r in results {
        assert!(r["wall_time_s"].is_null());
        let p = r["p_selective"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    let methods: Vec<&str> = results.iter().map(|r| r["method"].as_str().unwrap()).collect();
    for m in ["proposed", "oc", "naive", "bonferroni"] {
        assert!(methods.contains(&m));
    }
}

#[test]
fn sigma_flag_changes_reported_variance() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("data.csv"), 60, 2, |x| x[1] * x[2]);
    let run = |sigma: &str| -> Vec<f64> {
        let out = ok(&afesi(
            &["test", "data.csv", "--target", "y", "--sigma", sigma, "--methods", "naive"],
            dir.path(),
        ));
        let v: Value = serde_json::from_str(&out).unwrap();
        v["results"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["sigma_eta_sq"].as_f64().unwrap())
            .collect()
    };
    let (identity, ar) = (run("identity"), run("ar:0.5"));
    assert!(!identity.is_empty() && !ar.is_empty());
    assert_ne!(identity, ar);
}

#[test]
fn planted_feature_beats_bonferroni() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("data.csv"), 150, 3, |x| 0.4 * x.iter().map(|v| v.sin()).sum::<f64>());
    let planted = ["sin(x1)", "sin(x2)", "sin(x3)", "sin(x4)"];
    let mut wins = 0;
    let mut matched = 0;
    for seed in 0..20 {
        let out = ok(&afesi(
            &[
                "test", "data.csv", "--target", "y", "--seed", &seed.to_string(),
                "--methods", "proposed,bonferroni",
            ],
            dir.path(),
        ));
        let v: Value = serde_json::from_str(&out).unwrap();
        let results = v["results"].as_array().unwrap();
        let Some(feature) = results
            .iter()
            .map(|r| r["feature"].as_str().unwrap())
            .find(|f| planted.contains(f))
        else {
            continue;
        };
        let p = |method: &str| {
            results
                .iter()
                .find(|r| r["method"] == method && r["feature"] == feature)
                .map(|r| r["p_selective"].as_f64().unwrap())
                .unwrap()
        };
        matched += 1;
        wins += (p("proposed") < p("bonferroni")) as usize;
    }
    assert!(wins >= 10, "proposed beat bonferroni in {wins} of 20 seeds ({matched} matched)");
}

#[test]
fn type1_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&afesi(
        &["type1", "--n", "100", "--m", "4", "--reps", "100", "--seed", "0", "--out", "res"],
        dir.path(),
    ));
    assert!(dir.path().join("res/records.csv").is_file());
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reps_run"], 100);
    for m in ["proposed", "oc", "naive", "bonferroni", "ds"] {
        assert!(out.lines().any(|l| l.starts_with(m)), "no summary line for {m}");
    }
}

#[test]
fn power_reports_matched_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&afesi(
        &["power", "--delta", "0.6", "--target-tests", "100", "--n", "150", "--out", "res"],
        dir.path(),
    ));
    let line = out.lines().find(|l| l.starts_with("matched tests")).expect("matched line");
    let achieved: usize = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(achieved >= 100, "{line}");
}

#[test]
fn records_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    for threads in ["1", "8"] {
        ok(&afesi(
            &["type1", "--reps", "60", "--threads", threads, "--out", &format!("t{threads}")],
            dir.path(),
        ));
    }
    let a = std::fs::read(dir.path().join("t1/records.csv")).unwrap();
    let b = std::fs::read(dir.path().join("t8/records.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_input_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = afesi(&["type1", "--bogus", "1"], dir.path());
    assert!(!out.status.success());

    std::fs::write(dir.path().join("bad.csv"), "x1,y\n1,2\nabc,3\n").unwrap();
    let out = afesi(&["test", "bad.csv", "--target", "y"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("x1"), "{err}");

    let out = afesi(&["type1", "--alpha", "1.5", "--out", "x"], dir.path());
    assert!(!out.status.success());
    assert!(!dir.path().join("x/records.csv").exists());
}

#[test]
fn realdata_runs_on_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("data.csv"), 300, 4, |x| (x[0].min(5.0)).exp().sin() + x[2]);
    let out = ok(&afesi(
        &[
            "realdata", "data.csv", "--target", "y", "--n", "60", "--reps", "10",
            "--methods", "proposed,ds", "--out", "rd",
        ],
        dir.path(),
    ));
    assert!(out.contains("proposed") && out.contains("ds"));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rd/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["spec"]["m"], 4);
}
