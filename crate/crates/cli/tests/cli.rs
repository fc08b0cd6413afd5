use std::path::Path;
use std::process::{Command, Output};

fn gbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbt"))
        .args(args)
        .env("GBT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn short_config(dir: &Path) -> String {
    write_config(
        dir,
        r#"{"duration": 1.0, "target": {"kind": "case1"}, "output": {"snapshot_times": [0.5]}}"#,
    )
}

#[test]
fn run_writes_log_plots_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("run");
    let o = gbt(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    for f in [
        "baseline_plkf.csv",
        "baseline_pr.csv",
        "config.resolved.json",
        "summary.json",
        "plot_trajectory.svg",
        "plot_error.svg",
        "plot_snapshots.svg",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 10);
    assert!(o.stdout.is_empty());
}

#[test]
fn resolved_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = gbt(&[
        "run",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--seed",
        "3",
        "--quiet",
    ]);
    assert!(o.status.success());
    let resolved = a.join("config.resolved.json");
    let o = gbt(&[
        "run",
        "--config",
        resolved.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(a.join("records.csv")).unwrap(),
        std::fs::read(b.join("records.csv")).unwrap()
    );
}

#[test]
fn json_format_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("run");
    let o = gbt(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
        "--quiet",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("records.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 10);
}

#[test]
fn invalid_config_names_field_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"vehicle": {"mass": -1.0}}"#);
    let o = gbt(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vehicle.mass"));

    let cfg = write_config(dir.path(), r#"{"durration": 3}"#);
    let o = gbt(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("durration"));
}

#[test]
fn check_prints_table() {
    let o = gbt(&["check", "--quick"]);
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    for name in [
        "optimal bearing set",
        "UT moments",
        "GP oracle",
        "flatness round trip",
        "coverage",
    ] {
        let line = table.lines().find(|l| l.starts_with(name)).expect(name);
        assert!(line.contains("PASS"), "{line}");
    }
}

#[test]
fn sweep_writes_disjoint_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"duration": 0.5, "output": {"plots": false}}"#,
    );
    let out = dir.path().join("sweep");
    let o = gbt(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--kind",
        "ability",
        "--seeds",
        "2",
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("variants.json")).unwrap()).unwrap();
    assert_eq!(stats.as_array().unwrap().len(), 5);
    for v in ["scale_0.1", "scale_1", "direct"] {
        for s in 0..2 {
            assert!(out
                .join(v)
                .join(format!("seed_{s}"))
                .join("records.csv")
                .exists());
        }
    }
}

#[test]
fn compare_reports_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"duration": 0.5, "output": {"plots": false}}"#,
    );
    let out = dir.path().join("cmp");
    let o = gbt(&[
        "compare",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "2",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("plkf") && text.contains("gbt below pr"));
}
