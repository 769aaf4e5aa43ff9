use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stefan_core::output::{load_run, parse_manifest, verify_digests};

const SMALL: &str = r#"
N = 200
T = 0.4
dt = 1e-3
seed = 5
alpha = 1.0
beta = 1.0
store_jump_measures = true
snapshot_times = [0.0, 0.2]
snapshot_bins = 20

[[regions]]
name = "X"
pieces = [{ lo = 0.05, hi = 0.15, weight = 0.25 }, { lo = 0.60, hi = 1.00, weight = 0.75 }]

[[regions]]
name = "Y"
pieces = [{ lo = 0.10, hi = 0.30, weight = 1.0 }]
"#;

fn stefan(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stefan"));
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.output().expect("spawn stefan")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest_files(dir: &Path) -> Vec<stefan_core::output::FileDigest> {
    parse_manifest(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
        .unwrap()
        .files
}

#[test]
fn run_writes_verifiable_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("run");
    let o = stefan(&["run"], &[("--config", &cfg), ("--out", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "lambda.csv",
        "defaults.csv",
        "snapshots.csv",
        "jumps.csv",
        "manifest.json",
        "audit.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let stored = load_run(&out).unwrap();
    assert!(verify_digests(&out, &stored.manifest).unwrap().is_empty());
    assert_eq!(stored.manifest.seed, 5);
    assert_eq!(stored.manifest.config.particles, 200);
}

#[test]
fn same_seed_twice_gives_identical_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = stefan(
            &["run", "--seed", "0", "--scheme", "bridge"],
            &[("--config", &cfg), ("--out", out)],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(manifest_files(&a), manifest_files(&b));
    let c = tmp.path().join("c");
    stefan(
        &["run", "--seed", "1", "--scheme", "bridge"],
        &[("--config", &cfg), ("--out", &c)],
    );
    assert_ne!(manifest_files(&a), manifest_files(&c));
}

#[test]
fn empty_population_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", &SMALL.replace("N = 200", "N = 0"));
    let o = stefan(
        &["run"],
        &[("--config", &cfg), ("--out", &tmp.path().join("out"))],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.cfg"));
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stefan(
        &["run"],
        &[
            ("--config", &tmp.path().join("nope.cfg")),
            ("--out", &tmp.path().join("out")),
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.cfg",
        &SMALL.replace("dt = 1e-3", "dt = -1e-3"),
    );
    let o = stefan(
        &["run"],
        &[("--config", &cfg), ("--out", &tmp.path().join("out"))],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 4"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn zero_workers_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let o = stefan(
        &["run", "--workers", "0"],
        &[("--config", &cfg), ("--out", &tmp.path().join("out"))],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_with_one_population_has_no_convergence_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("sweep");
    let o = stefan(
        &["sweep", "--n-list", "100", "--seeds", "2"],
        &[("--config", &cfg), ("--out", &out)],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let conv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 1, "header only: {conv}");
    assert!(out.join("N100/seed5/manifest.json").is_file());
    assert!(out.join("N100/seed6/manifest.json").is_file());
}

#[test]
fn sweep_rejects_duplicate_populations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let o = stefan(
        &["sweep", "--n-list", "100,50,100"],
        &[("--config", &cfg), ("--out", &tmp.path().join("s"))],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_adjacent_pair_and_region() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("sweep");
    let o = stefan(
        &[
            "sweep",
            "--n-list",
            "50,100,200",
            "--seeds",
            "2",
            "--workers",
            "2",
        ],
        &[("--config", &cfg), ("--out", &out)],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("convergence.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][0], "50");
    assert_eq!(&rows[3][1], "200");
    for r in &rows {
        let m1: f64 = r[3].parse().unwrap();
        assert!(m1.is_finite() && m1 >= 0.0);
    }
}

#[test]
fn compare_writes_both_runs_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("cmp");
    let o = stefan(&["compare"], &[("--config", &cfg), ("--out", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "coupled/manifest.json",
        "decoupled/manifest.json",
        "paired_defaults.csv",
        "drift_overlay.csv",
        "comparison.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap())
            .unwrap();
    assert_eq!(report["default_violations"], 0);
    assert_eq!(report["drift_violations"], 0);
}

#[test]
fn diagnose_writes_cells_for_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("sweep");
    let o = stefan(
        &["sweep", "--seeds", "4"],
        &[("--config", &cfg), ("--out", &out)],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = stefan(&["diagnose", "--t", "0.1,0.2"], &[("--runs", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("oscillations.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 9);
}

#[test]
fn diagnose_without_runs_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stefan(&["diagnose"], &[("--runs", tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn audit_passes_and_needs_stored_measures() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("run");
    assert!(stefan(&["run"], &[("--config", &cfg), ("--out", &out)])
        .status
        .success());
    let o = stefan(&["audit"], &[("--runs", &out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let bare = write_config(
        tmp.path(),
        "bare.cfg",
        &SMALL.replace("store_jump_measures = true", "store_jump_measures = false"),
    );
    let out2 = tmp.path().join("bare");
    assert!(stefan(&["run"], &[("--config", &bare), ("--out", &out2)])
        .status
        .success());
    let o = stefan(&["audit"], &[("--runs", &out2)]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
