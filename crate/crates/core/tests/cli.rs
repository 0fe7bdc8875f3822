use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("docs").join("golden").join(name)
}

fn rpslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpslab")).args(args).output().expect("binary runs")
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    rpslab(&args)
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("case.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_slice(&read(dir, name)).unwrap()
}

const UNIT_RADIUS: &str = r#"
[coefficients]
family = "complex_gaussian"
id = "unit"
sigma = { family = "constant", c = 1.0 }

[experiment]
name = "unit"
replicates = 20
base_seed = 1
measurement = "radius"
n_terms = 500
"#;

#[test]
fn theory_writes_characteristics_verdicts_and_manifest() {
    let out = TempDir::new().unwrap();
    let o = run("theory", &fixture("theory_planar.cfg"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(out.path(), "characteristics.json");
    assert_eq!(c["radius"], "inf");
    assert_eq!(c["order"], 2.0);
    assert_eq!(c["levin_type"], 0.5);
    assert_eq!(c["provenance"]["order"]["kind"], "analytic");
    let v = json(out.path(), "verdicts.json");
    assert_eq!(v["conditions"][0]["verdicts"][0]["verdict"], "converges");
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let out = TempDir::new().unwrap();
    assert_eq!(run("verify", &fixture("example36.cfg"), out.path(), &[]).status.code(), Some(0));
    let m = json(out.path(), "manifest.json");
    assert_eq!(m["subcommand"], "verify");
    assert_eq!(m["base_seed"], 36);
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["report.json", "replicates.csv"]);
    for f in files {
        let bytes = read(out.path(), f["name"].as_str().unwrap());
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"], bytes.len());
    }
    let cfg = std::fs::read(fixture("example36.cfg")).unwrap();
    assert_eq!(m["config_sha256"], hex::encode(Sha256::digest(&cfg)));
}

#[test]
fn manifest_is_written_last() {
    let out = TempDir::new().unwrap();
    run("verify", &fixture("example36.cfg"), out.path(), &[]);
    let modified = |n: &str| std::fs::metadata(out.path().join(n)).unwrap().modified().unwrap();
    assert!(modified("manifest.json") >= modified("report.json"));
    assert!(modified("manifest.json") >= modified("replicates.csv"));
}

#[test]
fn verify_exit_codes_follow_target_outcomes() {
    let out = TempDir::new().unwrap();
    let pass = run("verify", &fixture("example36.cfg"), out.path(), &["--workers", "2"]);
    assert_eq!(pass.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&pass.stdout).contains("[PASS] branch shares"));
    let fail = run("verify", &fixture("planar_order.cfg"), out.path(), &[]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("[FAIL]"));
}

#[test]
fn missing_family_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[sigma]\nalpha = 0.5\n");
    let o = run("theory", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("family"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run("theory", &dir.path().join("absent.cfg"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_point_grid_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"
[coefficients]
family = "deterministic"
id = "e"
sigma = { family = "factorial_power", alpha = 1.0 }

[sweep]
r_grid = [4.0]
seed = 1
"#,
    );
    assert_eq!(run("sweep", &cfg, &dir.path().join("out"), &[]).status.code(), Some(2));
}

#[test]
fn zero_tolerance_is_accepted_and_fails() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{UNIT_RADIUS}\n[[target]]\nname = \"exact\"\nprovenance = \"analytic\"\nkind = \"median\"\nexpected = 1.0\ntolerance = 0.0\n"
    );
    let cfg = write_config(&dir, &text);
    let o = run("verify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn replicate_errors_over_budget_exit_3() {
    // Every |xi_k| = 1 is skipped by the coefficient formula, so each replicate errors.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"
[coefficients]
family = "deterministic"
id = "ones"
sigma = { family = "constant", c = 1.0 }

[experiment]
name = "ones"
replicates = 10
base_seed = 0
measurement = "order_coefficient"
n_terms = 512
"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("verify", &cfg, &out, &[]).status.code(), Some(3));
    let report = json(&out, "report.json");
    assert_eq!(report["error_budget_exceeded"], true);
    assert_eq!(report["summary"]["errors"], 10);
}

#[test]
fn numerical_domain_error_exits_4() {
    // A finite radius admits no truncation plan at r = 4.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"
[coefficients]
family = "deterministic"
id = "geo"
sigma = { family = "geometric", a = 2.0 }

[sweep]
r_grid = [4.0, 5.0, 6.0]
seed = 1
"#,
    );
    assert_eq!(run("sweep", &cfg, &dir.path().join("out"), &[]).status.code(), Some(4));
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    let cfg = fixture("gaussian_radius.cfg");
    run("verify", &cfg, a.path(), &["--workers", "1"]);
    run("verify", &cfg, b.path(), &["--workers", "1"]);
    run("verify", &cfg, c.path(), &["--workers", "5"]);
    for name in ["report.json", "replicates.csv", "manifest.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
        assert_eq!(read(a.path(), name), read(c.path(), name), "{name}");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, UNIT_RADIUS);
    run("verify", &cfg, &dir.path().join("a"), &["--seed", "1"]);
    run("verify", &cfg, &dir.path().join("b"), &["--seed", "2"]);
    run("verify", &cfg, &dir.path().join("c"), &[]);
    let seeds = |d: &str| json(&dir.path().join(d), "report.json")["provenance"]["base_seed"].clone();
    assert_eq!(seeds("a"), 1);
    assert_eq!(seeds("b"), 2);
    assert_eq!(read(&dir.path().join("a"), "report.json"), read(&dir.path().join("c"), "report.json"));
    assert_ne!(read(&dir.path().join("a"), "report.json"), read(&dir.path().join("b"), "report.json"));
}

#[test]
fn format_flag_selects_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, UNIT_RADIUS);
    let json_only = dir.path().join("json");
    run("verify", &cfg, &json_only, &["--format", "json"]);
    assert!(json_only.join("report.json").exists());
    assert!(!json_only.join("replicates.csv").exists());
    let csv_only = dir.path().join("csv");
    run("sweep", &fixture("sweep_exponential.cfg"), &csv_only, &["--format", "csv"]);
    assert!(csv_only.join("sweep.csv").exists());
    assert!(!csv_only.join("sweep_fit.json").exists());
}

#[test]
fn sweep_tracks_the_exponential() {
    let out = TempDir::new().unwrap();
    assert_eq!(run("sweep", &fixture("sweep_exponential.cfg"), out.path(), &[]).status.code(), Some(0));
    let csv = String::from_utf8(read(out.path(), "sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "r,max_modulus,ln_max_modulus,ln_ln_max_modulus,fitted_ln_ln,n_used,tail_bound");
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[2] - cols[0]).abs() < 1e-9, "{line}");
    }
    let fit = json(out.path(), "sweep_fit.json");
    assert!((fit["type_fit"]["beta"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn goldens_match_fresh_output() {
    let out = TempDir::new().unwrap();
    run("theory", &fixture("theory_planar.cfg"), out.path(), &[]);
    for name in ["characteristics.json", "verdicts.json"] {
        assert_eq!(read(out.path(), name), std::fs::read(golden(name)).unwrap(), "{name}");
    }
    let out = TempDir::new().unwrap();
    run("verify", &fixture("gaussian_radius.cfg"), out.path(), &[]);
    for name in ["report.json", "replicates.csv"] {
        assert_eq!(read(out.path(), name), std::fs::read(golden(name)).unwrap(), "{name}");
    }
    let out = TempDir::new().unwrap();
    run("sweep", &fixture("sweep_planar.cfg"), out.path(), &[]);
    for name in ["sweep_fit.json", "sweep.csv"] {
        assert_eq!(read(out.path(), name), std::fs::read(golden(name)).unwrap(), "{name}");
    }
}

#[test]
fn help_lists_the_subcommands() {
    let o = rpslab(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["theory", "verify", "sweep"] {
        assert!(text.contains(sub));
    }
}
