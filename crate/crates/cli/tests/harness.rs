use std::path::Path;
use std::process::Command;

use conga_cli::{run_experiment, ExperimentConfig, HarnessError, Kind, Mask};

fn body(csv: &str) -> String {
    csv.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn small(kind: Kind) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.cells = vec![2, 3];
    c.degrees = vec![2];
    c.eigen_count = 8;
    c
}

#[test]
fn repeated_runs_are_byte_identical() {
    for kind in [Kind::SourceConvergence, Kind::EigenStudy, Kind::Verify, Kind::DecomposeDemo] {
        let c = small(kind);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.csv, b.csv, "{kind:?}");
        assert_eq!(a.json["rows"], b.json["rows"], "{kind:?}");
    }
}

#[test]
fn csv_echoes_config_and_hashes() {
    let c = small(Kind::SourceConvergence);
    let out = run_experiment(&c).unwrap();
    let lines: Vec<&str> = out.csv.lines().collect();
    assert_eq!(lines[0], "# conga-hodge convergence");
    let echoed: ExperimentConfig = serde_json::from_str(lines[1].strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(echoed, c);
    assert_eq!(lines.iter().filter(|l| l.starts_with("# grid_hash")).count(), 2);
    assert_eq!(body(&out.csv).lines().count(), 1 + 2);
}

#[test]
fn annulus_has_one_harmonic_field() {
    let mut c = small(Kind::Verify);
    c.mask = Mask::Annulus;
    c.cells = vec![3];
    let out = run_experiment(&c).unwrap();
    assert!(out.passed, "{}", out.csv);
    assert!(out.csv.contains("2,3,harmonic_dimension,1.0,1.0,true"));
}

#[test]
fn corrupted_curl_fails_verification() {
    let mut c = small(Kind::Verify);
    assert!(run_experiment(&c).unwrap().passed);
    c.corrupt_d1 = true;
    let out = run_experiment(&c).unwrap();
    assert!(!out.passed);
    let failed: Vec<&str> =
        out.json["failed"].as_array().unwrap().iter().map(|f| f["property"].as_str().unwrap()).collect();
    assert!(failed.contains(&"complex_D1D0") && failed.contains(&"commuting_curl"));
}

#[test]
fn zero_penalty_eigen_study_skips_the_jump_nullspace() {
    let mut c = small(Kind::EigenStudy);
    c.cells = vec![2];
    c.alphas = "zero".parse().map(|a| vec![a]).unwrap();
    let out = run_experiment(&c).unwrap();
    let spectra = &out.json["spectra"][0];
    assert!(spectra["nullspace"]["nullity"].as_u64().unwrap() > 0);
    let first: f64 = body(&out.csv).lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!(first > 0.1, "first eigenvalue {first}");
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = small(Kind::Verify);
    c.cells = vec![0];
    assert!(matches!(run_experiment(&c), Err(HarnessError::Config(_))));
    assert_eq!(HarnessError::Config(String::new()).exit_code(), 2);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conga-hodge"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn cli_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = write(dir.path(), "good.json", r#"{"kind": "verify", "K": [2], "p": [1]}"#);
    let status = bin().args(["verify", "--config"]).arg(&good).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let status = bin().args(["verify", "--corrupt-d1", "--config"]).arg(&good).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let files: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 4);

    let bad = write(dir.path(), "bad.json", r#"{"kind": "verify", "K": [2], "colour": "red"}"#);
    let status = bin().args(["verify", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = bin().args(["eigen", "--config"]).arg(&good).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = bin().args(["verify", "--alpha", "const:-3"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_csv_bodies_match_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind": "source-convergence", "K": [2, 4], "p": [1, 2]}"#);
    for _ in 0..2 {
        let status = bin().args(["convergence", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).status().unwrap();
        assert!(status.success());
    }
    let mut csvs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    csvs.sort();
    assert_eq!(csvs.len(), 2);
    let a = std::fs::read(&csvs[0]).unwrap();
    let b = std::fs::read(&csvs[1]).unwrap();
    assert_eq!(a, b);
}
