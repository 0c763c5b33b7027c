//! End-to-end checks of the command-line surface: exit codes, CSV shapes,
//! byte determinism, and config file precedence.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_starwave"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("starwave-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn verify_default_passes_and_reports() {
    let dir = scratch("verify");
    let report = dir.join("report.json");
    let out = run(&["verify", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&report).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(true));
    assert_eq!(json["suites"].as_array().unwrap().len(), 5);
    assert!(json["constants"]["c0_2"].as_f64().unwrap() > 0.0);
    assert!(json["constants"]["fitted_c"].as_f64().unwrap() > 0.0);

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("5 of 5 suites passed"), "stdout: {stdout}");
}

#[test]
fn critical_coupling_is_a_config_error() {
    let dir = scratch("critical");
    let out = run(&[
        "pseudospec",
        "--alpha",
        "2,0",
        "--edges",
        "2",
        "--out",
        dir.join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("critical"), "stderr: {stderr}");
}

#[test]
fn tightened_fem_tolerance_fails_the_suite() {
    let dir = scratch("tight");
    let out = run(&[
        "verify",
        "--tol",
        "fem=1e-15",
        "--out",
        dir.join("report.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_tolerance_is_a_config_error() {
    let out = run(&["verify", "--tol", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pseudospec_rows_sidecar_and_determinism() {
    let dir = scratch("pseudospec");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let args = ["pseudospec", "--alpha", "2.5,0", "--zgrid", "0.2,1.8,7,-1,1,5", "--seed", "11"];
    let out = run(&[&args[..], &["--out", a.to_str().unwrap()]].concat());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("35 rows"));
    let out2 = run(&[&args[..], &["--out", b.to_str().unwrap()]].concat());
    assert!(out2.status.success());

    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same config and seed must give identical bytes");
    assert_eq!(bytes_a.iter().filter(|&&c| c == b'\n').count(), 36);

    let echo: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("a.csv.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(echo["seed"].as_u64(), Some(11));
    assert_eq!(echo["zgrid"]["re_count"].as_u64(), Some(7));
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    let flagged = dir.join("flagged.csv");
    std::fs::write(
        &cfg,
        format!(
            "# scan setup\nalpha = 2.5,0\nzgrid = 0.2,1.8,3,-1,1,3\nseed = 5\nout = {}\n",
            dir.join("from-file.csv").display()
        ),
    )
    .unwrap();
    let out = run(&[
        "pseudospec",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        flagged.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(flagged.exists(), "flag must override the config file's out path");
    assert!(!dir.join("from-file.csv").exists());

    let echo: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("flagged.csv.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(echo["alpha"][0].as_f64(), Some(2.5));
    assert_eq!(echo["seed"].as_u64(), Some(5));
}

#[test]
fn evolve_energy_constant_for_skew_coupling() {
    let dir = scratch("evolve");
    let csv = dir.join("ev.csv");
    let out = run(&[
        "evolve",
        "--alpha",
        "0,2",
        "--tmax",
        "3",
        "--tstep",
        "0.25",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,energy,re_u0,im_u0,robin_abs,continuity_defect"));
    let energies: Vec<f64> =
        lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 13);
    let e0 = energies[0];
    for e in &energies {
        assert!((e - e0).abs() <= 1e-9 * e0, "energy drifted: {e} vs {e0}");
    }
}

#[test]
fn eigchain_rows_match_length() {
    let dir = scratch("eigchain");
    let csv = dir.join("ec.csv");
    let out = run(&[
        "eigchain",
        "--z",
        "0.9,0.7",
        "--chain-len",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().next(), Some("k,norm,residual,re_u0,im_u0"));
}

#[test]
fn converge_gap_decreases() {
    let dir = scratch("converge");
    let csv = dir.join("cv.csv");
    let out = run(&[
        "converge",
        "--nlist",
        "4,8,16",
        "--elements",
        "200",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let gaps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "sup_gap not decreasing: {gaps:?}");
}
