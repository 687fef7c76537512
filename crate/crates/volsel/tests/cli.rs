//! End-to-end checks of the thin CLI.

use std::process::Command;

fn volsel(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_volsel"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let out = volsel(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage") || err.contains("usage"), "{err}");
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "study = study1\nbogus = 1\n").unwrap();
    let out = volsel(&["replicate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn select_on_golden_path_picks_diff2() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_path.csv");
    let out = volsel(&[
        "select",
        "--study",
        "study1",
        "--path",
        path,
        "--criterion",
        "dpGQBIC",
        "--lambda",
        "0.2",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("selected: diff2"), "{stdout}");
}

#[test]
fn verify_expansion_emits_three_finite_rows() {
    let out = volsel(&["verify-expansion", "--n-list", "100,400,1600"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(lines[0], "n,beta,free_energy,objective_at_fit,residual");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let residual: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual.is_finite());
    }
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--study", "study1", "--n", "50", "--q", "2", "--seed", "21",
    ];
    let a = volsel(&args);
    let b = volsel(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
