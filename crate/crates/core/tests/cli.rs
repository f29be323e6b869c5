use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_surface-hydro"))
}

#[test]
fn solve_pde_writes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pde");
    let status = cli()
        .args([
            "solve-pde",
            "--shape",
            "sin",
            "--amplitude",
            "0.001",
            "--t-end",
            "1e-5",
            "--grid",
            "64",
            "--snapshots",
            "3",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 64);
    assert!(out.join("trajectory.snap").is_file());
}

#[test]
fn simulate_then_refuse_a_changed_config() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        cli()
            .args([
                "simulate",
                "--preset",
                "gibbs-test",
                "--n",
                "32",
                "--n-samples",
                "4",
                "--master-seed",
                seed,
            ])
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
    };
    let ok = run("1");
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(dir.path().join("site_stats.csv").is_file());
    let refused = run("2");
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn missing_figure_inputs_exit_with_error_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["emit-figures", "--figure", "local-gibbs", "--input"])
        .arg(dir.path().join("absent"))
        .arg("--out")
        .arg(dir.path().join("fig"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("local_gibbs.csv"));
    assert!(!dir.path().join("fig").exists());
}

#[test]
fn unknown_preset_is_rejected() {
    let out = cli()
        .args([
            "gibbs-test",
            "--preset",
            "nonsense",
            "--out",
            "/nonexistent",
        ])
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
}
