use std::path::{Path, PathBuf};

use surface_hydro::current::SigmaCurve;
use surface_hydro::harness::{
    emit_figure_data, emit_local_gibbs, emit_sigma, pipeline_simulate, run_ensemble,
    ExperimentConfig, FigureId, HarnessError, RunManifest, MANIFEST_FILE, SIGMA_FILE,
    SITE_STATS_FILE, WINDOW_STATS_FILE,
};
use surface_hydro::kmc::{replicate_rng, sample_initial_state_with, InitialProfile, ProfileShape};
use surface_hydro::observables::SiteObservable;

fn small_config(out: &Path) -> ExperimentConfig {
    let n = 32;
    let n4 = (n as f64).powi(4);
    let mut cfg = ExperimentConfig::new(
        1.0,
        n,
        ProfileShape::Sin { amplitude: 0.0075 },
        12,
        vec![0.0, 50.0 / n4],
        out,
    );
    cfg.delta_grid = vec![0.0, 20.0 / n4];
    cfg.epsilon_grid = vec![0.1];
    cfg.chunk_size = 5;
    cfg
}

#[test]
fn same_seed_gives_identical_tables() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline_simulate(&small_config(a.path())).unwrap();
    // A different thread count must not change the reduction order.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    pool.install(|| pipeline_simulate(&small_config(b.path())))
        .unwrap();
    for file in [SITE_STATS_FILE, WINDOW_STATS_FILE] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn different_seed_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let a = run_ensemble(&cfg).unwrap();
    cfg.master_seed = 99;
    let b = run_ensemble(&cfg).unwrap();
    assert_ne!(a.total_jumps, b.total_jumps);
}

#[test]
fn single_replicate_at_time_zero_reproduces_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.n_samples = 1;
    cfg.times = vec![0.0];
    cfg.delta_grid = vec![0.0];
    cfg.observables = vec![SiteObservable::Height, SiteObservable::W];
    let ens = run_ensemble(&cfg).unwrap();
    let profile = InitialProfile::from_shape(cfg.initial, cfg.model.n).unwrap();
    let mut rng = replicate_rng(cfg.master_seed, 0);
    let state = sample_initial_state_with(&profile, cfg.params().unwrap(), &mut rng).unwrap();
    let h = ens.site_series(SiteObservable::Height, 0, 0).unwrap();
    let w = ens.site_series(SiteObservable::W, 0, 0).unwrap();
    for i in 0..cfg.model.n {
        assert_eq!(h.mean[i], state.heights()[i] as f64);
        assert_eq!(w.mean[i], state.third_diffs()[i] as f64);
    }
}

#[test]
fn run_directory_refuses_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    pipeline_simulate(&cfg).unwrap();
    let manifest = RunManifest::load(dir.path()).unwrap();
    assert_eq!(manifest.command, "simulate");
    assert_eq!(manifest.replicate_streams.len(), cfg.n_samples);
    assert!(manifest.files.contains_key(SITE_STATS_FILE));

    // Rerunning the identical configuration is allowed.
    pipeline_simulate(&cfg).unwrap();
    let mut other = cfg.clone();
    other.master_seed += 1;
    match pipeline_simulate(&other) {
        Err(HarnessError::RefuseOverwrite { .. }) => {}
        r => panic!("expected a refusal, got {r:?}"),
    }
}

#[test]
fn config_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = dir.path().join("run.toml");
    cfg.save(&path).unwrap();
    let back = ExperimentConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
}

#[test]
fn sigma_figure_has_the_documented_columns() {
    let run = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    SigmaCurve::constant(0.9, 2.0)
        .save(&run.path().join(SIGMA_FILE))
        .unwrap();
    let files = emit_figure_data(
        &[run.path().to_path_buf()],
        FigureId::Sigma,
        out.path(),
        true,
    )
    .unwrap();
    assert_eq!(files.len(), 2);
    let text = std::fs::read_to_string(&files[0]).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,omega,sigma");
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row[0], 2.0);
    assert!((row[2] - 0.9).abs() < 1e-12);
    assert!(std::fs::read_to_string(&files[1])
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn figures_report_every_missing_input_and_write_nothing() {
    let present = tempfile::tempdir().unwrap();
    SigmaCurve::constant(1.0, 1.0)
        .save(&present.path().join(SIGMA_FILE))
        .unwrap();
    let absent_a: PathBuf = present.path().join("nope-a");
    let absent_b: PathBuf = present.path().join("nope-b");
    let out = tempfile::tempdir().unwrap();
    let err = emit_figure_data(
        &[
            present.path().to_path_buf(),
            absent_a.clone(),
            absent_b.clone(),
        ],
        FigureId::Sigma,
        out.path(),
        true,
    )
    .unwrap_err()
    .to_string();
    assert!(err.contains("nope-a") && err.contains("nope-b"), "{err}");
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn empty_figure_inputs_are_errors() {
    let out = tempfile::tempdir().unwrap();
    assert!(emit_sigma(&[], out.path(), false).is_err());
    assert!(emit_local_gibbs(&[], out.path(), false).is_err());
    assert!(emit_figure_data(&[], FigureId::LocalGibbs, out.path(), false).is_err());
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 0);
    assert!(!out.path().join(MANIFEST_FILE).exists());
}
