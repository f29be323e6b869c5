use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ensemble::{run_ensemble, EnsembleResult};
use super::manifest::RunManifest;
use super::output::write_rows;
use super::HarnessError;
use crate::observables::MesoSeries;

pub const SITE_STATS_FILE: &str = "site_stats.csv";
pub const WINDOW_STATS_FILE: &str = "window_stats.csv";

/// One site (or window centre) of one observable at one `(t, Delta)`.
///
/// Per-site rows carry `epsilon = 1/(2N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub observable: String,
    pub t: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
}

fn push_series(rows: &mut Vec<StatsRow>, name: &str, s: &MesoSeries) {
    for ((&x, &mean), se) in s.x_grid.iter().zip(&s.mean).zip(s.std_errors()) {
        rows.push(StatsRow {
            observable: name.to_string(),
            t: s.t,
            delta: s.delta,
            epsilon: s.epsilon,
            x,
            mean,
            stderr: se,
            n_samples: s.n_samples,
        });
    }
}

/// `(per-site rows, windowed rows)` of every recorded cell.
pub fn stats_rows(ens: &EnsembleResult) -> Result<(Vec<StatsRow>, Vec<StatsRow>), HarnessError> {
    let cfg = &ens.config;
    let (mut site, mut window) = (Vec::new(), Vec::new());
    for ti in 0..cfg.times.len() {
        for di in 0..cfg.delta_grid.len() {
            for &obs in &cfg.observables {
                push_series(&mut site, obs.name(), &ens.site_series(obs, ti, di)?);
                for ei in 0..cfg.epsilon_grid.len() {
                    push_series(
                        &mut window,
                        obs.name(),
                        &ens.window_series(obs, ti, di, ei)?,
                    );
                }
            }
        }
    }
    Ok((site, window))
}

/// Runs the ensemble and writes tidy per-site and windowed statistics to
/// `cfg.output_dir`.
pub fn pipeline_simulate(cfg: &ExperimentConfig) -> Result<EnsembleResult, HarnessError> {
    let dir = cfg.output_dir.clone();
    let mut manifest = RunManifest::begin(
        &dir,
        "simulate",
        &cfg.to_toml()?,
        cfg.master_seed,
        cfg.n_samples as u64,
    )?;
    let ens = run_ensemble(cfg)?;
    let (site, window) = stats_rows(&ens)?;
    write_rows(&dir.join(SITE_STATS_FILE), &site)?;
    write_rows(&dir.join(WINDOW_STATS_FILE), &window)?;
    manifest.record_file(&dir, SITE_STATS_FILE)?;
    manifest.record_file(&dir, WINDOW_STATS_FILE)?;
    manifest.decide("total_jumps", ens.total_jumps);
    manifest.finish(&dir)?;
    Ok(ens)
}
