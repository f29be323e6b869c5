use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ensemble::{run_ensemble, EnsembleResult};
use super::manifest::RunManifest;
use super::output::{write_rows, write_text};
use super::HarnessError;
use crate::diagnostics::{local_gibbs_test, LocalGibbsConfig, LocalGibbsReport};
use crate::kmc::site_position;

pub const GIBBS_FILE: &str = "local_gibbs.csv";
pub const GIBBS_REPORT_FILE: &str = "local_gibbs.txt";

/// One site of the local-Gibbs profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsRow {
    #[serde(rename = "i_over_N")]
    pub i_over_n: f64,
    pub log_product: f64,
    pub stderr: f64,
    #[serde(rename = "reference_12K")]
    pub reference_12k: f64,
}

pub fn gibbs_rows(report: &LocalGibbsReport) -> Vec<GibbsRow> {
    let n = report.log_product.len();
    report
        .log_product
        .iter()
        .zip(&report.stderr)
        .enumerate()
        .map(|(k, (&lp, &se))| GibbsRow {
            i_over_n: site_position(k, n),
            log_product: lp,
            stderr: se,
            reference_12k: report.reference(),
        })
        .collect()
}

/// Local-Gibbs test on the first recorded `(t, Delta)` cell.
pub fn gibbs_from_ensemble(
    ens: &EnsembleResult,
    config: &LocalGibbsConfig,
) -> Result<LocalGibbsReport, HarnessError> {
    let pairs = ens.cells[0]
        .f_pairs
        .as_ref()
        .ok_or_else(|| HarnessError::Missing("observables f+ and f-".into()))?;
    Ok(local_gibbs_test(pairs, ens.config.model.k, config)?)
}

/// Runs the ensemble and the local-Gibbs test, persisting the per-site
/// profile and the report in `cfg.output_dir`.
pub fn pipeline_gibbs(
    cfg: &ExperimentConfig,
    config: &LocalGibbsConfig,
) -> Result<LocalGibbsReport, HarnessError> {
    let dir = cfg.output_dir.clone();
    let text = format!(
        "{}\n# test settings\n{}",
        cfg.to_toml()?,
        toml::to_string(config).map_err(|e| HarnessError::Config(e.to_string()))?
    );
    let mut manifest = RunManifest::begin(
        &dir,
        "gibbs-test",
        &text,
        cfg.master_seed,
        cfg.n_samples as u64,
    )?;
    manifest.decide("gibbs_sigma_threshold", config.sigma_threshold);
    manifest.decide("gibbs_min_fraction", config.min_fraction);
    manifest.decide(
        "gibbs_estimator",
        "per-site time averages of f+ and f- over [t, t + Delta]",
    );
    manifest.save(&dir)?;

    let ens = run_ensemble(cfg)?;
    let report = gibbs_from_ensemble(&ens, config)?;
    write_rows(&dir.join(GIBBS_FILE), &gibbs_rows(&report))?;
    write_text(&dir.join(GIBBS_REPORT_FILE), &report.to_text())?;
    manifest.record_file(&dir, GIBBS_FILE)?;
    manifest.record_file(&dir, GIBBS_REPORT_FILE)?;
    manifest.finish(&dir)?;
    Ok(report)
}
