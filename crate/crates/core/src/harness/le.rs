use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ensemble::{run_ensemble, EnsembleResult};
use super::manifest::RunManifest;
use super::output::write_text;
use super::HarnessError;
use crate::diagnostics::{
    classify_roughness, probe_sites_at, roughness_metric, select_epsilon, test_e_convergence,
    test_ef_collapse, test_v_decay, CollapsePoints, CollapseReport, ConvergenceReport, DecayReport,
    ProfileAtN, RoughnessReport, Smoothness,
};
use crate::observables::SiteObservable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeSettings {
    /// Macroscopic positions whose neighbourhoods the roughness metric scans.
    pub probe_positions: Vec<f64>,
    /// Neighbourhood radius in sites.
    pub probe_radius: usize,
    /// Metric changes below this many standard errors count as noise.
    pub noise_z: f64,
    /// Smoothness threshold for choosing `epsilon(N)`, relative to the profile range.
    pub theta_fraction: f64,
    /// Cauchy tolerance for window-averaged means, relative to their sup norm.
    pub e_tolerance_fraction: f64,
    /// `Var(wbar)` must decay at least like `N^(-v_zeta)`.
    pub v_zeta: f64,
    pub collapse_bins: usize,
    /// Collapse tolerance in propagated standard errors.
    pub collapse_z: f64,
}

impl Default for LeSettings {
    fn default() -> Self {
        Self {
            probe_positions: vec![0.125, 0.375, 0.625, 0.875],
            probe_radius: 4,
            noise_z: 3.0,
            theta_fraction: 0.1,
            e_tolerance_fraction: 0.1,
            v_zeta: 0.5,
            collapse_bins: 16,
            collapse_z: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeReport {
    pub n_values: Vec<usize>,
    /// Selected `epsilon(N)` per lattice size.
    pub epsilons: Vec<f64>,
    pub rough_w: RoughnessReport,
    pub rough_j: RoughnessReport,
    pub e_convergence: ConvergenceReport,
    /// One decay test per window in the common epsilon grid.
    pub v_decay: Vec<(f64, DecayReport)>,
    /// Collapse of `J` and of `w^2` over the two largest lattices.
    pub collapse_j: CollapseReport,
    pub collapse_w2: CollapseReport,
}

impl LeReport {
    /// `E w_i` rough, `E J(w_i)` smoothing out, (E) and (V) satisfied.
    pub fn rough_le(&self) -> bool {
        self.rough_w.verdict == Smoothness::Rough
            && self.rough_j.verdict == Smoothness::Smooth
            && self.e_convergence.converged
            && self.v_decay.iter().all(|(_, d)| d.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s += &format!(
            "n_values: {:?}\nepsilon_n: {:?}\n",
            self.n_values, self.epsilons
        );
        s += "observable: E w_i\n";
        s += &self.rough_w.to_text();
        s += "observable: E J(w_i)\n";
        s += &self.rough_j.to_text();
        s += &self.e_convergence.to_text();
        for (e, d) in &self.v_decay {
            s += &format!("epsilon: {e}\n");
            s += &d.to_text("V-decay");
        }
        s += "observable: J\n";
        s += &self.collapse_j.to_text();
        s += "observable: w^2\n";
        s += &self.collapse_w2.to_text();
        s += &format!("rough_le: {}\n", self.rough_le());
        s
    }
}

fn max_se_near(se: &[f64], probes: &[usize], radius: usize) -> f64 {
    let n = se.len();
    let mut m: f64 = 0.0;
    for &p in probes {
        for off in 0..=2 * radius + 1 {
            m = m.max(se[(p + n + off - radius) % n]);
        }
    }
    m
}

/// Roughness metrics of per-site means at every level, with the noise level
/// used for classification (`noise_z` times the largest neighbour-difference
/// standard error near the probes).
fn roughness(
    levels: &[EnsembleResult],
    obs: SiteObservable,
    settings: &LeSettings,
) -> Result<RoughnessReport, HarnessError> {
    let mut metrics = Vec::new();
    let mut noise: f64 = 0.0;
    for ens in levels {
        let s = ens.site_series(obs, 0, 0)?;
        let probes = probe_sites_at(&settings.probe_positions, s.len());
        metrics.push(roughness_metric(&s.mean, &probes, settings.probe_radius)?);
        let se = s.std_errors();
        noise = noise.max(
            settings.noise_z
                * std::f64::consts::SQRT_2
                * max_se_near(&se, &probes, settings.probe_radius),
        );
    }
    let ns: Vec<usize> = levels.iter().map(|e| e.config.model.n).collect();
    Ok(classify_roughness(&ns, &metrics, noise)?)
}

fn eps_index(ens: &EnsembleResult, eps: f64) -> Result<usize, HarnessError> {
    ens.config
        .epsilon_grid
        .iter()
        .position(|&e| (e - eps).abs() <= 1e-12 * eps.abs().max(1.0))
        .ok_or_else(|| {
            HarnessError::Missing(format!(
                "epsilon {eps} in the grid of N={}",
                ens.config.model.n
            ))
        })
}

/// Rough local-equilibrium diagnostics over ensembles at increasing `N`.
///
/// Every ensemble must record `w`, `w^2` and `J` and share the macroscopic
/// time; the first time and averaging width of each are used.
pub fn diagnose_le(
    levels: &[EnsembleResult],
    settings: &LeSettings,
) -> Result<LeReport, HarnessError> {
    if levels.len() < 3 {
        return Err(HarnessError::Config(
            "need ensembles at three or more lattice sizes".into(),
        ));
    }
    if levels
        .windows(2)
        .any(|p| p[1].config.model.n <= p[0].config.model.n)
    {
        return Err(HarnessError::Config("lattice sizes must increase".into()));
    }
    let n_values: Vec<usize> = levels.iter().map(|e| e.config.model.n).collect();
    let top = &levels[levels.len() - 2..];
    let rough_w = roughness(top, SiteObservable::W, settings)?;
    let rough_j = roughness(top, SiteObservable::J, settings)?;

    let mut epsilons = Vec::new();
    let mut profiles = Vec::new();
    for ens in levels {
        let site = ens.site_series(SiteObservable::W, 0, 0)?;
        let eps = select_epsilon(
            &site.mean,
            &ens.config.epsilon_grid,
            settings.theta_fraction,
        )?;
        let s = ens.window_series(SiteObservable::W, 0, 0, eps_index(ens, eps)?)?;
        epsilons.push(eps);
        profiles.push(ProfileAtN {
            n: ens.config.model.n,
            epsilon: eps,
            x_grid: s.x_grid,
            values: s.mean,
        });
    }
    let scale = profiles
        .iter()
        .flat_map(|p| p.values.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let e_convergence = test_e_convergence(&profiles, settings.e_tolerance_fraction * scale)?;

    let mut v_decay = Vec::new();
    for &eps in &levels[0].config.epsilon_grid {
        let mut vars = Vec::new();
        for ens in levels {
            let s = ens.window_series(SiteObservable::W, 0, 0, eps_index(ens, eps)?)?;
            vars.push(s.variance.iter().sum::<f64>() / s.len() as f64);
        }
        v_decay.push((eps, test_v_decay(&n_values, &vars, settings.v_zeta)?));
    }

    let collapse = |obs: SiteObservable| -> Result<CollapseReport, HarnessError> {
        let mut clouds = Vec::new();
        for (ens, &eps) in levels.iter().zip(&epsilons).skip(levels.len() - 2) {
            let ei = eps_index(ens, eps)?;
            let w = ens.window_series(SiteObservable::W, 0, 0, ei)?;
            let f = ens.window_series(obs, 0, 0, ei)?;
            let stderr = f.std_errors();
            clouds.push(CollapsePoints {
                n: ens.config.model.n,
                omega: w.mean,
                value: f.mean,
                stderr,
            });
        }
        Ok(test_ef_collapse(
            &clouds,
            settings.collapse_bins,
            f64::INFINITY,
            Some(settings.collapse_z),
        )?)
    };
    let collapse_j = collapse(SiteObservable::J)?;
    let collapse_w2 = collapse(SiteObservable::W2)?;
    Ok(LeReport {
        n_values,
        epsilons,
        rough_w,
        rough_j,
        e_convergence,
        v_decay,
        collapse_j,
        collapse_w2,
    })
}

pub const LE_REPORT_FILE: &str = "le_report.txt";

/// Runs one ensemble per configuration, diagnoses them and writes the report
/// and a manifest to `dir`.
pub fn pipeline_diagnose_le(
    levels: &[ExperimentConfig],
    settings: &LeSettings,
    dir: &Path,
) -> Result<LeReport, HarnessError> {
    let mut text = String::new();
    for c in levels {
        text += &c.to_toml()?;
        text += "\n";
    }
    text += &toml::to_string(settings).map_err(|e| HarnessError::Config(e.to_string()))?;
    let seed = levels.first().map(|c| c.master_seed).unwrap_or(0);
    let reps = levels.iter().map(|c| c.n_samples as u64).max().unwrap_or(0);
    let mut manifest = RunManifest::begin(dir, "diagnose-le", &text, seed, reps)?;
    manifest.decide("roughness_noise_z", settings.noise_z);
    manifest.decide("theta_fraction", settings.theta_fraction);
    manifest.decide("e_tolerance_fraction", settings.e_tolerance_fraction);
    manifest.decide("v_zeta", settings.v_zeta);
    manifest.decide("collapse_z", settings.collapse_z);
    manifest.save(dir)?;
    let ensembles = levels
        .iter()
        .map(run_ensemble)
        .collect::<Result<Vec<_>, _>>()?;
    let report = diagnose_le(&ensembles, settings)?;
    write_text(&dir.join(LE_REPORT_FILE), &report.to_text())?;
    manifest.record_file(dir, LE_REPORT_FILE)?;
    manifest.decide("rough_le", report.rough_le());
    manifest.finish(dir)?;
    Ok(report)
}
