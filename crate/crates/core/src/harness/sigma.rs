use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ensemble::{run_ensemble, EnsembleResult};
use super::manifest::RunManifest;
use super::output::{write_rows, write_text};
use super::HarnessError;
use crate::current::{
    assemble_point_cloud, burn_in_test, fit_quadratic_core, fit_sigma, j_gibbs,
    select_epsilon_delta, CloudMeta, CurveTestConfig, FitError, FitSettings, GridCloud, Selection,
    SigmaCurve, SigmaPointCloud, SweepEntry,
};
use crate::kmc::site_position;
use crate::observables::SiteObservable;

/// Tolerances for the curve tests and the spline fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSettings {
    /// Used when comparing clouds at consecutive times.
    pub burn_in: CurveTestConfig,
    /// Used for the epsilon and delta sweeps.
    pub selection: CurveTestConfig,
    pub fit: FitSettings,
}

impl Default for SigmaSettings {
    fn default() -> Self {
        Self {
            burn_in: CurveTestConfig::default(),
            selection: CurveTestConfig::default(),
            fit: FitSettings::default(),
        }
    }
}

/// Clouds measured at one time for every `(epsilon, delta)` of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSlice {
    pub t: f64,
    pub grid: Vec<GridCloud>,
}

impl TimeSlice {
    /// Cloud with the largest window and the shortest averaging time.
    pub fn reference(&self) -> Option<&GridCloud> {
        let e = self
            .grid
            .iter()
            .map(|g| g.epsilon)
            .fold(f64::NEG_INFINITY, f64::max);
        let d = self
            .grid
            .iter()
            .map(|g| g.delta)
            .fold(f64::INFINITY, f64::min);
        self.grid.iter().find(|g| g.epsilon == e && g.delta == d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurnInRow {
    pub t: f64,
    pub t_next: f64,
    pub distance: f64,
    pub scatter: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaFit {
    pub burn_in: Vec<BurnInRow>,
    /// Whether some time passed the burn-in test; if not, the last time is used.
    pub burn_in_passed: bool,
    pub t: f64,
    pub selection: Selection,
    pub cloud: SigmaPointCloud,
    pub core: (f64, f64),
    pub curve: SigmaCurve,
}

/// `delta0` for a set of abscissas: the configured value, else `0.05 W`.
fn fill_radius(omega: &[f64], settings: &FitSettings) -> f64 {
    if let Some(d) = settings.delta0 {
        return d;
    }
    let lo = omega.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = omega.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    0.05 * lo.abs().min(hi).max(0.0)
}

/// Pairs window-averaged `w` with per-site `J` for every cell of an ensemble.
pub fn clouds_from_ensemble(
    ens: &EnsembleResult,
    settings: &FitSettings,
) -> Result<Vec<TimeSlice>, HarnessError> {
    let cfg = &ens.config;
    let k = cfg.model.k;
    let seeds = vec![cfg.master_seed];
    let e_ref = (0..cfg.epsilon_grid.len())
        .max_by(|&a, &b| cfg.epsilon_grid[a].total_cmp(&cfg.epsilon_grid[b]))
        .unwrap_or(0);
    let d_ref = (0..cfg.delta_grid.len())
        .min_by(|&a, &b| cfg.delta_grid[a].total_cmp(&cfg.delta_grid[b]))
        .unwrap_or(0);
    let mut slices = Vec::new();
    for (ti, &t) in cfg.times.iter().enumerate() {
        let reference = ens.window_series(SiteObservable::W, ti, d_ref, e_ref)?;
        let delta0 = fill_radius(&reference.mean, settings);
        let mut grid = Vec::new();
        for (di, &delta) in cfg.delta_grid.iter().enumerate() {
            let j = ens.site_series(SiteObservable::J, ti, di)?;
            for (ei, &epsilon) in cfg.epsilon_grid.iter().enumerate() {
                let w = ens.window_series(SiteObservable::W, ti, di, ei)?;
                let cloud = assemble_point_cloud(&w, &j, k, delta0, seeds.clone())?;
                grid.push(GridCloud {
                    epsilon,
                    delta,
                    cloud,
                });
            }
        }
        slices.push(TimeSlice { t, grid });
    }
    Ok(slices)
}

/// Burn-in detection, `(epsilon, delta)` selection, core fit and spline fit.
pub fn fit_sigma_from_slices(
    slices: &[TimeSlice],
    settings: &SigmaSettings,
) -> Result<SigmaFit, HarnessError> {
    if slices.is_empty() {
        return Err(HarnessError::Missing("no measurement times".into()));
    }
    let mut burn_in = Vec::new();
    let mut chosen = None;
    for pair in slices.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ra, rb) = match (a.reference(), b.reference()) {
            (Some(ra), Some(rb)) => (ra, rb),
            _ => return Err(HarnessError::Missing("empty cloud grid".into())),
        };
        let r = burn_in_test(&ra.cloud, &rb.cloud, &settings.burn_in)?;
        burn_in.push(BurnInRow {
            t: a.t,
            t_next: b.t,
            distance: r.distance,
            scatter: r.scatter,
            pass: r.pass,
        });
        if r.pass && chosen.is_none() {
            chosen = Some(a);
        }
    }
    let burn_in_passed = chosen.is_some();
    let slice = chosen.unwrap_or(&slices[slices.len() - 1]);

    let selection = select_epsilon_delta(&slice.grid, &settings.selection)?;
    let cloud = slice
        .grid
        .iter()
        .find(|g| g.epsilon == selection.epsilon && g.delta == selection.delta)
        .map(|g| g.cloud.clone())
        .ok_or_else(|| HarnessError::Missing("selected cloud".into()))?;

    let mut fit = settings.fit.clone();
    fit.delta0 = Some(cloud.delta0);
    let range = cloud
        .omega_range()
        .ok_or_else(|| HarnessError::Fit(FitError::InvalidInput("empty point cloud".into())))?;
    let (_, _, delta1) = fit.resolve(range)?;
    let core = fit_quadratic_core(&cloud, delta1)?;
    let mut curve = fit_sigma(&cloud, core, &fit)?;
    curve
        .provenance
        .insert("burn_in_passed".into(), burn_in_passed.to_string());
    curve
        .provenance
        .insert("selected_epsilon".into(), selection.epsilon.to_string());
    curve
        .provenance
        .insert("selected_delta".into(), selection.delta.to_string());
    Ok(SigmaFit {
        burn_in,
        burn_in_passed,
        t: slice.t,
        selection,
        cloud,
        core,
        curve,
    })
}

#[derive(Serialize)]
struct CloudRow {
    omega: f64,
    ratio: f64,
    current: f64,
    fill_in: bool,
}

fn cloud_rows(c: &SigmaPointCloud) -> Vec<CloudRow> {
    let kept = c
        .omega
        .iter()
        .zip(&c.ratio)
        .zip(&c.current)
        .map(|((&w, &r), &j)| CloudRow {
            omega: w,
            ratio: r,
            current: j,
            fill_in: false,
        });
    let near = c
        .near_omega
        .iter()
        .zip(&c.near_current)
        .map(|(&w, &j)| CloudRow {
            omega: w,
            ratio: j / j_gibbs(w, c.meta.k),
            current: j,
            fill_in: true,
        });
    kept.chain(near).collect()
}

#[derive(Serialize)]
struct SweepRow {
    stage: &'static str,
    epsilon: f64,
    delta: f64,
    bias: f64,
    scatter: f64,
}

fn sweep_rows(delta_sweep: &[SweepEntry], epsilon_sweep: &[SweepEntry]) -> Vec<SweepRow> {
    let row = |stage, e: &SweepEntry| SweepRow {
        stage,
        epsilon: e.epsilon,
        delta: e.delta,
        bias: e.bias,
        scatter: e.scatter,
    };
    delta_sweep
        .iter()
        .map(|e| row("delta", e))
        .chain(epsilon_sweep.iter().map(|e| row("epsilon", e)))
        .collect()
}

/// Output files of a fit run.
pub const SIGMA_FILE: &str = "sigma.toml";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const BURN_IN_FILE: &str = "burn_in.csv";
pub const CLOUD_FILE: &str = "cloud.csv";

/// Runs the configured ensemble and fits `sigma`, persisting the curve and
/// every intermediate table in `cfg.output_dir`.
///
/// An inconclusive sweep still writes `sweep.csv` before returning the error.
pub fn pipeline_sigma(
    cfg: &ExperimentConfig,
    settings: &SigmaSettings,
) -> Result<SigmaFit, HarnessError> {
    let dir = cfg.output_dir.clone();
    let settings_text =
        toml::to_string(settings).map_err(|e| HarnessError::Config(e.to_string()))?;
    let text = format!("{}\n# fit settings\n{}", cfg.to_toml()?, settings_text);
    let mut manifest = RunManifest::begin(
        &dir,
        "fit-sigma",
        &text,
        cfg.master_seed,
        cfg.n_samples as u64,
    )?;
    manifest.decide("burn_in_bias_tolerance", settings.burn_in.bias_tolerance);
    manifest.decide(
        "burn_in_scatter_tolerance",
        settings.burn_in.scatter_tolerance,
    );
    manifest.decide(
        "selection_bias_tolerance",
        settings.selection.bias_tolerance,
    );
    manifest.decide(
        "selection_scatter_tolerance",
        settings.selection.scatter_tolerance,
    );
    manifest.decide("curve_bins", settings.selection.bins);
    manifest.decide("smoothing_weight", settings.fit.smoothing_weight);
    manifest.decide("symmetrize", settings.fit.symmetrize);
    manifest.decide("sigma_floor", settings.fit.floor);
    manifest.save(&dir)?;

    let ens = run_ensemble(cfg)?;
    let slices = clouds_from_ensemble(&ens, &settings.fit)?;
    let fit = match fit_sigma_from_slices(&slices, settings) {
        Ok(f) => f,
        Err(HarnessError::Fit(FitError::Inconclusive { sweep })) => {
            write_rows(&dir.join(SWEEP_FILE), &sweep_rows(&sweep, &[]))?;
            manifest.record_file(&dir, SWEEP_FILE)?;
            manifest.decide("outcome", "inconclusive epsilon/delta selection");
            manifest.save(&dir)?;
            return Err(HarnessError::Fit(FitError::Inconclusive { sweep }));
        }
        Err(e) => return Err(e),
    };

    write_rows(&dir.join(BURN_IN_FILE), &fit.burn_in).or_else(|e| match e {
        // A single measurement time has no burn-in comparison to write.
        HarnessError::Missing(_) => Ok(()),
        e => Err(e),
    })?;
    write_rows(
        &dir.join(SWEEP_FILE),
        &sweep_rows(&fit.selection.delta_sweep, &fit.selection.epsilon_sweep),
    )?;
    write_rows(&dir.join(CLOUD_FILE), &cloud_rows(&fit.cloud))?;
    write_text(&dir.join(SIGMA_FILE), &fit.curve.to_toml_string()?)?;
    for f in [BURN_IN_FILE, SWEEP_FILE, CLOUD_FILE, SIGMA_FILE] {
        if dir.join(f).exists() {
            manifest.record_file(&dir, f)?;
        }
    }
    manifest.decide("t_n", fit.t);
    manifest.decide("epsilon_n", fit.selection.epsilon);
    manifest.decide("delta_n", fit.selection.delta);
    manifest.decide("burn_in_passed", fit.burn_in_passed);
    manifest.finish(&dir)?;
    Ok(fit)
}

/// Synthetic stand-in for simulation output with a known correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClouds {
    pub k: f64,
    /// Sites per cloud.
    pub n: usize,
    /// `omega = amplitude * sin(2 pi x)` at the first time.
    pub amplitude: f64,
    /// Relative amplitude loss per later time.
    pub decay: f64,
    pub times: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// Standard deviation of the Gaussian noise added to each ratio.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticClouds {
    pub fn new(k: f64, n: usize, amplitude: f64, noise: f64) -> Self {
        Self {
            k,
            n,
            amplitude,
            decay: 0.05,
            times: vec![1.0, 2.0],
            epsilon_grid: vec![0.01, 0.02, 0.04],
            delta_grid: vec![0.0, 0.01],
            noise,
            seed: 1,
        }
    }

    /// Clouds whose ratios are `planted(omega) + noise`, independent per cell.
    pub fn generate(
        &self,
        planted: impl Fn(f64) -> f64,
        fit: &FitSettings,
    ) -> Result<Vec<TimeSlice>, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.noise.max(0.0))
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut slices = Vec::new();
        for (ti, &t) in self.times.iter().enumerate() {
            let amp = self.amplitude * (1.0 - self.decay * ti as f64);
            let omega: Vec<f64> = (0..self.n)
                .map(|s| amp * (2.0 * std::f64::consts::PI * site_position(s, self.n)).sin())
                .collect();
            let delta0 = fill_radius(&omega, fit);
            let mut grid = Vec::new();
            for &delta in &self.delta_grid {
                for &epsilon in &self.epsilon_grid {
                    let current: Vec<f64> = omega
                        .iter()
                        .map(|&w| (planted(w) + normal.sample(&mut rng)) * j_gibbs(w, self.k))
                        .collect();
                    let meta = CloudMeta {
                        n: self.n,
                        k: self.k,
                        t,
                        epsilon,
                        delta,
                        seeds: vec![self.seed],
                    };
                    let cloud = SigmaPointCloud::from_points(&omega, &current, delta0, meta)?;
                    grid.push(GridCloud {
                        epsilon,
                        delta,
                        cloud,
                    });
                }
            }
            slices.push(TimeSlice { t, grid });
        }
        Ok(slices)
    }
}
