use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::kmc::{replicate_rng, run_until, sample_initial_state_with, InitialProfile, Recorder};
use crate::observables::{
    window_average_profile, MesoSeries, PairMoments, SiteMoments, SiteObservable,
};

/// Per-site values of one replicate: `cells[cell][observable][site]`, with
/// cells ordered time-major (`cell = t_index * n_delta + delta_index`).
#[derive(Clone, Debug)]
pub struct ReplicateOutput {
    pub index: u64,
    pub cells: Vec<Vec<Vec<f64>>>,
    pub jumps: u64,
}

/// Simulates replicates `0..n_samples` in parallel batches and hands their
/// outputs to `consume` in replicate order, so any reduction done there is
/// independent of thread count and scheduling.
pub fn run_replicates(
    cfg: &ExperimentConfig,
    mut consume: impl FnMut(ReplicateOutput) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    cfg.validate()?;
    let params = cfg.params()?;
    let n = params.n();
    let profile = InitialProfile::from_shape(cfg.initial, n)?;
    let windows: Vec<(f64, f64)> = cfg
        .times
        .iter()
        .flat_map(|&t| cfg.delta_grid.iter().map(move |&d| (t, t + d)))
        .collect();
    let horizon = cfg.horizon();

    let simulate = |index: u64| -> Result<ReplicateOutput, HarnessError> {
        let mut rng = replicate_rng(cfg.master_seed, index);
        let mut state = sample_initial_state_with(&profile, params, &mut rng)?;
        let mut recorders: Vec<crate::observables::SiteAverager> = windows
            .iter()
            .map(|&w| crate::observables::SiteAverager::new(w, n, params.k(), &cfg.observables))
            .collect();
        let mut dyn_recs: Vec<&mut dyn Recorder> = recorders
            .iter_mut()
            .map(|r| r as &mut dyn Recorder)
            .collect();
        let stats = run_until(&mut state, horizon, &mut rng, &mut dyn_recs)?;
        let cells = recorders
            .into_iter()
            .map(|r| r.into_result().expect("window closed before horizon"))
            .collect();
        Ok(ReplicateOutput {
            index,
            cells,
            jumps: stats.jumps,
        })
    };

    let total = cfg.n_samples as u64;
    let mut start = 0u64;
    while start < total {
        let end = (start + cfg.chunk_size as u64).min(total);
        let batch: Vec<ReplicateOutput> = (start..end)
            .into_par_iter()
            .map(simulate)
            .collect::<Result<_, _>>()?;
        for out in batch {
            consume(out)?;
        }
        start = end;
    }
    Ok(())
}

/// Ensemble statistics at one `(t, Delta)` pair.
#[derive(Clone, Debug)]
pub struct CellStats {
    pub t: f64,
    pub delta: f64,
    /// Per-site moments, one accumulator per observable.
    pub site: Vec<SiteMoments>,
    /// Window-averaged moments, `windowed[epsilon][observable]`.
    pub windowed: Vec<Vec<SiteMoments>>,
    /// Joint moments of `(f+, f-)` per site when both are recorded.
    pub f_pairs: Option<Vec<PairMoments>>,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellStats>,
    pub total_jumps: u64,
}

impl EnsembleResult {
    pub fn cell(&self, t_index: usize, delta_index: usize) -> &CellStats {
        &self.cells[t_index * self.config.delta_grid.len() + delta_index]
    }

    fn obs_index(&self, obs: SiteObservable) -> Result<usize, HarnessError> {
        self.config
            .observables
            .iter()
            .position(|&o| o == obs)
            .ok_or_else(|| HarnessError::Missing(format!("observable {}", obs.name())))
    }

    /// Per-site series, tagged with `epsilon = 1/(2N)`.
    pub fn site_series(
        &self,
        obs: SiteObservable,
        t_index: usize,
        delta_index: usize,
    ) -> Result<MesoSeries, HarnessError> {
        let o = self.obs_index(obs)?;
        let c = self.cell(t_index, delta_index);
        let half = 0.5 / self.config.model.n as f64;
        Ok(c.site[o].clone().into_series(c.t, half, c.delta))
    }

    pub fn window_series(
        &self,
        obs: SiteObservable,
        t_index: usize,
        delta_index: usize,
        eps_index: usize,
    ) -> Result<MesoSeries, HarnessError> {
        let o = self.obs_index(obs)?;
        let c = self.cell(t_index, delta_index);
        let eps = self.config.epsilon_grid[eps_index];
        Ok(c.windowed[eps_index][o]
            .clone()
            .into_series(c.t, eps, c.delta))
    }
}

/// Runs the configured ensemble and reduces it to per-site and windowed
/// moments for every observable, time and averaging width.
///
/// A failing replicate aborts the whole run.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleResult, HarnessError> {
    cfg.validate()?;
    let n = cfg.model.n;
    let n_obs = cfg.observables.len();
    let fp = cfg
        .observables
        .iter()
        .position(|&o| o == SiteObservable::FPlus);
    let fm = cfg
        .observables
        .iter()
        .position(|&o| o == SiteObservable::FMinus);
    let mut cells: Vec<CellStats> = cfg
        .times
        .iter()
        .flat_map(|&t| {
            cfg.delta_grid.iter().map(move |&d| CellStats {
                t,
                delta: d,
                site: vec![SiteMoments::new(n); n_obs],
                windowed: vec![vec![SiteMoments::new(n); n_obs]; cfg.epsilon_grid.len()],
                f_pairs: match (fp, fm) {
                    (Some(_), Some(_)) => Some(vec![PairMoments::default(); n]),
                    _ => None,
                },
            })
        })
        .collect();
    let mut total_jumps = 0;
    run_replicates(cfg, |out| {
        total_jumps += out.jumps;
        for (cell, values) in cells.iter_mut().zip(&out.cells) {
            for (o, v) in values.iter().enumerate() {
                cell.site[o].push(v)?;
                for (e, &eps) in cfg.epsilon_grid.iter().enumerate() {
                    cell.windowed[e][o].push(&window_average_profile(v, eps)?)?;
                }
            }
            if let (Some(pairs), Some(a), Some(b)) = (cell.f_pairs.as_mut(), fp, fm) {
                for (s, p) in pairs.iter_mut().enumerate() {
                    p.push(values[a][s], values[b][s]);
                }
            }
        }
        Ok(())
    })?;
    Ok(EnsembleResult {
        config: cfg.clone(),
        cells,
        total_jumps,
    })
}
