use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ensemble::run_replicates;
use super::manifest::RunManifest;
use super::output::write_rows;
use super::HarnessError;
use crate::current::SigmaCurve;
use crate::kmc::{site_position, ProfileShape};
use crate::observables::{window_average_profile, SiteObservable};
use crate::pde::{solve_h_pde, third_derivative, CurrentLaw, FieldKind, PdeField, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    /// PDE grid size; the lattice size of each level when absent.
    pub grid: Option<usize>,
    pub rtol: f64,
    pub atol: f64,
    /// Bootstrap resamples of the replicate set.
    pub bootstrap: usize,
    /// Required separation in bootstrap standard errors.
    pub z: f64,
    pub bootstrap_seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            grid: Some(512),
            rtol: 1e-8,
            atol: 1e-14,
            bootstrap: 200,
            z: 2.0,
            bootstrap_seed: 17,
        }
    }
}

/// Profiles at one lattice size and time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: usize,
    pub t: f64,
    pub field: String,
    pub x: f64,
    pub kmc: f64,
    pub stderr: f64,
    pub pde_sigma: f64,
    pub pde_one: f64,
}

/// Sup-norm distances at one lattice size (at its final time).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub samples: usize,
    pub t: f64,
    /// `sup |E[h_N(t) - h_N(0)] - (h(t) - h0)|` for the corrected PDE.
    pub dh_sigma: f64,
    pub dh_one: f64,
    pub dh_sigma_se: f64,
    pub dh_one_se: f64,
    /// Bootstrap standard error of `dh_one - dh_sigma`.
    pub gap_se: f64,
    /// `sup |E wbar - h_xxx|` for both PDEs.
    pub dw_sigma: f64,
    pub dw_one: f64,
    /// Largest `|h(t) - h0|` of the corrected PDE.
    pub signal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub levels: Vec<LevelSummary>,
    pub profiles: Vec<ProfileRow>,
    /// Corrected PDE closer than the uncorrected one at the largest `N`.
    pub separated: bool,
    /// Corrected distance decreases between consecutive lattice sizes.
    pub decreasing: bool,
    pub z: f64,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.separated && self.decreasing
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("test: corrected-vs-uncorrected\n");
        for l in &self.levels {
            s += &format!(
                "N={} M={} t={:e}: dh_sigma={:.4e}±{:.1e} dh_one={:.4e}±{:.1e} gap_se={:.1e} dw_sigma={:.4e} dw_one={:.4e}\n",
                l.n, l.samples, l.t, l.dh_sigma, l.dh_sigma_se, l.dh_one, l.dh_one_se, l.gap_se, l.dw_sigma, l.dw_one
            );
        }
        s += &format!(
            "separated: {}\ndecreasing: {}\npass: {}\n",
            self.separated,
            self.decreasing,
            self.pass()
        );
        s
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

struct PdePair {
    /// Increments and third derivatives at the sites, corrected then uncorrected.
    dh: [Vec<f64>; 2],
    w: [Vec<f64>; 2],
}

fn solve_pair(
    shape: ProfileShape,
    n: usize,
    t: f64,
    laws: &[CurrentLaw; 2],
    settings: &VerifySettings,
) -> Result<PdePair, HarnessError> {
    let g = settings.grid.unwrap_or(n).max(crate::pde::MIN_GRID);
    let h0 = PdeField::sample(FieldKind::Height, g, |x| shape.eval(x))?;
    let solver = SolverConfig {
        rtol: settings.rtol,
        atol: settings.atol,
        ..SolverConfig::default()
    };
    let mut dh: [Vec<f64>; 2] = Default::default();
    let mut w: [Vec<f64>; 2] = Default::default();
    for (slot, law) in laws.iter().enumerate() {
        let ht = if t > 0.0 {
            solve_h_pde(&h0, law, t, &solver)?.last().clone()
        } else {
            h0.clone()
        };
        let mut inc = ht.clone();
        for (v, v0) in inc.values.iter_mut().zip(&h0.values) {
            *v -= v0;
        }
        let wt = third_derivative(&ht);
        dh[slot] = (0..n)
            .map(|k| inc.interpolate(site_position(k, n)))
            .collect();
        // The third difference stored at site k is centred half a site to its right.
        w[slot] = (0..n)
            .map(|k| wt.interpolate(site_position(k, n) + 0.5 / n as f64))
            .collect();
    }
    Ok(PdePair { dh, w })
}

/// Compares one ensemble with the corrected and uncorrected PDEs.
///
/// `cfg.times` must start at 0; the last time is the comparison time and
/// `cfg.epsilon_grid[0]` is the window for `wbar`.
fn verify_level(
    cfg: &ExperimentConfig,
    laws: &[CurrentLaw; 2],
    settings: &VerifySettings,
) -> Result<(LevelSummary, Vec<ProfileRow>), HarnessError> {
    if cfg.times.first() != Some(&0.0) || cfg.times.len() < 2 {
        return Err(HarnessError::Config(
            "verification times must start at 0 and contain a later time".into(),
        ));
    }
    let obs_h = cfg
        .observables
        .iter()
        .position(|&o| o == SiteObservable::Height);
    let obs_w = cfg.observables.iter().position(|&o| o == SiteObservable::W);
    let (Some(oh), Some(ow)) = (obs_h, obs_w) else {
        return Err(HarnessError::Missing("observables h and w".into()));
    };
    let n = cfg.model.n;
    let n3 = (n as f64).powi(3);
    let nd = cfg.delta_grid.len();
    let last = cfg.times.len() - 1;
    let eps = cfg.epsilon_grid[0];

    // Per-replicate increments and windowed w at the comparison time, plus
    // running sums for the intermediate times.
    let mut inc_reps: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_samples);
    let mut w_reps: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_samples);
    run_replicates(cfg, |out| {
        let h0 = &out.cells[0][oh];
        let ht = &out.cells[last * nd][oh];
        inc_reps.push(ht.iter().zip(h0).map(|(a, b)| (a - b) / n3).collect());
        w_reps.push(window_average_profile(&out.cells[last * nd][ow], eps)?);
        Ok(())
    })?;
    let m = inc_reps.len();
    let mean_of = |reps: &[Vec<f64>], idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let mut s = vec![0.0; n];
        let mut c = 0.0;
        for r in idx {
            for (a, b) in s.iter_mut().zip(&reps[r]) {
                *a += b;
            }
            c += 1.0;
        }
        s.iter().map(|v| v / c).collect()
    };
    let inc_mean = mean_of(&inc_reps, &mut (0..m));
    let w_mean = mean_of(&w_reps, &mut (0..m));
    let se_of = |reps: &[Vec<f64>], mean: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let v = reps.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>();
                (v / ((m - 1).max(1) as f64) / m as f64).sqrt()
            })
            .collect()
    };
    let inc_se = se_of(&inc_reps, &inc_mean);
    let w_se = se_of(&w_reps, &w_mean);

    let t = cfg.times[last];
    let pde = solve_pair(cfg.initial, n, t, laws, settings)?;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.bootstrap_seed ^ (n as u64));
    let (mut bs_sigma, mut bs_one, mut bs_gap) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..settings.bootstrap {
        let mean = mean_of(&inc_reps, &mut (0..m).map(|_| rng.random_range(0..m)));
        let ds = sup_distance(&mean, &pde.dh[0]);
        let d1 = sup_distance(&mean, &pde.dh[1]);
        bs_sigma.push(ds);
        bs_one.push(d1);
        bs_gap.push(d1 - ds);
    }
    let summary = LevelSummary {
        n,
        samples: m,
        t,
        dh_sigma: sup_distance(&inc_mean, &pde.dh[0]),
        dh_one: sup_distance(&inc_mean, &pde.dh[1]),
        dh_sigma_se: std_dev(&bs_sigma),
        dh_one_se: std_dev(&bs_one),
        gap_se: std_dev(&bs_gap),
        dw_sigma: sup_distance(&w_mean, &pde.w[0]),
        dw_one: sup_distance(&w_mean, &pde.w[1]),
        signal: pde.dh[0].iter().fold(0.0, |a, v| a.max(v.abs())),
    };
    let mut rows = Vec::with_capacity(2 * n);
    for (field, mean, se, p) in [
        ("h_increment", &inc_mean, &inc_se, &pde.dh),
        ("w_window", &w_mean, &w_se, &pde.w),
    ] {
        for k in 0..n {
            let x = site_position(k, n)
                + if field == "w_window" {
                    0.5 / n as f64
                } else {
                    0.0
                };
            rows.push(ProfileRow {
                n,
                t,
                field: field.into(),
                x,
                kmc: mean[k],
                stderr: se[k],
                pde_sigma: p[0][k],
                pde_one: p[1][k],
            });
        }
    }
    Ok((summary, rows))
}

/// Verdict on whether the ensembles follow the corrected PDE.
///
/// Levels must be ordered by increasing lattice size and share the initial
/// profile, `K` and the comparison time.
pub fn verify_against_pde(
    levels: &[ExperimentConfig],
    sigma: &SigmaCurve,
    settings: &VerifySettings,
) -> Result<VerifyReport, HarnessError> {
    let first = levels
        .first()
        .ok_or_else(|| HarnessError::Missing("lattice sizes".into()))?;
    for c in levels {
        if c.model.k != first.model.k
            || c.initial != first.initial
            || c.times.last() != first.times.last()
        {
            return Err(HarnessError::Config(
                "levels must share K, initial profile and comparison time".into(),
            ));
        }
    }
    if (sigma.k - first.model.k).abs() > 1e-12 {
        return Err(HarnessError::Config(format!(
            "sigma was fitted at K={} but the ensembles use K={}",
            sigma.k, first.model.k
        )));
    }
    let laws = [
        CurrentLaw::corrected(sigma.clone()),
        CurrentLaw::gibbs(first.model.k),
    ];
    let mut summaries = Vec::new();
    let mut profiles = Vec::new();
    for c in levels {
        let (s, rows) = verify_level(c, &laws, settings)?;
        summaries.push(s);
        profiles.extend(rows);
    }
    let top = summaries[summaries.len() - 1];
    let separated = top.dh_one - top.dh_sigma > settings.z * top.gap_se;
    let decreasing = summaries.windows(2).all(|p| {
        let se = (p[0].dh_sigma_se.powi(2) + p[1].dh_sigma_se.powi(2)).sqrt();
        p[0].dh_sigma - p[1].dh_sigma > settings.z * se
    });
    Ok(VerifyReport {
        levels: summaries,
        profiles,
        separated,
        decreasing: decreasing && levels.len() >= 2,
        z: settings.z,
    })
}

pub const VERIFY_SUMMARY_FILE: &str = "verify_summary.csv";
pub const VERIFY_PROFILES_FILE: &str = "verify_profiles.csv";

/// Runs [`verify_against_pde`] and persists the summary, profiles and a
/// manifest in `dir`.
pub fn pipeline_verify_pde(
    levels: &[ExperimentConfig],
    sigma: &SigmaCurve,
    settings: &VerifySettings,
    dir: &std::path::Path,
) -> Result<VerifyReport, HarnessError> {
    let mut text = String::new();
    for c in levels {
        text += &c.to_toml()?;
        text += "\n";
    }
    text += &toml::to_string(settings).map_err(|e| HarnessError::Config(e.to_string()))?;
    text += &sigma.to_toml_string()?;
    let seed = levels.first().map(|c| c.master_seed).unwrap_or(0);
    let reps = levels.iter().map(|c| c.n_samples as u64).max().unwrap_or(0);
    let mut manifest = RunManifest::begin(dir, "verify-pde", &text, seed, reps)?;
    manifest.decide("bootstrap_resamples", settings.bootstrap);
    manifest.decide("separation_z", settings.z);
    manifest.decide("pde_grid", format!("{:?}", settings.grid));
    manifest.decide("pde_rtol", settings.rtol);
    manifest.save(dir)?;
    let report = verify_against_pde(levels, sigma, settings)?;
    write_rows(&dir.join(VERIFY_SUMMARY_FILE), &report.levels)?;
    write_rows(&dir.join(VERIFY_PROFILES_FILE), &report.profiles)?;
    manifest.record_file(dir, VERIFY_SUMMARY_FILE)?;
    manifest.record_file(dir, VERIFY_PROFILES_FILE)?;
    manifest.decide("verdict", if report.pass() { "pass" } else { "fail" });
    manifest.finish(dir)?;
    Ok(report)
}
