use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::kmc::{ModelParams, ProfileShape, RateFamily};
use crate::observables::SiteObservable;

pub const CONFIG_SCHEMA: &str = "surface-hydro/experiment/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub k: f64,
    pub n: usize,
    #[serde(default = "default_rates")]
    pub rates: RateFamily,
}

fn default_rates() -> RateFamily {
    RateFamily::Metropolis
}

/// One KMC ensemble experiment.
///
/// Times, windows and widths are macroscopic: `t = s / N^4` for unscaled
/// clock `s`, and positions live on the unit torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: String,
    pub model: ModelSection,
    pub initial: ProfileShape,
    pub n_samples: usize,
    pub master_seed: u64,
    /// Measurement times, increasing.
    pub times: Vec<f64>,
    /// Time-averaging widths; 0 means instantaneous.
    pub delta_grid: Vec<f64>,
    /// Spatial window half-widths.
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_observables")]
    pub observables: Vec<SiteObservable>,
    pub output_dir: PathBuf,
    /// Replicates simulated per parallel batch.
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
}

fn default_observables() -> Vec<SiteObservable> {
    SiteObservable::ALL.to_vec()
}

fn default_chunk() -> usize {
    64
}

impl ExperimentConfig {
    pub fn new(
        k: f64,
        n: usize,
        initial: ProfileShape,
        n_samples: usize,
        times: Vec<f64>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            model: ModelSection {
                k,
                n,
                rates: RateFamily::Metropolis,
            },
            initial,
            n_samples,
            master_seed: 1,
            times,
            delta_grid: vec![0.0],
            epsilon_grid: vec![0.05],
            observables: default_observables(),
            output_dir: output_dir.into(),
            chunk_size: default_chunk(),
        }
    }

    pub fn params(&self) -> Result<ModelParams, HarnessError> {
        Ok(ModelParams::new(
            self.model.k,
            self.model.n,
            self.model.rates,
        )?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema != CONFIG_SCHEMA {
            return bad(format!("unsupported schema {:?}", self.schema));
        }
        self.params()?;
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if self.times.is_empty() || self.delta_grid.is_empty() || self.epsilon_grid.is_empty() {
            return bad("times, delta_grid and epsilon_grid must be nonempty".into());
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("times must be finite and nonnegative".into());
        }
        if self.times.windows(2).any(|p| p[1] <= p[0]) {
            return bad("times must be strictly increasing".into());
        }
        if self
            .delta_grid
            .iter()
            .any(|d| !(d.is_finite() && *d >= 0.0))
        {
            return bad("delta_grid entries must be >= 0".into());
        }
        if self.epsilon_grid.iter().any(|e| !(*e > 0.0 && *e <= 0.5)) {
            return bad("epsilon_grid entries must lie in (0, 1/2]".into());
        }
        if self.observables.is_empty() {
            return bad("no observables requested".into());
        }
        if self.chunk_size == 0 {
            return bad("chunk_size must be positive".into());
        }
        Ok(())
    }

    /// Latest time any recorder needs.
    pub fn horizon(&self) -> f64 {
        let dmax = self.delta_grid.iter().cloned().fold(0.0, f64::max);
        self.times.last().copied().unwrap_or(0.0) + dmax
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String, HarnessError> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Named configurations for the standard experiments.
///
/// `Desk` presets run on a workstation in minutes; `Paper` presets use the
/// published lattice sizes and operating points and need a cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Local-Gibbs falsification, sinusoidal initial condition, `K = 1`.
    GibbsTest,
    /// Rough local-equilibrium diagnostics at `K = 2`.
    RoughLe,
    /// Current fitting from the reserved `sin^2` initial condition at `K = 2`.
    Sigma,
    /// Current fitting at weak coupling `K = 1/4`, where `sigma` stays near 1.
    SigmaWeak,
    /// PDE verification from the exponential initial condition.
    VerifyExp,
    /// PDE verification from the sinusoidal initial condition.
    VerifySin,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::GibbsTest,
        Preset::RoughLe,
        Preset::Sigma,
        Preset::SigmaWeak,
        Preset::VerifyExp,
        Preset::VerifySin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::GibbsTest => "gibbs-test",
            Preset::RoughLe => "rough-le",
            Preset::Sigma => "sigma",
            Preset::SigmaWeak => "sigma-weak",
            Preset::VerifyExp => "verify-exp",
            Preset::VerifySin => "verify-sin",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Lattice sizes of a multi-level study: the diagnostics compare
    /// consecutive levels, the verification compares the last two.
    pub fn levels(self, scale: Scale) -> Vec<usize> {
        let desk = scale == Scale::Desk;
        match self {
            Preset::RoughLe if desk => vec![100, 200, 400],
            Preset::RoughLe => vec![1000, 2000, 4000],
            Preset::VerifyExp | Preset::VerifySin if desk => vec![128, 256],
            Preset::VerifyExp | Preset::VerifySin => vec![1000, 2000, 4000],
            _ => vec![self.default_n(scale)],
        }
    }

    fn default_n(self, scale: Scale) -> usize {
        match (self, scale) {
            (Preset::GibbsTest, _) => 400,
            (Preset::RoughLe, Scale::Desk) => 400,
            (Preset::Sigma | Preset::SigmaWeak, Scale::Desk) => 128,
            (Preset::VerifyExp | Preset::VerifySin, Scale::Desk) => 256,
            (_, Scale::Paper) => 4000,
        }
    }

    /// Curve-test and spline settings that go with the `Sigma*` presets.
    pub fn sigma_settings(self, scale: Scale) -> super::sigma::SigmaSettings {
        let mut s = super::sigma::SigmaSettings::default();
        if scale == Scale::Desk {
            // A 128-site lattice has few distinct window means per bin, and
            // the clouds carry a few hundred points rather than thousands.
            s.fit.max_gap_fraction = 0.25;
            s.fit.smoothing_weight = 0.95;
        }
        s
    }

    /// Configuration for lattice size `n` (or the preset's default).
    pub fn config(
        self,
        scale: Scale,
        n: Option<usize>,
        out: impl Into<PathBuf>,
    ) -> ExperimentConfig {
        let desk = scale == Scale::Desk;
        let n = n.unwrap_or(self.default_n(scale));
        let unscaled = |s: f64| s / (n as f64).powi(4);
        let sites = |m: f64| m / n as f64;
        match self {
            Preset::GibbsTest => {
                // Burn in for 1000 unscaled time units, then average over 1000.
                let t = unscaled(1e3);
                let mut c = ExperimentConfig::new(
                    1.0,
                    n,
                    ProfileShape::Sin { amplitude: 0.0075 },
                    if desk { 50 } else { 1000 },
                    vec![t],
                    out,
                );
                c.delta_grid = vec![t];
                c.epsilon_grid = vec![sites(0.5)];
                c.observables = vec![SiteObservable::FPlus, SiteObservable::FMinus];
                c
            }
            Preset::RoughLe => {
                let t = if desk { 1e-7 } else { 1e-8 };
                let mut c = ExperimentConfig::new(
                    2.0,
                    n,
                    ProfileShape::Sin { amplitude: 0.0075 },
                    if desk { 100 } else { 1000 },
                    vec![t],
                    out,
                );
                c.delta_grid = vec![t];
                c.epsilon_grid = vec![0.01, 0.02, 0.04, 0.08];
                c.observables = vec![SiteObservable::W, SiteObservable::W2, SiteObservable::J];
                c
            }
            Preset::Sigma | Preset::SigmaWeak => {
                let weak = self == Preset::SigmaWeak;
                let k = if weak { 0.25 } else { 2.0 };
                let (times, deltas, eps, samples) = match (desk, weak) {
                    // Small lattices need late times before the cloud
                    // flattens; from N = 256 on, earlier times suffice and
                    // each replicate is costly.
                    (true, false) if n <= 128 => (
                        vec![unscaled(2.4e4), unscaled(3e4)],
                        vec![unscaled(3e3), unscaled(6e3)],
                        vec![sites(1.0), sites(2.0), sites(3.0)],
                        64,
                    ),
                    (true, false) => (
                        vec![unscaled(1.2e5), unscaled(1.6e5)],
                        vec![unscaled(2e3), unscaled(4e3)],
                        vec![sites(1.0), sites(2.0), sites(3.0)],
                        8,
                    ),
                    (true, true) => (
                        vec![unscaled(6e3), unscaled(9e3)],
                        vec![unscaled(1.5e3), unscaled(3e3)],
                        vec![sites(1.0), sites(2.0), sites(3.0)],
                        32,
                    ),
                    (false, _) => (
                        vec![1e-9, 2e-9],
                        vec![2e-10, 4e-10],
                        vec![0.001, 0.0015, 0.002, 0.003],
                        1000,
                    ),
                };
                let mut c = ExperimentConfig::new(
                    k,
                    n,
                    ProfileShape::SinSquared { amplitude: 0.003 },
                    samples,
                    times,
                    out,
                );
                c.delta_grid = deltas;
                c.epsilon_grid = eps;
                c.observables = vec![SiteObservable::W, SiteObservable::J];
                c
            }
            Preset::VerifyExp | Preset::VerifySin => {
                let shape = if self == Preset::VerifyExp {
                    ProfileShape::ExpSin { amplitude: 0.001 }
                } else {
                    ProfileShape::Sin { amplitude: 0.0075 }
                };
                let t = if desk { 1e-5 } else { 2e-8 };
                // Per-site increment noise grows as N shrinks; scale the
                // replicate count so small lattices are not the bottleneck.
                let samples = (40.0 * (256.0 / n as f64).powi(3)).round().max(40.0) as usize;
                let mut c = ExperimentConfig::new(
                    2.0,
                    n,
                    shape,
                    if desk { samples } else { 1000 },
                    vec![0.0, t],
                    out,
                );
                c.epsilon_grid = vec![sites(4.0).min(0.5)];
                c.observables = vec![SiteObservable::Height, SiteObservable::W];
                c
            }
        }
    }
}
