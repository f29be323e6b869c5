use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cloud::SigmaPointCloud;
use super::spline::{smoothing_spline, CubicSpline};
use super::{j_gibbs, FitError};

pub const SIGMA_FORMAT: &str = "sigma-curve/1";

/// `sigma(omega) ~ a + b omega^2` near the origin, fitted for `|omega| < delta1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCore {
    pub a: f64,
    pub b: f64,
    pub delta0: f64,
    pub delta1: f64,
}

/// Least-squares `(a, b)` minimizing `sum (J - (a + b w^2) J_gibbs(w))^2` over
/// the points with `|w| < delta1`, in the original current scale.
pub fn quadratic_core_from_points(
    omega: &[f64],
    current: &[f64],
    k: f64,
    delta1: f64,
) -> Result<(f64, f64), FitError> {
    let (mut s00, mut s01, mut s11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    let mut first = None;
    let mut distinct = false;
    for (&w, &j) in omega.iter().zip(current) {
        if w.abs() >= delta1 {
            continue;
        }
        used += 1;
        match first {
            None => first = Some(w * w),
            Some(f) if f != w * w => distinct = true,
            _ => {}
        }
        let g = j_gibbs(w, k);
        let w2 = w * w;
        s00 += g * g;
        s01 += w2 * g * g;
        s11 += w2 * w2 * g * g;
        r0 += j * g;
        r1 += j * w2 * g;
    }
    if used < 3 {
        return Err(FitError::InvalidInput(format!(
            "core fit needs three points with |omega| < {delta1}, found {used}"
        )));
    }
    let det = s00 * s11 - s01 * s01;
    if !distinct || !(det.abs() > 1e-13 * s00 * s11) {
        return Err(FitError::Singular("core normal equations".into()));
    }
    let a = (r0 * s11 - r1 * s01) / det;
    let b = (s00 * r1 - s01 * r0) / det;
    Ok((a, b))
}

/// Core fit over every cloud point (retained or set aside) with `|omega| < delta1`.
pub fn fit_quadratic_core(cloud: &SigmaPointCloud, delta1: f64) -> Result<(f64, f64), FitError> {
    let (om, cur): (Vec<f64>, Vec<f64>) = cloud.all_points().unzip();
    quadratic_core_from_points(&om, &cur, cloud.meta.k, delta1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Fill-in radius; defaults to `0.05 W`.
    pub delta0: Option<f64>,
    /// Core-fit radius; defaults to `2 delta0`.
    pub delta1: Option<f64>,
    /// Half-width of the spline domain; defaults to `min(|omega_min|, omega_max)`.
    pub domain: Option<f64>,
    pub smoothing_weight: f64,
    pub floor: f64,
    pub symmetrize: bool,
    /// Maximum asymmetry tolerated when not symmetrizing.
    pub symmetry_tolerance: Option<f64>,
    /// Largest gap between abscissas as a fraction of `W`.
    pub max_gap_fraction: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            delta0: None,
            delta1: None,
            domain: None,
            smoothing_weight: 0.99,
            floor: 0.05,
            symmetrize: true,
            symmetry_tolerance: None,
            max_gap_fraction: 0.1,
        }
    }
}

impl FitSettings {
    /// `(W, delta0, delta1)` for a cloud with the given retained omega range.
    pub fn resolve(&self, omega_range: (f64, f64)) -> Result<(f64, f64, f64), FitError> {
        let w = self
            .domain
            .unwrap_or_else(|| omega_range.0.abs().min(omega_range.1));
        if !(w > 0.0) {
            return Err(FitError::InvalidInput(format!(
                "omega range {omega_range:?} does not straddle zero"
            )));
        }
        let d0 = self.delta0.unwrap_or(0.05 * w);
        let d1 = self.delta1.unwrap_or(2.0 * d0);
        if !(d1 > d0) {
            return Err(FitError::InvalidInput("delta1 must exceed delta0".into()));
        }
        Ok((w, d0, d1))
    }
}

/// Fitted correction `sigma(omega) = J_hat / J_gibbs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaCurve {
    pub format: String,
    pub k: f64,
    pub core: QuadraticCore,
    /// Half-width `W` of the fitted domain.
    pub domain: f64,
    pub spline: CubicSpline,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub smoothing_weight: f64,
    pub symmetrize: bool,
    pub floor: f64,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl SigmaCurve {
    /// `sigma == value` everywhere.
    pub fn constant(value: f64, k: f64) -> Self {
        Self {
            format: SIGMA_FORMAT.into(),
            k,
            core: QuadraticCore {
                a: value,
                b: 0.0,
                delta0: 0.0,
                delta1: 0.0,
            },
            domain: 0.0,
            spline: CubicSpline::constant(value),
            sigma_left: value,
            sigma_right: value,
            smoothing_weight: 1.0,
            symmetrize: true,
            floor: value.min(0.05),
            provenance: BTreeMap::new(),
        }
    }

    /// Unsymmetrized spline value.
    pub fn raw(&self, omega: f64) -> f64 {
        self.spline.eval(omega)
    }

    pub fn eval(&self, omega: f64) -> f64 {
        if self.symmetrize {
            0.5 * (self.spline.eval(omega) + self.spline.eval(-omega))
        } else {
            self.spline.eval(omega)
        }
    }

    pub fn derivative(&self, omega: f64) -> f64 {
        if self.symmetrize {
            0.5 * (self.spline.derivative(omega) - self.spline.derivative(-omega))
        } else {
            self.spline.derivative(omega)
        }
    }

    /// `J_hat(omega) = sigma(omega) J_gibbs(omega)` with the curve's own `K`.
    pub fn j_hat(&self, omega: f64) -> f64 {
        self.eval(omega) * j_gibbs(omega, self.k)
    }

    /// `integral_{lo}^{hi} sigma`, exact for the piecewise-cubic representation.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if self.symmetrize {
            0.5 * (self.spline.integral(lo, hi) + self.spline.integral(-hi, -lo))
        } else {
            self.spline.integral(lo, hi)
        }
    }

    pub fn is_constant(&self) -> bool {
        self.spline.knots.len() < 2
    }

    /// Half-width over which diagnostics scan the curve.
    pub fn scan_half_width(&self) -> f64 {
        let kn = &self.spline.knots;
        if kn.len() < 2 {
            return 1.0;
        }
        self.domain.max(kn[0].abs()).max(kn[kn.len() - 1].abs())
    }

    fn grid(&self, samples: usize) -> Vec<f64> {
        let w = self.scan_half_width();
        (0..=samples)
            .map(|i| w * i as f64 / samples as f64)
            .collect()
    }

    /// `max |sigma_raw(w) - sigma_raw(-w)|` on `[0, W]`.
    pub fn asymmetry(&self, samples: usize) -> f64 {
        self.grid(samples)
            .iter()
            .map(|&w| (self.raw(w) - self.raw(-w)).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest finite-difference slope of `sigma` on `[0, W]`.
    pub fn min_slope_positive(&self, samples: usize) -> f64 {
        let g = self.grid(samples);
        g.windows(2)
            .map(|p| (self.eval(p[1]) - self.eval(p[0])) / (p[1] - p[0]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest value of `sigma` on `[-W, W]`.
    pub fn min_value(&self, samples: usize) -> f64 {
        self.grid(samples)
            .iter()
            .flat_map(|&w| [self.eval(w), self.eval(-w)])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_toml_string(&self) -> Result<String, FitError> {
        toml::to_string(self).map_err(|e| FitError::Format(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self, FitError> {
        let curve: SigmaCurve =
            toml::from_str(text).map_err(|e| FitError::Format(e.to_string()))?;
        if curve.format != SIGMA_FORMAT {
            return Err(FitError::Format(format!(
                "unsupported format {}",
                curve.format
            )));
        }
        Ok(curve)
    }

    pub fn save(&self, path: &Path) -> Result<(), FitError> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FitError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// `sigma(omega)`.
pub fn eval_sigma(curve: &SigmaCurve, omega: f64) -> f64 {
    curve.eval(omega)
}

/// `J_hat(omega) = sigma(omega) * 2 e^{-3K/2} sinh(K omega)`.
pub fn eval_j_hat(curve: &SigmaCurve, omega: f64, k: f64) -> f64 {
    curve.eval(omega) * j_gibbs(omega, k)
}

/// Smoothing-spline fit of `sigma` with the quadratic core filling `|omega| < delta0`.
pub fn fit_sigma(
    cloud: &SigmaPointCloud,
    core: (f64, f64),
    settings: &FitSettings,
) -> Result<SigmaCurve, FitError> {
    let range = cloud
        .omega_range()
        .ok_or_else(|| FitError::InvalidInput("empty point cloud".into()))?;
    let (w, d0, d1) = settings.resolve(range)?;
    let (a, b) = core;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&om, &r) in cloud.omega.iter().zip(&cloud.ratio) {
        if om.abs() >= d0 && om.abs() <= w {
            xs.push(om);
            ys.push(r);
        }
    }
    let mut fill: Vec<f64> = cloud
        .near_omega
        .iter()
        .chain(&cloud.omega)
        .copied()
        .filter(|om| om.abs() < d0)
        .collect();
    if fill.is_empty() {
        fill = (0..5).map(|j| d0 * (-0.8 + 0.4 * j as f64)).collect();
    }
    for om in fill {
        xs.push(om);
        ys.push(a + b * om * om);
    }

    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let max_gap = settings.max_gap_fraction * w;
    let mut prev = -w;
    for &x in sorted.iter().chain(std::iter::once(&w)) {
        if x - prev > max_gap {
            return Err(FitError::CoverageGap { lo: prev, hi: x });
        }
        prev = prev.max(x);
    }

    let spline = smoothing_spline(&xs, &ys, &vec![1.0; xs.len()], settings.smoothing_weight)?;
    let n = spline.knots.len();
    let curve = SigmaCurve {
        format: SIGMA_FORMAT.into(),
        k: cloud.meta.k,
        core: QuadraticCore {
            a,
            b,
            delta0: d0,
            delta1: d1,
        },
        domain: w,
        sigma_left: spline.values[0],
        sigma_right: spline.values[n - 1],
        spline,
        smoothing_weight: settings.smoothing_weight,
        symmetrize: settings.symmetrize,
        floor: settings.floor,
        provenance: BTreeMap::from([
            ("n".to_string(), cloud.meta.n.to_string()),
            ("t".to_string(), cloud.meta.t.to_string()),
            ("epsilon".to_string(), cloud.meta.epsilon.to_string()),
            ("delta".to_string(), cloud.meta.delta.to_string()),
            ("points".to_string(), cloud.len().to_string()),
        ]),
    };
    let min = curve.min_value(400);
    if min < settings.floor {
        return Err(FitError::InvariantViolation(format!(
            "sigma drops to {min:.4} below the floor {}",
            settings.floor
        )));
    }
    if let (false, Some(tol)) = (settings.symmetrize, settings.symmetry_tolerance) {
        let asym = curve.asymmetry(400);
        if asym > tol {
            return Err(FitError::InvariantViolation(format!(
                "asymmetry {asym:.4} exceeds {tol}"
            )));
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::current::cloud::CloudMeta;

    fn synthetic(sigma: impl Fn(f64) -> f64, k: f64, delta0: f64) -> SigmaPointCloud {
        let om: Vec<f64> = (0..501).map(|i| -2.5 + 5.0 * i as f64 / 500.0).collect();
        let cur: Vec<f64> = om.iter().map(|&w| sigma(w) * j_gibbs(w, k)).collect();
        SigmaPointCloud::from_points(
            &om,
            &cur,
            delta0,
            CloudMeta {
                n: 501,
                k,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn core_recovers_exact_quadratic() {
        let om: Vec<f64> = (0..40).map(|i| -0.3 + 0.6 * i as f64 / 39.0).collect();
        let cur: Vec<f64> = om
            .iter()
            .map(|&w| (2.0 + 3.0 * w * w) * j_gibbs(w, 2.0))
            .collect();
        let (a, b) = quadratic_core_from_points(&om, &cur, 2.0, 0.5).unwrap();
        assert!((a - 2.0).abs() < 1e-10 && (b - 3.0).abs() < 1e-10);
    }

    #[test]
    fn core_rejects_degenerate_abscissas() {
        let om = [0.1, 0.1, -0.1, 0.1];
        let cur = [1.0, 2.0, 3.0, 4.0];
        assert!(quadratic_core_from_points(&om, &cur, 1.0, 0.5).is_err());
    }

    #[test]
    fn constant_sigma_fit() {
        let cloud = synthetic(|_| 1.5, 2.0, 0.1);
        let core = fit_quadratic_core(&cloud, 0.2).unwrap();
        assert!((core.0 - 1.5).abs() < 1e-9 && core.1.abs() < 1e-8);
        let curve = fit_sigma(&cloud, core, &FitSettings::default()).unwrap();
        for w in [-4.0, -2.5, -1.0, 0.0, 0.03, 2.0, 9.0] {
            assert!((curve.eval(w) - 1.5).abs() < 1e-9, "w={w}");
        }
        assert!((curve.sigma_left - 1.5).abs() < 1e-9);
    }

    #[test]
    fn even_quartic_with_light_smoothing() {
        let f = |w: f64| 1.0 + 0.1 * w.powi(4);
        let cloud = synthetic(f, 1.0, 0.1);
        let core = fit_quadratic_core(&cloud, 0.2).unwrap();
        let settings = FitSettings {
            smoothing_weight: 0.999_999,
            delta0: Some(0.1),
            delta1: Some(0.2),
            ..Default::default()
        };
        let curve = fit_sigma(&cloud, core, &settings).unwrap();
        let err = (0..=100)
            .map(|i| -2.3 + 4.6 * i as f64 / 100.0)
            .map(|w| (curve.eval(w) - f(w)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "err {err}");
    }

    #[test]
    fn floor_violation_is_reported() {
        let cloud = synthetic(|_| 0.01, 1.0, 0.1);
        let core = fit_quadratic_core(&cloud, 0.2).unwrap();
        assert!(matches!(
            fit_sigma(&cloud, core, &FitSettings::default()),
            Err(FitError::InvariantViolation(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let cloud = synthetic(|w| 1.0 + 0.2 * w * w, 2.0, 0.1);
        let core = fit_quadratic_core(&cloud, 0.2).unwrap();
        let curve = fit_sigma(&cloud, core, &FitSettings::default()).unwrap();
        let text = curve.to_toml_string().unwrap();
        let back = SigmaCurve::from_toml_str(&text).unwrap();
        assert_eq!(back, curve);
    }

    #[test]
    fn tail_is_constant_times_gibbs() {
        let cloud = synthetic(|w| 1.0 + 0.2 * w * w, 2.0, 0.1);
        let core = fit_quadratic_core(&cloud, 0.2).unwrap();
        let curve = fit_sigma(&cloud, core, &FitSettings::default()).unwrap();
        let edge = curve.eval(2.5);
        for w in [3.0, 5.0] {
            assert!((eval_j_hat(&curve, w, 2.0) - edge * j_gibbs(w, 2.0)).abs() < 1e-12);
        }
        assert_eq!(eval_j_hat(&curve, 0.0, 2.0), 0.0);
    }
}
