use serde::{Deserialize, Serialize};

use super::DiagnosticError;

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Linear interpolation of a periodic profile sampled at `x_grid` (ascending,
/// inside one period of the unit torus).
pub fn periodic_interp(x_grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = x_grid.len();
    let x = x.rem_euclid(1.0);
    let k = x_grid.partition_point(|&g| g <= x);
    let (x0, v0, x1, v1) = if k == 0 {
        (x_grid[n - 1] - 1.0, values[n - 1], x_grid[0], values[0])
    } else if k == n {
        (x_grid[n - 1], values[n - 1], x_grid[0] + 1.0, values[0])
    } else {
        (x_grid[k - 1], values[k - 1], x_grid[k], values[k])
    };
    if x1 == x0 {
        return v0;
    }
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}

/// Window-averaged mean profile at one lattice size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileAtN {
    pub n: usize,
    pub epsilon: f64,
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_values: Vec<usize>,
    /// Sup-norm distance between successive profiles on the coarsest grid.
    pub distances: Vec<f64>,
    pub tolerance: f64,
    pub converged: bool,
}

impl ConvergenceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("test: E-convergence\n");
        for (w, d) in self.n_values.windows(2).zip(&self.distances) {
            s.push_str(&format!("distance_N{}_N{}: {:.6e}\n", w[0], w[1], d));
        }
        s.push_str(&format!(
            "tolerance: {}\nconverged: {}\n",
            self.tolerance, self.converged
        ));
        s
    }
}

/// Cauchy test for window-averaged means at increasing `N`.
///
/// Converged when the last successive distance is within `tolerance` and no
/// distance grows by more than `tolerance` over its predecessor.
pub fn test_e_convergence(
    profiles: &[ProfileAtN],
    tolerance: f64,
) -> Result<ConvergenceReport, DiagnosticError> {
    if profiles.len() < 3 {
        return Err(DiagnosticError::InvalidInput(
            "need profiles at three or more lattice sizes".into(),
        ));
    }
    let coarsest = profiles
        .iter()
        .min_by_key(|p| p.x_grid.len())
        .expect("nonempty");
    let probe = coarsest.x_grid.clone();
    for p in profiles {
        if p.x_grid.is_empty() || p.x_grid.len() != p.values.len() {
            return Err(DiagnosticError::InvalidInput(format!(
                "profile at N = {} is malformed",
                p.n
            )));
        }
        let lo = p.x_grid[0];
        let hi = *p.x_grid.last().unwrap();
        if hi - lo < 0.5 {
            return Err(DiagnosticError::InvalidInput(format!(
                "profile at N = {} does not cover the torus",
                p.n
            )));
        }
    }
    let distances: Vec<f64> = profiles
        .windows(2)
        .map(|w| {
            probe
                .iter()
                .map(|&x| {
                    (periodic_interp(&w[0].x_grid, &w[0].values, x)
                        - periodic_interp(&w[1].x_grid, &w[1].values, x))
                    .abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let last_ok = *distances.last().unwrap() <= tolerance;
    let monotone = distances.windows(2).all(|w| w[1] <= w[0] + tolerance);
    Ok(ConvergenceReport {
        n_values: profiles.iter().map(|p| p.n).collect(),
        distances,
        tolerance,
        converged: last_ok && monotone,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n_values: Vec<usize>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl DecayReport {
    pub fn to_text(&self, name: &str) -> String {
        format!(
            "test: {name}\nslope: {:.6}\nthreshold: {}\npass: {}\n",
            self.slope, self.threshold, self.pass
        )
    }
}

/// Log-log slope of a window-average variance against `N`; passes when the
/// slope is at most `-zeta`.
pub fn test_v_decay(
    n_values: &[usize],
    variances: &[f64],
    zeta: f64,
) -> Result<DecayReport, DiagnosticError> {
    if n_values.len() < 3 || n_values.len() != variances.len() {
        return Err(DiagnosticError::InvalidInput(
            "need variances at three or more lattice sizes".into(),
        ));
    }
    if let Some(v) = variances.iter().find(|&&v| !(v > 0.0)) {
        return Err(DiagnosticError::InvalidInput(format!(
            "nonpositive variance {v}"
        )));
    }
    let lx: Vec<f64> = n_values.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let slope = ols_slope(&lx, &ly);
    Ok(DecayReport {
        n_values: n_values.to_vec(),
        values: variances.to_vec(),
        slope,
        threshold: -zeta,
        pass: slope <= -zeta,
    })
}

/// One `(N, t)` cell of the boundedness study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessSample {
    pub n: usize,
    pub t: f64,
    /// `max_i E[w_i^2]`, whose square root bounds `max_i E|w_i|`.
    pub max_w2: f64,
    /// `max_i |E J(w_i)|`
    pub max_abs_j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub times: Vec<f64>,
    /// Slope of `log sqrt(max E w^2)` against `log N`, per time.
    pub w_slopes: Vec<f64>,
    /// Slope of `log max |E J|` against `log N`, per time.
    pub j_slopes: Vec<f64>,
    pub slope_tolerance: f64,
    /// Whether `max_i E w_i^2` decreases in time at every `N`.
    pub decreasing_in_time: bool,
    pub pass: bool,
}

impl BoundednessReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("test: boundedness\n");
        for ((t, a), b) in self.times.iter().zip(&self.w_slopes).zip(&self.j_slopes) {
            s.push_str(&format!("t_{t:e}: w_slope {a:.4} j_slope {b:.4}\n"));
        }
        s.push_str(&format!(
            "slope_tolerance: {}\ndecreasing_in_time: {}\npass: {}\n",
            self.slope_tolerance, self.decreasing_in_time, self.pass
        ));
        s
    }
}

/// Passes when neither bound grows with `N`: every per-time log-log slope is
/// at most `slope_tolerance`.
pub fn test_boundedness(
    samples: &[BoundednessSample],
    slope_tolerance: f64,
) -> Result<BoundednessReport, DiagnosticError> {
    let mut times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut ns: Vec<usize> = samples.iter().map(|s| s.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if times.len() < 3 || ns.len() < 3 {
        return Err(DiagnosticError::InvalidInput(
            "need three or more times and lattice sizes".into(),
        ));
    }
    let find = |n: usize, t: f64| samples.iter().find(|s| s.n == n && s.t == t);
    let mut w_slopes = Vec::new();
    let mut j_slopes = Vec::new();
    for &t in &times {
        let mut lx = Vec::new();
        let mut lw = Vec::new();
        let mut lj = Vec::new();
        for &n in &ns {
            let s = find(n, t).ok_or_else(|| {
                DiagnosticError::InvalidInput(format!("missing sample N = {n}, t = {t}"))
            })?;
            lx.push((n as f64).ln());
            lw.push(0.5 * s.max_w2.max(f64::MIN_POSITIVE).ln());
            lj.push(s.max_abs_j.max(f64::MIN_POSITIVE).ln());
        }
        w_slopes.push(ols_slope(&lx, &lw));
        j_slopes.push(ols_slope(&lx, &lj));
    }
    let decreasing_in_time = ns.iter().all(|&n| {
        times
            .windows(2)
            .all(|w| find(n, w[1]).unwrap().max_w2 <= find(n, w[0]).unwrap().max_w2)
    });
    let pass = w_slopes
        .iter()
        .chain(&j_slopes)
        .all(|&s| s <= slope_tolerance);
    Ok(BoundednessReport {
        times,
        w_slopes,
        j_slopes,
        slope_tolerance,
        decreasing_in_time,
        pass,
    })
}

/// Points `(omega, f_bar)` with standard errors of `f_bar`, at one lattice size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapsePoints {
    pub n: usize,
    pub omega: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub bin_centers: Vec<f64>,
    /// Binned means per lattice size, `NaN` where a bin is empty.
    pub curves: Vec<Vec<f64>>,
    pub curve_errors: Vec<Vec<f64>>,
    /// Largest distance between any two piecewise-linear curves on the common range.
    pub max_distance: f64,
    /// Largest inter-curve bin difference in units of the propagated standard error.
    pub max_z: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CollapseReport {
    pub fn to_text(&self) -> String {
        format!(
            "test: Ef-collapse\nbins: {}\nmax_distance: {:.6e}\nmax_z: {:.4}\ntolerance: {}\npass: {}\n",
            self.bin_centers.len(),
            self.max_distance,
            self.max_z,
            self.tolerance,
            self.pass
        )
    }
}

fn bin_curve(points: &CollapsePoints, edges: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let bins = edges.len() - 1;
    let mut sum = vec![0.0; bins];
    let mut sum2 = vec![0.0; bins];
    let mut se2 = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for k in 0..points.omega.len() {
        let w = points.omega[k];
        if w < edges[0] || w > edges[bins] {
            continue;
        }
        let b = edges[1..].partition_point(|&e| e < w).min(bins - 1);
        sum[b] += points.value[k];
        sum2[b] += points.value[k] * points.value[k];
        se2[b] += points.stderr[k] * points.stderr[k];
        count[b] += 1;
    }
    let mut mean = vec![f64::NAN; bins];
    let mut err = vec![f64::NAN; bins];
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let c = count[b] as f64;
        let m = sum[b] / c;
        mean[b] = m;
        // Spread of the points inside the bin, or their own standard errors when larger.
        let scatter = if count[b] > 1 {
            ((sum2[b] / c - m * m).max(0.0) * c / (c - 1.0) / c).sqrt()
        } else {
            0.0
        };
        let propagated = (se2[b] / (c * c)).sqrt();
        err[b] = scatter.max(propagated);
    }
    (mean, err)
}

/// Collapse test for `(omega, f_bar)` clouds at several lattice sizes.
///
/// Points are binned by `omega` over the common range; each lattice size gives
/// a piecewise-linear curve through its bin means. Passes when the largest
/// distance between curves is below `tolerance`, and, if `z_max` is given,
/// every bin difference is within `z_max` propagated standard errors.
pub fn test_ef_collapse(
    clouds: &[CollapsePoints],
    bins: usize,
    tolerance: f64,
    z_max: Option<f64>,
) -> Result<CollapseReport, DiagnosticError> {
    if clouds.len() < 2 {
        return Err(DiagnosticError::InvalidInput(
            "need two or more lattice sizes".into(),
        ));
    }
    let lo = clouds
        .iter()
        .map(|c| c.omega.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = clouds
        .iter()
        .map(|c| c.omega.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    if !(hi > lo) || bins == 0 {
        return Err(DiagnosticError::InsufficientOverlap);
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|b| lo + (hi - lo) * b as f64 / bins as f64)
        .collect();
    let centers: Vec<f64> = (0..bins).map(|b| 0.5 * (edges[b] + edges[b + 1])).collect();
    let (curves, curve_errors): (Vec<_>, Vec<_>) =
        clouds.iter().map(|c| bin_curve(c, &edges)).unzip();
    let common: Vec<usize> = (0..bins)
        .filter(|&b| curves.iter().all(|c| c[b].is_finite()))
        .collect();
    if common.len() < 2 {
        return Err(DiagnosticError::InsufficientOverlap);
    }
    let mut max_distance: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            for &k in &common {
                let d = (curves[a][k] - curves[b][k]).abs();
                max_distance = max_distance.max(d);
                let se = (curve_errors[a][k].powi(2) + curve_errors[b][k].powi(2)).sqrt();
                if se > 0.0 {
                    max_z = max_z.max(d / se);
                } else if d > 0.0 {
                    max_z = f64::INFINITY;
                }
            }
        }
    }
    let pass = max_distance < tolerance && z_max.is_none_or(|z| max_z <= z);
    Ok(CollapseReport {
        bin_centers: common.iter().map(|&k| centers[k]).collect(),
        curves: curves
            .iter()
            .map(|c| common.iter().map(|&k| c[k]).collect())
            .collect(),
        curve_errors: curve_errors
            .iter()
            .map(|c| common.iter().map(|&k| c[k]).collect())
            .collect(),
        max_distance,
        max_z,
        tolerance,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn profile(n: usize, f: impl Fn(f64, usize) -> f64) -> ProfileAtN {
        let x_grid: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let values = x_grid.iter().enumerate().map(|(i, &x)| f(x, i)).collect();
        ProfileAtN {
            n,
            epsilon: 0.05,
            x_grid,
            values,
        }
    }

    #[test]
    fn identical_profiles_converge() {
        let ps: Vec<_> = [50, 100, 200]
            .iter()
            .map(|&n| profile(n, |x, _| (2.0 * PI * x).sin()))
            .collect();
        let r = test_e_convergence(&ps, 1e-3).unwrap();
        assert!(r.distances.iter().all(|&d| d < 2e-3));
        assert!(r.converged);
    }

    #[test]
    fn offset_profiles_do_not_converge() {
        let ps = vec![
            profile(50, |_, _| 0.0),
            profile(100, |_, _| 1.0),
            profile(200, |_, _| 0.0),
        ];
        assert!(!test_e_convergence(&ps, 0.5).unwrap().converged);
    }

    #[test]
    fn variance_decay_slopes() {
        let ns = [100, 200, 400, 800];
        let iid: Vec<f64> = ns.iter().map(|&n| 3.0 / n as f64).collect();
        let r = test_v_decay(&ns, &iid, 0.5).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-12 && r.pass);
        let flat = vec![0.2; 4];
        assert!(!test_v_decay(&ns, &flat, 0.5).unwrap().pass);
        assert!(test_v_decay(&ns, &[1.0, 0.0, 1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn boundedness_slopes() {
        let mut s = Vec::new();
        for &n in &[100usize, 200, 400] {
            for (k, &t) in [1e-6, 2e-6, 4e-6].iter().enumerate() {
                s.push(BoundednessSample {
                    n,
                    t,
                    max_w2: 2.0 / (1 + k) as f64,
                    max_abs_j: (n as f64).ln(),
                });
            }
        }
        let strict = test_boundedness(&s, 0.0).unwrap();
        assert!(!strict.pass);
        assert!(strict.decreasing_in_time);
        assert!(test_boundedness(&s, 0.3).unwrap().pass);
    }

    #[test]
    fn collapse_of_identical_curves() {
        let om: Vec<f64> = (0..200).map(|i| -2.0 + 4.0 * i as f64 / 199.0).collect();
        let c = |n, shift: f64| CollapsePoints {
            n,
            omega: om.clone(),
            value: om.iter().map(|w| w * w + shift).collect(),
            stderr: vec![0.0; om.len()],
        };
        let r = test_ef_collapse(&[c(100, 0.0), c(200, 0.0)], 16, 1e-9, None).unwrap();
        assert!(r.max_distance < 1e-12 && r.pass);
        let r = test_ef_collapse(&[c(100, 0.0), c(200, 1.0)], 16, 0.5, None).unwrap();
        assert!((r.max_distance - 1.0).abs() < 1e-12 && !r.pass);
    }

    #[test]
    fn disjoint_ranges_rejected() {
        let a = CollapsePoints {
            n: 10,
            omega: vec![0.0, 1.0],
            value: vec![0.0, 0.0],
            stderr: vec![0.0, 0.0],
        };
        let b = CollapsePoints {
            n: 20,
            omega: vec![2.0, 3.0],
            ..a.clone()
        };
        assert!(matches!(
            test_ef_collapse(&[a, b], 4, 1.0, None),
            Err(DiagnosticError::InsufficientOverlap)
        ));
    }
}
