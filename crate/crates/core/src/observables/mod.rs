//! Estimators for observables of the height, slope and third-difference
//! processes: exact time integrals of step paths, mesoscopic window averages,
//! and mergeable ensemble statistics.

mod path;
mod recorder;
mod stats;

use thiserror::Error;

use crate::kmc::{site_position, RATE_SATURATION};

pub use path::{path_time_average, StepPath};
pub use recorder::{PathRecorder, SiteAverager, SiteObservable};
pub use stats::{ensemble_estimate, MesoSeries, Moments, PairMoments, Reduce, SiteMoments};

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error("empty time window")]
    EmptyWindow,
    #[error("window around x = {x} with epsilon = {epsilon} contains no sites")]
    EmptySpatialWindow { x: f64, epsilon: f64 },
    #[error("invalid step path: {0}")]
    InvalidPath(String),
    #[error("grid shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("need at least {needed} replicates, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("exponent {exponent} exceeds the saturation bound")]
    Saturation { exponent: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn checked_exponent(exponent: f64) -> Result<f64, ObservableError> {
    if !exponent.is_finite() || exponent.abs() > RATE_SATURATION {
        return Err(ObservableError::Saturation { exponent });
    }
    Ok(exponent)
}

/// Microscopic current `J(w) = r+(w) - r-(w) = 2 e^{-3K} sinh(K w)`.
pub fn observable_j(w: f64, k: f64) -> Result<f64, ObservableError> {
    let kw = checked_exponent(k * w)?;
    Ok(2.0 * (-3.0 * k).exp() * kw.sinh())
}

/// `f^{+/-}(z) = exp(+/- 2K (z_{i-1} - 2 z_i + z_{i+1}))` for `sign = +1 / -1`.
pub fn observable_f_pm(z: (i64, i64, i64), k: f64, sign: i8) -> Result<f64, ObservableError> {
    let w = (z.0 - 2 * z.1 + z.2) as f64;
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    Ok(checked_exponent(s * 2.0 * k * w)?.exp())
}

/// Periodic distance between two points of the unit torus.
#[inline]
pub fn torus_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Storage indices of the sites within macroscopic distance `epsilon` of `x`.
pub fn window_indices(n: usize, x: f64, epsilon: f64) -> Vec<usize> {
    if epsilon >= 0.5 {
        return (0..n).collect();
    }
    // Sites exactly on the window edge are included; the slack absorbs rounding in k/N.
    let slack = 1e-12;
    (0..n)
        .filter(|&k| torus_distance(site_position(k, n), x) <= epsilon + slack)
        .collect()
}

/// Mean of `values` over the sites with `|i/N - x| <= epsilon` on the torus.
pub fn window_average(values: &[f64], x: f64, epsilon: f64) -> Result<f64, ObservableError> {
    let idx = window_indices(values.len(), x, epsilon);
    if idx.is_empty() {
        return Err(ObservableError::EmptySpatialWindow { x, epsilon });
    }
    Ok(idx.iter().map(|&k| values[k]).sum::<f64>() / idx.len() as f64)
}

/// Window averages centred on every lattice site `x = (k+1)/N`.
///
/// Uses a running sum over the periodic window, so the cost is `O(N)`.
pub fn window_average_profile(values: &[f64], epsilon: f64) -> Result<Vec<f64>, ObservableError> {
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if epsilon >= 0.5 {
        let mean = values.iter().sum::<f64>() / n as f64;
        return Ok(vec![mean; n]);
    }
    let radius = window_indices(n, site_position(n - 1, n), epsilon).len();
    if radius == 0 {
        return Err(ObservableError::EmptySpatialWindow { x: 0.0, epsilon });
    }
    let half = (radius - 1) / 2;
    let width = 2 * half + 1;
    let mut out = Vec::with_capacity(n);
    let mut sum: f64 = (0..width).map(|j| values[(j + n - half) % n]).sum();
    for k in 0..n {
        out.push(sum / width as f64);
        sum += values[(k + half + 1) % n] - values[(k + n - half) % n];
    }
    // Re-sum exactly so long profiles do not accumulate running-sum drift.
    for (k, v) in out.iter_mut().enumerate() {
        if k % 64 == 0 {
            *v = (0..width)
                .map(|j| values[(k + j + n - half) % n])
                .sum::<f64>()
                / width as f64;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn current_values() {
        assert_eq!(observable_j(0.0, 1.7).unwrap(), 0.0);
        let j = observable_j(1.0, 1.0).unwrap();
        assert!((j - 0.117_020).abs() < 1e-6);
        for w in [-3.0, -0.5, 0.25, 2.0] {
            assert_eq!(
                observable_j(-w, 2.0).unwrap(),
                -observable_j(w, 2.0).unwrap()
            );
        }
    }

    #[test]
    fn f_pm_values() {
        assert_eq!(observable_f_pm((0, 0, 0), 1.0, 1).unwrap(), 1.0);
        assert_eq!(observable_f_pm((0, 0, 0), 1.0, -1).unwrap(), 1.0);
        let fp = observable_f_pm((1, 0, 0), 1.0, 1).unwrap();
        assert!((fp - 2f64.exp()).abs() < 1e-14);
        let fm = observable_f_pm((3, -1, 2), 0.7, -1).unwrap();
        let fp = observable_f_pm((3, -1, 2), 0.7, 1).unwrap();
        assert!((fp * fm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_average_example() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let a = window_average(&v, 0.0, 0.15).unwrap();
        assert!((a - 16.0 / 3.0).abs() < 1e-14);
        assert_eq!(window_average(&v, 0.3, 0.5).unwrap(), 4.5);
    }

    #[test]
    fn profile_matches_pointwise_windows() {
        let n = 50;
        let v: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
        for eps in [0.02, 0.05, 0.1, 0.3] {
            let prof = window_average_profile(&v, eps).unwrap();
            for k in 0..n {
                let direct = window_average(&v, site_position(k, n), eps).unwrap();
                assert!((prof[k] - direct).abs() < 1e-12, "eps={eps} k={k}");
            }
        }
    }
}
