use serde::{Deserialize, Serialize};

use super::DiagnosticError;
use crate::observables::window_average_profile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Smooth,
    Rough,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughnessReport {
    /// Metric at the largest lattice.
    pub metric: f64,
    pub n_values: Vec<usize>,
    pub per_n_metrics: Vec<f64>,
    pub verdict: Smoothness,
}

impl RoughnessReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("test: roughness\n");
        for (n, m) in self.n_values.iter().zip(&self.per_n_metrics) {
            s.push_str(&format!("metric_N{n}: {m:.6e}\n"));
        }
        s.push_str(&format!("verdict: {:?}\n", self.verdict).to_lowercase());
        s
    }
}

/// Largest neighbour increment `|v_{i+1} - v_i|` over the neighbourhoods
/// `|i - p| <= radius` of the probe sites `p` (periodic indexing).
pub fn roughness_metric(
    profile: &[f64],
    probe_sites: &[usize],
    radius: usize,
) -> Result<f64, DiagnosticError> {
    let n = profile.len();
    if radius == 0 {
        return Err(DiagnosticError::InvalidInput(
            "radius must be at least 1".into(),
        ));
    }
    if 2 * radius + 1 > n {
        return Err(DiagnosticError::InvalidInput(format!(
            "probe neighbourhood of radius {radius} exceeds a lattice of {n} sites"
        )));
    }
    let mut metric: f64 = 0.0;
    for &p in probe_sites {
        for off in 0..=2 * radius {
            let i = (p + n + off - radius) % n;
            metric = metric.max((profile[(i + 1) % n] - profile[i]).abs());
        }
    }
    Ok(metric)
}

/// Probe sites at fixed macroscopic positions, so neighbourhoods correspond
/// across lattice sizes.
pub fn probe_sites_at(positions: &[f64], n: usize) -> Vec<usize> {
    positions
        .iter()
        .map(|&x| (((x.rem_euclid(1.0)) * n as f64).round() as usize + n - 1) % n)
        .collect()
}

/// Classify a sequence of metrics measured at increasing lattice sizes.
///
/// Rough: the metric stays above `noise` and does not decrease by more than
/// `noise` between successive sizes. Smooth: it decreases strictly at every
/// refinement, or is below `noise` throughout.
pub fn classify_roughness(
    n_values: &[usize],
    per_n_metrics: &[f64],
    noise: f64,
) -> Result<RoughnessReport, DiagnosticError> {
    if n_values.len() != per_n_metrics.len() || n_values.len() < 2 {
        return Err(DiagnosticError::InvalidInput(
            "need matching metrics for at least two lattice sizes".into(),
        ));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DiagnosticError::InvalidInput(
            "lattice sizes must increase".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = per_n_metrics.windows(2).map(|w| (w[0], w[1])).collect();
    let verdict = if per_n_metrics.iter().all(|&m| m <= noise) {
        Smoothness::Smooth
    } else if pairs.iter().all(|&(a, b)| b >= a - noise) && per_n_metrics.iter().all(|&m| m > noise)
    {
        Smoothness::Rough
    } else if pairs.iter().all(|&(a, b)| b < a) {
        Smoothness::Smooth
    } else {
        Smoothness::Inconclusive
    };
    Ok(RoughnessReport {
        metric: *per_n_metrics.last().unwrap(),
        n_values: n_values.to_vec(),
        per_n_metrics: per_n_metrics.to_vec(),
        verdict,
    })
}

/// Smallest window half-width in `epsilon_grid` whose window-averaged profile
/// has neighbour increments below `theta_fraction` times the profile range.
pub fn select_epsilon(
    profile: &[f64],
    epsilon_grid: &[f64],
    theta_fraction: f64,
) -> Result<f64, DiagnosticError> {
    let mut grid = epsilon_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut fallback = None;
    for &eps in &grid {
        let smooth = window_average_profile(profile, eps)?;
        let (lo, hi) = smooth
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let range = hi - lo;
        let n = smooth.len();
        let metric = (0..n)
            .map(|i| (smooth[(i + 1) % n] - smooth[i]).abs())
            .fold(0.0, f64::max);
        if metric <= theta_fraction * range {
            return Ok(eps);
        }
        fallback = Some(eps);
    }
    fallback.ok_or_else(|| DiagnosticError::InvalidInput("empty epsilon grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * i as f64 / n as f64).sin())
            .collect()
    }

    fn alternating(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    #[test]
    fn sine_is_smooth() {
        let ns = [64, 128, 256];
        let m: Vec<f64> = ns
            .iter()
            .map(|&n| roughness_metric(&sine(n), &probe_sites_at(&[0.0, 0.5], n), 3).unwrap())
            .collect();
        assert!(m[0] < 0.11 && m[2] < 0.03);
        assert_eq!(
            classify_roughness(&ns, &m, 1e-3).unwrap().verdict,
            Smoothness::Smooth
        );
    }

    #[test]
    fn alternating_is_rough() {
        let ns = [64, 128, 256];
        let m: Vec<f64> = ns
            .iter()
            .map(|&n| roughness_metric(&alternating(n), &[0, n / 2], 2).unwrap())
            .collect();
        assert!(m.iter().all(|&v| v == 2.0));
        assert_eq!(
            classify_roughness(&ns, &m, 1e-3).unwrap().verdict,
            Smoothness::Rough
        );
    }

    #[test]
    fn oversized_neighbourhood_rejected() {
        assert!(roughness_metric(&[0.0; 8], &[0], 4).is_err());
    }

    #[test]
    fn shift_and_rotation() {
        let v: Vec<f64> = (0..40).map(|i| ((i * 17) % 7) as f64).collect();
        let base = roughness_metric(&v, &[5, 20], 3).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + 100.0).collect();
        assert_eq!(roughness_metric(&shifted, &[5, 20], 3).unwrap(), base);
        let rotated: Vec<f64> = (0..40).map(|i| v[(i + 40 - 7) % 40]).collect();
        assert_eq!(roughness_metric(&rotated, &[12, 27], 3).unwrap(), base);
    }

    #[test]
    fn epsilon_selection_prefers_smallest_smooth_window() {
        let n = 200;
        let v: Vec<f64> = sine(n)
            .iter()
            .zip(alternating(n))
            .map(|(s, a)| s + 0.5 * a)
            .collect();
        let eps = select_epsilon(&v, &[0.0025, 0.01, 0.02, 0.05], 0.1).unwrap();
        assert!(eps >= 0.01);
    }
}
