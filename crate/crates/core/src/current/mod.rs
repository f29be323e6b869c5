//! Estimation of the current correction `sigma = J_hat / J_gibbs` from
//! locally equilibrated simulation statistics.

mod cloud;
mod curve;
mod spline;

use thiserror::Error;

pub use cloud::{
    assemble_point_cloud, binned_medians, burn_in_test, select_epsilon_delta, BinnedCurve,
    BurnInReport, CloudMeta, CurveTestConfig, GridCloud, Selection, SigmaPointCloud, SweepEntry,
};
pub use curve::{
    eval_j_hat, eval_sigma, fit_quadratic_core, fit_sigma, quadratic_core_from_points, FitSettings,
    QuadraticCore, SigmaCurve, SIGMA_FORMAT,
};
pub use spline::{smoothing_spline, CubicSpline};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("point clouds do not overlap")]
    InsufficientOverlap,
    /// Carries the full sweep so it can be inspected and persisted.
    #[error("no (epsilon, delta) satisfies both tolerances; extend the grid")]
    Inconclusive { sweep: Vec<SweepEntry> },
    #[error("abscissas leave a gap on ({lo}, {hi})")]
    CoverageGap { lo: f64, hi: f64 },
    #[error("fitted curve violates an invariant: {0}")]
    InvariantViolation(String),
    #[error("sigma file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Local Gibbs estimate of the macroscopic current, `2 e^{-3K/2} sinh(K omega)`.
pub fn j_gibbs(omega: f64, k: f64) -> f64 {
    2.0 * (-1.5 * k).exp() * (k * omega).sinh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gibbs_current_values() {
        assert_eq!(j_gibbs(0.0, 2.0), 0.0);
        let direct = 2.0 * (-3.0f64).exp() * 2.0f64.sinh();
        assert!((j_gibbs(1.0, 2.0) - direct).abs() < 1e-15);
        assert!((j_gibbs(1.0, 2.0) / 0.361_155 - 1.0).abs() < 1e-4);
        assert_eq!(j_gibbs(-0.7, 1.3), -j_gibbs(0.7, 1.3));
    }
}
