//! Tests of the local-equilibrium conditions: convergence of window-averaged
//! means, variance decay, collapse of nonlinear observables onto a function of
//! the local mean, boundedness, roughness classification, and comparison with
//! the local Gibbs product measure.

mod convergence;
mod gibbs;
mod roughness;

use thiserror::Error;

use crate::observables::ObservableError;

pub use convergence::{
    ols_slope, periodic_interp, test_boundedness, test_e_convergence, test_ef_collapse,
    test_v_decay, BoundednessReport, BoundednessSample, CollapsePoints, CollapseReport,
    ConvergenceReport, DecayReport, ProfileAtN,
};
pub use gibbs::{
    gibbs_exp_moment, gibbs_f_expectations, gibbs_z, local_gibbs_test, sample_gibbs,
    truncation_bound, GibbsReference, GibbsVerdict, LocalGibbsConfig, LocalGibbsReport,
};
pub use roughness::{
    classify_roughness, probe_sites_at, roughness_metric, select_epsilon, RoughnessReport,
    Smoothness,
};

#[derive(Debug, Error)]
pub enum DiagnosticError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("estimated expectation at site {site} is not positive; increase the sample size")]
    NegativeExpectation { site: usize },
    #[error("curves do not share enough of their omega range")]
    InsufficientOverlap,
    #[error(transparent)]
    Observable(#[from] ObservableError),
}
