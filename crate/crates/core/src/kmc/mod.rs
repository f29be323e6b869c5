//! Exact kinetic Monte Carlo for the conservative surface-diffusion lattice
//! model on the periodic lattice `Z / N Z`.

mod initial;
mod rates;
mod state;
mod sum_tree;

use thiserror::Error;

pub use initial::{site_position, InitialProfile, ProfileShape};
pub use rates::{arrhenius_rates, metropolis_rates, RateFamily, RATE_SATURATION};
pub use state::{
    hamiltonian, kmc_step, replicate_rng, run_until, sample_initial_state,
    sample_initial_state_with, Direction, JumpEvent, ModelParams, Recorder, RunStats, SurfaceState,
    MIN_SITES, TIME_SCALE_EXPONENT,
};

#[derive(Debug, Error)]
pub enum KmcError {
    #[error("rate exponent {exponent} exceeds the saturation bound")]
    RateSaturation { exponent: f64 },
    #[error("initial profile is not finite at site {site}")]
    NonFiniteProfile { site: usize },
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} sites, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("cached {0} disagree with a fresh recomputation")]
    CacheMismatch(String),
    #[error("total jump rate is zero")]
    ZeroTotalRate,
}
