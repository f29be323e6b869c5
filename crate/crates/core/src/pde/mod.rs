//! Numerical solution of the macroscopic equations: the height equation
//! `h_t = -(J_hat(h_xxx))_x`, its third-derivative and slope forms, the
//! height reconstruction from `w`, and the minimizing-movement solver with
//! its energy and decay diagnostics.

mod field;
mod io;
mod law;
mod linalg;
mod solver;
mod variational;

use thiserror::Error;

pub use field::{
    reconstruct_h_from_w, second_difference, slope_of, third_derivative, third_difference,
    FieldKind, PdeField, MIN_GRID,
};
pub use io::{load_snapshots, read_snapshot, save_snapshots, write_snapshot, write_trajectory_csv};
pub use law::{psi_eval, CurrentLaw, Psi};
pub use linalg::{CyclicBand, CyclicBandLu, DenseLu};
pub use solver::{
    integrate, solve_h_pde, solve_w_pde, solve_z_pde, HeightSystem, SemiDiscrete, SlopeSystem,
    SolverConfig, SolverStats, ThirdDerivSystem, Trajectory,
};
pub use variational::{
    gradient_flow_solve, phi_eval, phi_gradient, proximal_step, DecayRates, GradientFlowReport,
    ProximalResult, VariationalConfig,
};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("grid has {0} points; at least {MIN_GRID} are required")]
    GridTooSmall(usize),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("field is not mean-zero (integral = {0:e})")]
    NotMeanZero(f64),
    #[error("field kind mismatch: expected {expected:?}, found {found:?}")]
    KindMismatch {
        expected: FieldKind,
        found: FieldKind,
    },
    #[error("step size collapsed at t = {t:e} (step {step:e}): {reason}")]
    StepCollapse { t: f64, step: f64, reason: String },
    #[error("singular linear system")]
    SingularMatrix,
    #[error(
        "inner iteration did not converge after {iterations} steps (gradient norm {gradient:e})"
    )]
    NonConvergence { iterations: usize, gradient: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
