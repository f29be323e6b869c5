//! Experiment orchestration: configuration files and presets, seeded
//! parallel ensembles, run manifests, the fitting and verification
//! pipelines, and figure data.

mod config;
mod ensemble;
mod figures;
mod gibbs;
mod le;
mod manifest;
mod output;
mod sigma;
mod simulate;
pub mod svg;
mod verify;

use thiserror::Error;

pub use config::{ExperimentConfig, ModelSection, Preset, Scale, CONFIG_SCHEMA};
pub use ensemble::{run_ensemble, run_replicates, CellStats, EnsembleResult, ReplicateOutput};
pub use figures::{
    emit_figure_data, emit_local_gibbs, emit_pde_comparison, emit_sigma, sigma_rows, FigureId,
    SigmaRow,
};
pub use gibbs::{
    gibbs_from_ensemble, gibbs_rows, pipeline_gibbs, GibbsRow, GIBBS_FILE, GIBBS_REPORT_FILE,
};
pub use le::{diagnose_le, pipeline_diagnose_le, LeReport, LeSettings, LE_REPORT_FILE};
pub use manifest::{standard_decisions, RunManifest, RunStatus, MANIFEST_FILE, MANIFEST_SCHEMA};
pub use output::{write_rows, write_text};
pub use sigma::{
    clouds_from_ensemble, fit_sigma_from_slices, pipeline_sigma, BurnInRow, SigmaFit,
    SigmaSettings, SyntheticClouds, TimeSlice, BURN_IN_FILE, CLOUD_FILE, SIGMA_FILE, SWEEP_FILE,
};
pub use simulate::{pipeline_simulate, stats_rows, StatsRow, SITE_STATS_FILE, WINDOW_STATS_FILE};
pub use verify::{
    pipeline_verify_pde, verify_against_pde, LevelSummary, ProfileRow, VerifyReport,
    VerifySettings, VERIFY_PROFILES_FILE, VERIFY_SUMMARY_FILE,
};

use crate::current::FitError;
use crate::diagnostics::DiagnosticError;
use crate::kmc::KmcError;
use crate::observables::ObservableError;
use crate::pde::PdeError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("refusing to reuse {dir}: it holds outputs of {existing}, requested {requested}")]
    RefuseOverwrite {
        dir: String,
        existing: String,
        requested: String,
    },
    #[error(transparent)]
    Kmc(#[from] KmcError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Diagnostic(#[from] DiagnosticError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
