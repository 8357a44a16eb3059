//! Trace invariant checkers, bound reports and experiment grids.

mod bounds;
mod check;
mod experiment;

pub use bounds::{declared_steps, fitted_constant, relative_spread, renaming_lower_bound, BoundPoint};
pub use check::{check_trace, check_trace_by_id, CheckContext, HelpGrid, Suite, Violation};
pub use experiment::{
    renaming_violations, rows_to_csv, run_experiment, run_renaming_seed, BoundReport, ExhaustiveStats,
    ExperimentConfig, ExperimentResult, ExperimentSummary, Mode, OutputPaths, ProfileSpec, Row, RunViolations,
    SchedulerChoice, Seeds,
};

use thiserror::Error;

use crate::renaming::RenamingError;
use crate::repository::RepositoryError;
use crate::simcore::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown invariant suite `{0}`")]
    UnknownSuite(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Renaming(#[from] RenamingError),
    #[error(transparent)]
    Repository(#[from] RepositoryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
