//! Scenario simulation: fixture loading, the event loop, trace emission and
//! the activation summary.

mod engine;
pub mod scenario;
pub mod summary;
pub mod trace;

use std::sync::OnceLock;

pub use engine::{run, run_session, run_with, RunOptions, Session};
pub use scenario::{load_scenario, Input, Scenario, ScenarioEvent, FIXTURES};
pub use summary::{summarize, ActivationSummary, COORDINATION_MEASURES};
pub use trace::{
    emit_trace, emit_tsv, parse_tsv, ActivationTrace, DecisionAnnotation, GovernanceEvent, HumanReviewTask, RowLayer,
    RunMode, TraceFormat, TSV_HEADER,
};

use crate::catalog::Catalog;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario schema error: {0}")]
    Schema(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("unknown trace format `{0}` (expected tsv or text)")]
    UnknownFormat(String),
}

pub(crate) fn shipped_catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(Catalog::shipped)
}
