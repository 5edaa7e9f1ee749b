//! City-layer mechanisms: registry, tiered disclosure, collective fairness
//! monitoring, contestation and explanation rendering.

mod contestation;
mod fairness;
mod registry;

pub use contestation::{
    render_explanation, CaseId, CaseStatus, CaseStore, ContestationCase, ContestationConfig, LANGUAGES,
};
pub use fairness::{monitor_fairness, EnforcementEvent, FairnessFlag, Zone, Zones, DEFAULT_THRESHOLD};
pub use registry::{
    publish_disclosure, AutonomyRange, DisclosurePackage, DisclosureTier, GovernanceBasis, Registry, RegistryEntry,
    DEFAULT_REGISTRY,
};

use crate::ids::{AgentId, RecordId};

#[derive(Debug, thiserror::Error)]
pub enum CityError {
    #[error("registry schema error: {0}")]
    Schema(String),
    #[error("system {0} is already registered")]
    DuplicateSystem(AgentId),
    #[error("unknown system {0}")]
    UnknownSystem(AgentId),
    #[error("unknown zone `{0}`")]
    UnknownZone(String),
    #[error("invalid zones: {0}")]
    InvalidZones(String),
    #[error("fairness threshold must be greater than 1, got {0}")]
    InvalidThreshold(f64),
    #[error("record {0} is not in the trail")]
    UnknownRecord(RecordId),
    #[error("unknown case {0}")]
    UnknownCase(CaseId),
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
}
