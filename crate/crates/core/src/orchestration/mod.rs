//! Orchestration-layer mechanisms over the interaction space between agents.

mod assessment;
mod attribution;
mod conflict;
mod correlate;
mod incident;
mod topology;

use std::collections::BTreeSet;

pub use assessment::{consolidate_assessment, ConsolidatedAssessment, RegimeSection, TopologyUpdateDirective};
pub use attribution::{attribute, AttributionReport};
pub use conflict::{
    resolve_conflict, ConflictContext, DisclosureField, LoggingContext, ResolutionAction, ResolutionOutcome,
};
pub use correlate::{
    correlate, CascadeEvent, CascadeState, CascadeTracker, Correlation, EmergentImpactFlag, DEFAULT_WINDOW,
};
pub use incident::{baseline_deadline, open_incident, IncidentRecord, IncidentStatus, Notification};
pub use topology::{issue_clearance, Coupling, CouplingRisk, Denial, DenialReason, Topology, TopologySnapshot};

use crate::agent_runtime::{AuditTrail, RuntimeError};
use crate::ids::{AgentId, Minutes, RecordId, RuleId};

/// Owner id for records the orchestration layer writes itself.
pub const ORCHESTRATION_OWNER: &str = "orchestration";

#[derive(Debug, thiserror::Error)]
pub enum OrchestrationError {
    #[error("declaration from unregistered agent {0}")]
    UnknownAgent(AgentId),
    #[error("dependency on resource `{0}` that no agent provides")]
    DanglingResource(String),
    #[error("incident needs at least one regime")]
    EmptyRegimeSet,
    #[error("joint oversight needs at least two authorities")]
    SingleAuthority,
    #[error("record {0} is not in the trail")]
    UnknownRecord(RecordId),
    #[error("rule {rule} is missing context: {what}")]
    MissingContext { rule: RuleId, what: &'static str },
    #[error("incident {0} is still open")]
    OpenIncident(u64),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OversightSession {
    pub cascade_id: u64,
    pub convened_at: Minutes,
    pub participants: BTreeSet<String>,
    pub acknowledged: BTreeSet<String>,
    /// Agent-level trail excerpts shared with every participant.
    pub briefing: Vec<RecordId>,
}

/// Convenes cross-agency oversight for a cascade. The briefing carries the
/// contributing agents' records up to `now`.
pub fn escalate_joint_oversight(
    cascade: &CascadeEvent,
    authorities: &BTreeSet<String>,
    trail: &AuditTrail,
    now: Minutes,
) -> Result<OversightSession, OrchestrationError> {
    if authorities.len() < 2 {
        return Err(OrchestrationError::SingleAuthority);
    }
    let briefing = trail
        .records()
        .iter()
        .filter(|r| r.timestamp <= now && cascade.agents.contains(&r.agent_id))
        .map(|r| r.record_id)
        .collect();
    Ok(OversightSession {
        cascade_id: cascade.cascade_id,
        convened_at: now,
        participants: authorities.clone(),
        acknowledged: authorities.clone(),
        briefing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_runtime::{EventKind, NewRecord, Pseudonymizer, RetentionPolicy};

    fn cascade() -> CascadeEvent {
        CascadeEvent {
            cascade_id: 1,
            signals: vec![],
            agents: BTreeSet::from(["E".into(), "T".into(), "S".into()]),
            domains: BTreeSet::new(),
            opened_at: 30,
            window_used: 30,
            known_risk: false,
        }
    }

    #[test]
    fn three_authorities_and_briefing_subset() {
        let mut trail = AuditTrail::new(RetentionPolicy::default(), Pseudonymizer::new("k"));
        for (a, t) in [("E", 5), ("T", 15), ("X", 20), ("S", 40)] {
            trail.append(NewRecord::new(a.into(), t, EventKind::Telemetry)).unwrap();
        }
        let auth = BTreeSet::from(["RTA".to_string(), "DEWA".into(), "Dubai Police".into()]);
        let s = escalate_joint_oversight(&cascade(), &auth, &trail, 30).unwrap();
        assert_eq!(s.participants.len(), 3);
        assert_eq!(s.acknowledged, s.participants);
        assert_eq!(s.briefing, vec![RecordId(1), RecordId(2)]);
        assert!(s.briefing.iter().all(|id| trail.contains(*id)));
    }

    #[test]
    fn single_authority_is_rejected() {
        let trail = AuditTrail::new(RetentionPolicy::default(), Pseudonymizer::new("k"));
        let err = escalate_joint_oversight(&cascade(), &BTreeSet::from(["RTA".to_string()]), &trail, 30).unwrap_err();
        assert!(matches!(err, OrchestrationError::SingleAuthority));
    }
}
