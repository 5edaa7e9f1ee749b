use std::collections::{BTreeMap, BTreeSet};

use crate::agent_runtime::{AccessTier, AuditTrail, EventKind, NewRecord, PurgeReport};
use crate::catalog::{ConflictRule, Resolution};
use crate::ids::{measure, AgentId, MeasureId, Minutes, RecordId, RuleId};

use super::incident::baseline_deadline;
use super::{OrchestrationError, ORCHESTRATION_OWNER};

/// A proposed logging step to be checked against the minimisation policy.
#[derive(Clone, Debug, PartialEq)]
pub struct LoggingContext {
    pub event_kind: EventKind,
    pub subject_identifying: bool,
    pub requested_tier: AccessTier,
}

/// One documentation field and whether it is commercially confidential.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisclosureField {
    pub name: String,
    pub confidential: bool,
}

/// Inputs for the five resolution descriptors. Each rule reads only its own
/// slot; a missing slot is a `MissingContext` error.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConflictContext {
    pub logging: Option<LoggingContext>,
    pub retention_now: Option<Minutes>,
    pub assessments: Option<Vec<String>>,
    pub regimes: Option<BTreeMap<String, Minutes>>,
    /// An incident for these regimes already exists and is reused.
    pub incident_open: bool,
    pub disclosure: Option<Vec<DisclosureField>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResolutionAction {
    TieredLogging { pseudonymize: bool, tier: AccessTier },
    GraduatedRetention(PurgeReport),
    ConsolidatedAssessment { replaces: usize, sections: Vec<String> },
    StrictestClockTriage { baseline: Minutes, notifications: usize, reused_incident: bool },
    TieredDisclosure { public: BTreeSet<String>, regulator: BTreeSet<String> },
}

impl ResolutionAction {
    fn label(&self) -> &'static str {
        match self {
            ResolutionAction::TieredLogging { .. } => "TieredLogging",
            ResolutionAction::GraduatedRetention(_) => "GraduatedRetention",
            ResolutionAction::ConsolidatedAssessment { .. } => "ConsolidatedAssessment",
            ResolutionAction::StrictestClockTriage { .. } => "StrictestClockTriage",
            ResolutionAction::TieredDisclosure { .. } => "TieredDisclosure",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionOutcome {
    pub rule: RuleId,
    pub action: ResolutionAction,
    pub evidence: RecordId,
    /// Implementing measures whose mechanism executed something new.
    pub executed: Vec<MeasureId>,
}

fn missing(rule: RuleId, what: &'static str) -> OrchestrationError {
    OrchestrationError::MissingContext { rule, what }
}

/// Dispatches a conflict rule to its implementing mechanism and appends an
/// evidence record naming the rule and the action taken.
pub fn resolve_conflict(
    rule: &ConflictRule,
    ctx: &ConflictContext,
    trail: &mut AuditTrail,
    now: Minutes,
) -> Result<ResolutionOutcome, OrchestrationError> {
    let id = rule.id;
    let (action, executed) = match rule.resolution {
        Resolution::TieredLogging => {
            let l = ctx.logging.as_ref().ok_or_else(|| missing(id, "logging"))?;
            // identifying content never goes below Oversight and is always pseudonymised
            let tier = if l.subject_identifying && l.requested_tier == AccessTier::Public {
                AccessTier::Oversight
            } else {
                l.requested_tier
            };
            (ResolutionAction::TieredLogging { pseudonymize: l.subject_identifying, tier }, Vec::new())
        }
        Resolution::GraduatedRetention => {
            let now_r = ctx.retention_now.ok_or_else(|| missing(id, "retention_now"))?;
            let report = trail.apply_retention(now_r);
            (ResolutionAction::GraduatedRetention(report), rule.implementing_measures.clone())
        }
        Resolution::ConsolidatedAssessment => {
            let a = ctx.assessments.as_ref().ok_or_else(|| missing(id, "assessments"))?;
            let sections: BTreeSet<String> = a.iter().cloned().collect();
            (
                ResolutionAction::ConsolidatedAssessment {
                    replaces: a.len(),
                    sections: sections.into_iter().collect(),
                },
                rule.implementing_measures.clone(),
            )
        }
        Resolution::StrictestClockTriage => {
            let r = ctx.regimes.as_ref().ok_or_else(|| missing(id, "regimes"))?;
            let baseline = baseline_deadline(r).ok_or(OrchestrationError::EmptyRegimeSet)?;
            let executed = if ctx.incident_open { Vec::new() } else { rule.implementing_measures.clone() };
            (
                ResolutionAction::StrictestClockTriage {
                    baseline,
                    notifications: r.len(),
                    reused_incident: ctx.incident_open,
                },
                executed,
            )
        }
        Resolution::TieredDisclosure => {
            let fields = ctx.disclosure.as_ref().ok_or_else(|| missing(id, "disclosure"))?;
            let regulator: BTreeSet<String> = fields.iter().map(|f| f.name.clone()).collect();
            let public = fields.iter().filter(|f| !f.confidential).map(|f| f.name.clone()).collect();
            (ResolutionAction::TieredDisclosure { public, regulator }, rule.implementing_measures.clone())
        }
    };
    let evidence = trail.append(
        NewRecord::new(AgentId::new(ORCHESTRATION_OWNER), now, EventKind::GovernanceEvidence)
            .field("rule", id)
            .field("action", action.label())
            .field("dispatcher", measure(2)),
    )?;
    Ok(ResolutionOutcome { rule: id, action, evidence, executed })
}
