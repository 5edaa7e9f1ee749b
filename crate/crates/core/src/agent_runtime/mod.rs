//! Agent-layer mechanisms: runtime policy enforcement, envelope drift
//! detection, audit logging and reassessment triggers, plus the
//! declaration-and-alert interface consumed by the orchestration layer.

pub mod audit;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use audit::{
    AccessTier, AuditRecord, AuditTrail, EventKind, NewRecord, Payload, Pseudonymizer, PurgeReport, RetentionClass,
    RetentionPolicy,
};

use crate::calibration::{assign_governance_level, layer_activation, Activation, GovernanceLevel, SystemProfile};
use crate::ids::{measure, AgentId, MeasureId, Minutes, RecordId};

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("agent {0} is not registered")]
    UnregisteredAgent(AgentId),
    #[error("agent {0} is already registered")]
    DuplicateAgent(AgentId),
    #[error("agent {agent} has no envelope bound for metric `{metric}`")]
    UnknownMetric { agent: AgentId, metric: String },
    #[error("cause link {0} does not resolve to an existing record")]
    DanglingCauseLink(RecordId),
    #[error("cause link {cause} is not earlier than t={at}")]
    CauseNotEarlier { cause: RecordId, at: Minutes },
    #[error("invalid operating envelope: {0}")]
    InvalidEnvelope(String),
}

crate::str_enum! {
    pub enum OperatingMode { Normal, Degraded, Halted }
}

crate::str_enum! {
    pub enum CouplingClass { SafetyCoupled, DataCoupled, Advisory }
}

crate::str_enum! {
    pub enum Severity { Warning, Degraded }
}

crate::str_enum! {
    pub enum Decision { Allow, Block, Escalate }
}

crate::str_enum! {
    pub enum ChangeKind { OperationalChange, IntegrationChange, EnvironmentChange }
}

/// Soft bounds `[min, max]` and optional hard limits. Leaving the soft band
/// is a warning; leaving a hard limit means degraded operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub hard_min: Option<f64>,
    #[serde(default)]
    pub hard_max: Option<f64>,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max, hard_min: None, hard_max: None }
    }

    fn check(&self, value: f64) -> Option<(BoundViolated, Severity)> {
        if value < self.min {
            let severity =
                if self.hard_min.is_some_and(|h| value < h) { Severity::Degraded } else { Severity::Warning };
            Some((BoundViolated::Below(self.min), severity))
        } else if value > self.max {
            let severity =
                if self.hard_max.is_some_and(|h| value > h) { Severity::Degraded } else { Severity::Warning };
            Some((BoundViolated::Above(self.max), severity))
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingEnvelope {
    pub metrics: BTreeMap<String, Bounds>,
    #[serde(default = "default_k")]
    pub consecutive_breach_k: u32,
}

fn default_k() -> u32 {
    1
}

impl OperatingEnvelope {
    pub fn new(metrics: BTreeMap<String, Bounds>, consecutive_breach_k: u32) -> Result<Self, RuntimeError> {
        let envelope = Self { metrics, consecutive_breach_k };
        envelope.validate()?;
        Ok(envelope)
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.consecutive_breach_k == 0 {
            return Err(RuntimeError::InvalidEnvelope("consecutive_breach_k must be >= 1".into()));
        }
        for (name, b) in &self.metrics {
            let ordered =
                b.min <= b.max && b.hard_min.is_none_or(|h| h <= b.min) && b.hard_max.is_none_or(|h| h >= b.max);
            if !ordered || b.min.is_nan() || b.max.is_nan() {
                return Err(RuntimeError::InvalidEnvelope(format!("metric `{name}` has inconsistent bounds")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundViolated {
    Below(f64),
    Above(f64),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dependency {
    pub resource: String,
    pub class: CouplingClass,
}

/// Emitted on registration and on every operating-mode change.
#[derive(Clone, Debug, PartialEq)]
pub struct Declaration {
    pub agent_id: AgentId,
    pub authority: String,
    pub dependencies: BTreeSet<Dependency>,
    pub provides: BTreeSet<String>,
    pub operating_mode: OperatingMode,
    pub timestamp: Minutes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftSignal {
    pub agent_id: AgentId,
    pub metric: String,
    pub observed: f64,
    pub bound: BoundViolated,
    pub domain: String,
    pub timestamp: Minutes,
    pub severity: Severity,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposedAction {
    pub id: String,
    #[serde(default)]
    pub resources: BTreeSet<String>,
    /// Target values for envelope metrics the action would set.
    #[serde(default)]
    pub setpoints: BTreeMap<String, f64>,
    #[serde(skip)]
    pub cause_links: BTreeSet<RecordId>,
}

/// Orchestration-issued permission for one action against one topology version.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClearanceToken {
    pub agent: AgentId,
    pub action_id: String,
    pub topology_version: u64,
}

/// What the agent layer needs to know about the interaction topology.
pub trait TopologyView {
    fn version(&self) -> u64;
    fn is_safety_coupled(&self, resource: &str) -> bool;
}

#[derive(Clone, Debug, PartialEq)]
pub enum Guard {
    /// Neither the coupling nor the bounds guard had anything to check.
    Vacuous,
    Coupling(BTreeSet<String>),
    Bounds(BTreeSet<String>),
    Cleared,
    WithinBounds,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutcome {
    pub decision: Decision,
    pub guard: Guard,
    pub record: RecordId,
    /// True when a Block or Escalate is handed to the orchestration layer.
    pub escalated: bool,
}

impl PolicyOutcome {
    /// Runtime enforcement counts as activated when a guard had something to check.
    pub fn engaged(&self) -> bool {
        self.guard != Guard::Vacuous
    }
}

pub const RISK_REASSESSMENT: MeasureId = measure(20);
pub const CONFORMITY_REASSESSMENT: MeasureId = measure(23);

#[derive(Clone, Debug, PartialEq)]
pub struct ReassessmentTask {
    pub id: u64,
    pub agent: AgentId,
    pub change: ChangeKind,
    pub tick: Minutes,
    pub tags: [MeasureId; 2],
    pub topology_version: Option<u64>,
    pub outcome: Option<ReassessmentOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReassessmentOutcome {
    pub alters_conformity: bool,
}

impl ReassessmentTask {
    /// Risk review always runs once assessed; conformity re-assessment only
    /// when the change invalidates conformity assumptions.
    pub fn activated_measures(&self) -> Vec<MeasureId> {
        match self.outcome {
            None => Vec::new(),
            Some(o) if o.alters_conformity => vec![RISK_REASSESSMENT, CONFORMITY_REASSESSMENT],
            Some(_) => vec![RISK_REASSESSMENT],
        }
    }
}

#[derive(Clone, Debug)]
struct AgentState {
    profile: SystemProfile,
    level: GovernanceLevel,
    envelope: OperatingEnvelope,
    dependencies: BTreeSet<Dependency>,
    provides: BTreeSet<String>,
    mode: OperatingMode,
    breach_ticks: BTreeMap<String, u32>,
    signalled: BTreeMap<String, Severity>,
}

/// Registered agents and their runtime state. One writer per agent.
#[derive(Clone, Debug, Default)]
pub struct AgentRuntime {
    agents: BTreeMap<AgentId, AgentState>,
    outbox: Vec<Declaration>,
    tasks: Vec<ReassessmentTask>,
}

impl AgentRuntime {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        profile: SystemProfile,
        envelope: OperatingEnvelope,
        dependencies: BTreeSet<Dependency>,
        provides: BTreeSet<String>,
        now: Minutes,
    ) -> Result<Declaration, RuntimeError> {
        envelope.validate()?;
        if self.agents.contains_key(&profile.id) {
            return Err(RuntimeError::DuplicateAgent(profile.id));
        }
        let level = assign_governance_level(&profile);
        let id = profile.id.clone();
        self.agents.insert(
            id.clone(),
            AgentState {
                profile,
                level,
                envelope,
                dependencies,
                provides,
                mode: OperatingMode::Normal,
                breach_ticks: BTreeMap::new(),
                signalled: BTreeMap::new(),
            },
        );
        Ok(self.declare(&id, now))
    }

    fn state(&self, agent: &AgentId) -> Result<&AgentState, RuntimeError> {
        self.agents.get(agent).ok_or_else(|| RuntimeError::UnregisteredAgent(agent.clone()))
    }

    fn declare(&mut self, agent: &AgentId, now: Minutes) -> Declaration {
        let s = &self.agents[agent];
        let d = Declaration {
            agent_id: agent.clone(),
            authority: s.profile.authority.clone(),
            dependencies: s.dependencies.clone(),
            provides: s.provides.clone(),
            operating_mode: s.mode,
            timestamp: now,
        };
        self.outbox.push(d.clone());
        d
    }

    pub fn is_registered(&self, agent: &AgentId) -> bool {
        self.agents.contains_key(agent)
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentId> {
        self.agents.keys()
    }

    pub fn profile(&self, agent: &AgentId) -> Result<&SystemProfile, RuntimeError> {
        Ok(&self.state(agent)?.profile)
    }

    pub fn level(&self, agent: &AgentId) -> Result<GovernanceLevel, RuntimeError> {
        Ok(self.state(agent)?.level)
    }

    pub fn mode(&self, agent: &AgentId) -> Result<OperatingMode, RuntimeError> {
        Ok(self.state(agent)?.mode)
    }

    pub fn dependencies(&self, agent: &AgentId) -> Result<&BTreeSet<Dependency>, RuntimeError> {
        Ok(&self.state(agent)?.dependencies)
    }

    /// Current declarations of every registered agent.
    pub fn declarations(&self, now: Minutes) -> Vec<Declaration> {
        self.agents
            .iter()
            .map(|(id, s)| Declaration {
                agent_id: id.clone(),
                authority: s.profile.authority.clone(),
                dependencies: s.dependencies.clone(),
                provides: s.provides.clone(),
                operating_mode: s.mode,
                timestamp: now,
            })
            .collect()
    }

    /// Drains declarations emitted since the last call.
    pub fn take_declarations(&mut self) -> Vec<Declaration> {
        std::mem::take(&mut self.outbox)
    }

    /// Changes the operating mode, emitting a declaration if it differs.
    pub fn set_mode(
        &mut self,
        agent: &AgentId,
        mode: OperatingMode,
        now: Minutes,
    ) -> Result<Option<Declaration>, RuntimeError> {
        let state = self.agents.get_mut(agent).ok_or_else(|| RuntimeError::UnregisteredAgent(agent.clone()))?;
        if state.mode == mode {
            return Ok(None);
        }
        state.mode = mode;
        Ok(Some(self.declare(agent, now)))
    }

    /// Runtime policy check. Safety-coupled resources need an orchestration
    /// clearance; what happens without one depends on how strongly the
    /// orchestration layer is active for this agent's governance level.
    /// Setpoints outside the soft envelope are blocked at the agent layer.
    /// Every call appends exactly one audit record.
    pub fn enforce_policy(
        &mut self,
        agent: &AgentId,
        action: &ProposedAction,
        topology: &dyn TopologyView,
        clearance: Option<&ClearanceToken>,
        trail: &mut AuditTrail,
        now: Minutes,
    ) -> Result<PolicyOutcome, RuntimeError> {
        let state = self.state(agent)?;
        let orchestration = layer_activation(state.level).orchestration;

        let mut out_of_bounds = BTreeSet::new();
        for (metric, target) in &action.setpoints {
            if let Some(b) = state.envelope.metrics.get(metric) {
                if b.check(*target).is_some() {
                    out_of_bounds.insert(metric.clone());
                }
            } else {
                return Err(RuntimeError::UnknownMetric { agent: agent.clone(), metric: metric.clone() });
            }
        }
        let coupled: BTreeSet<String> =
            action.resources.iter().filter(|r| topology.is_safety_coupled(r)).cloned().collect();
        let cleared = clearance
            .is_some_and(|t| &t.agent == agent && t.action_id == action.id && t.topology_version == topology.version());

        let (decision, guard) = if !out_of_bounds.is_empty() {
            (Decision::Block, Guard::Bounds(out_of_bounds))
        } else if !coupled.is_empty() && !cleared {
            let decision = match orchestration {
                Activation::Full => Decision::Block,
                Activation::Basic => Decision::Escalate,
                Activation::Off => Decision::Allow,
            };
            (decision, Guard::Coupling(coupled))
        } else if !coupled.is_empty() {
            (Decision::Allow, Guard::Cleared)
        } else if !action.setpoints.is_empty() {
            (Decision::Allow, Guard::WithinBounds)
        } else {
            (Decision::Allow, Guard::Vacuous)
        };

        let guard_label = match &guard {
            Guard::Vacuous => "none".to_string(),
            Guard::Coupling(r) => format!("coupling:{}", r.iter().cloned().collect::<Vec<_>>().join(",")),
            Guard::Bounds(m) => format!("bounds:{}", m.iter().cloned().collect::<Vec<_>>().join(",")),
            Guard::Cleared => "cleared".into(),
            Guard::WithinBounds => "within-bounds".into(),
        };
        let record = trail.append(
            NewRecord::new(agent.clone(), now, EventKind::PolicyDecision)
                .field("action", &action.id)
                .field("decision", decision)
                .field("guard", guard_label)
                .field("topology_version", topology.version())
                .causes(action.cause_links.iter().copied()),
        )?;
        let escalated = matches!(decision, Decision::Block | Decision::Escalate) && matches!(guard, Guard::Coupling(_));
        Ok(PolicyOutcome { decision, guard, record, escalated })
    }

    /// Feeds one telemetry tick through the envelope debounce. A signal is
    /// emitted once a metric has been out of bounds for `k` consecutive
    /// ticks, and again only if severity escalates. Returns the most severe
    /// signal of this tick.
    pub fn observe(
        &mut self,
        agent: &AgentId,
        telemetry: &BTreeMap<String, f64>,
        tick: Minutes,
    ) -> Result<Option<DriftSignal>, RuntimeError> {
        let mut signals = self.observe_all(agent, telemetry, tick)?;
        signals.sort_by(|a, b| b.severity.cmp(&a.severity).then_with(|| a.metric.cmp(&b.metric)));
        Ok(signals.into_iter().next())
    }

    pub fn observe_all(
        &mut self,
        agent: &AgentId,
        telemetry: &BTreeMap<String, f64>,
        tick: Minutes,
    ) -> Result<Vec<DriftSignal>, RuntimeError> {
        let state = self.agents.get_mut(agent).ok_or_else(|| RuntimeError::UnregisteredAgent(agent.clone()))?;
        if let Some(metric) = telemetry.keys().find(|m| !state.envelope.metrics.contains_key(*m)) {
            return Err(RuntimeError::UnknownMetric { agent: agent.clone(), metric: metric.clone() });
        }
        let k = state.envelope.consecutive_breach_k;
        let mut signals = Vec::new();
        for (metric, &value) in telemetry {
            let bounds = state.envelope.metrics[metric];
            match bounds.check(value) {
                None => {
                    state.breach_ticks.remove(metric);
                    state.signalled.remove(metric);
                }
                Some((bound, severity)) => {
                    let ticks = state.breach_ticks.entry(metric.clone()).or_default();
                    *ticks += 1;
                    let escalates = state.signalled.get(metric).is_none_or(|prev| severity > *prev);
                    if *ticks >= k && escalates {
                        state.signalled.insert(metric.clone(), severity);
                        signals.push(DriftSignal {
                            agent_id: agent.clone(),
                            metric: metric.clone(),
                            observed: value,
                            bound,
                            domain: state.profile.domain.clone(),
                            timestamp: tick,
                            severity,
                        });
                    }
                }
            }
        }
        if signals.iter().any(|s| s.severity == Severity::Degraded) {
            self.set_mode(agent, OperatingMode::Degraded, tick)?;
        }
        Ok(signals)
    }

    /// Creates (or returns the existing) reassessment task for this agent,
    /// change kind and tick.
    pub fn reassessment_trigger(
        &mut self,
        agent: &AgentId,
        change: ChangeKind,
        tick: Minutes,
        topology_version: Option<u64>,
    ) -> Result<ReassessmentTask, RuntimeError> {
        self.state(agent)?;
        if let Some(existing) = self.tasks.iter().find(|t| &t.agent == agent && t.change == change && t.tick == tick) {
            return Ok(existing.clone());
        }
        let task = ReassessmentTask {
            id: self.tasks.len() as u64 + 1,
            agent: agent.clone(),
            change,
            tick,
            tags: [RISK_REASSESSMENT, CONFORMITY_REASSESSMENT],
            topology_version,
            outcome: None,
        };
        self.tasks.push(task.clone());
        Ok(task)
    }

    /// Records the assessment result of a task.
    pub fn complete_reassessment(&mut self, task_id: u64, outcome: ReassessmentOutcome) -> Option<&ReassessmentTask> {
        let task = self.tasks.iter_mut().find(|t| t.id == task_id)?;
        task.outcome = Some(outcome);
        Some(task)
    }

    pub fn tasks(&self) -> &[ReassessmentTask] {
        &self.tasks
    }
}
