//! Scenario file schema and load-time validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::agent_runtime::{AgentRuntime, ChangeKind, Dependency, OperatingEnvelope, OperatingMode};
use crate::calibration::{AutonomyEvidence, SystemProfile};
use crate::city::{Zone, Zones, DEFAULT_THRESHOLD, LANGUAGES};
use crate::ids::{AgentId, Minutes, RuleId};
use crate::orchestration::{Topology, DEFAULT_WINDOW};

use super::SimError;

pub const CORRIDOR_CASCADE: &str = include_str!("../../data/scenarios/corridor_cascade.toml");
pub const DNSC_ANOMALY: &str = include_str!("../../data/scenarios/dnsc_anomaly.toml");

/// Shipped fixtures by name.
pub fn fixture(name: &str) -> Option<&'static str> {
    match name {
        "corridor_cascade" => Some(CORRIDOR_CASCADE),
        "dnsc_anomaly" => Some(DNSC_ANOMALY),
        _ => None,
    }
}

pub const FIXTURES: &[&str] = &["corridor_cascade", "dnsc_anomaly"];

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub t0: Minutes,
    #[serde(default)]
    pub trigger_factors: Vec<String>,
    /// Non-agent actors allowed in an event's `actors` list.
    #[serde(default)]
    pub external_actors: Vec<String>,
    #[serde(default)]
    pub config: SimConfig,
    #[serde(default, rename = "regime")]
    pub regimes: Vec<Regime>,
    #[serde(default, rename = "zone")]
    pub zones: Vec<Zone>,
    #[serde(rename = "agent")]
    pub agents: Vec<AgentSpec>,
    #[serde(rename = "event")]
    pub events: Vec<ScenarioEvent>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub window: Minutes,
    pub fairness_threshold: f64,
    pub languages: Vec<String>,
    pub pseudonym_key: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            fairness_threshold: DEFAULT_THRESHOLD,
            languages: LANGUAGES.iter().map(|s| s.to_string()).collect(),
            pseudonym_key: "scenario-key".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub name: String,
    /// Notification window in minutes.
    pub window: Minutes,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: AgentId,
    #[serde(default)]
    pub name: String,
    pub authority: String,
    pub domain: String,
    pub evidence: AutonomyEvidence,
    #[serde(default)]
    pub endangers_essential_services: bool,
    #[serde(default)]
    pub cross_org_dependencies: bool,
    #[serde(default)]
    pub multi_agent_ecosystem: bool,
    #[serde(default)]
    pub provides: BTreeSet<String>,
    #[serde(default)]
    pub dependencies: BTreeSet<Dependency>,
    pub envelope: OperatingEnvelope,
}

impl AgentSpec {
    pub fn profile(&self) -> SystemProfile {
        SystemProfile {
            id: self.id.clone(),
            authority: self.authority.clone(),
            domain: self.domain.clone(),
            evidence: self.evidence,
            endangers_essential_services: self.endangers_essential_services,
            cross_org_dependencies: self.cross_org_dependencies,
            multi_agent_ecosystem: self.multi_agent_ecosystem,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEvent {
    pub id: String,
    pub time: Minutes,
    pub label: String,
    #[serde(default)]
    pub actors: Vec<String>,
    #[serde(default)]
    pub inputs: Vec<Input>,
}

/// One scripted step inside a timeline event.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    /// External stimulus with no governance effect of its own.
    Trigger {
        #[serde(default)]
        note: String,
    },
    Action {
        agent: AgentId,
        id: String,
        #[serde(default)]
        resources: BTreeSet<String>,
        #[serde(default)]
        setpoints: BTreeMap<String, f64>,
        #[serde(default)]
        request_clearance: bool,
        #[serde(default)]
        human_override: bool,
    },
    Telemetry {
        agent: AgentId,
        samples: BTreeMap<String, f64>,
    },
    /// Out-of-band observation from shared-resource monitoring at the
    /// orchestration layer, attributed to the agent acting on that resource.
    SharedSignal {
        agent: AgentId,
        metric: String,
        observed: f64,
        min: f64,
        max: f64,
    },
    Enforcement {
        agent: AgentId,
        zone_counts: BTreeMap<String, u64>,
    },
    JointOversight,
    Resolve {
        rules: Vec<RuleId>,
    },
    Mode {
        agent: AgentId,
        mode: OperatingMode,
    },
    Decision {
        id: String,
        agent: AgentId,
        violation: String,
        zone: String,
        subject: String,
        #[serde(default)]
        caused_by: Vec<String>,
    },
    Contest {
        decision: String,
        #[serde(default = "default_language")]
        language: String,
    },
    Reassess {
        agent: AgentId,
        change: ChangeKind,
        #[serde(default)]
        alters_conformity: bool,
    },
    HumanReview {
        agent: AgentId,
        within: Minutes,
    },
    PostEventReview,
}

fn default_language() -> String {
    "en".into()
}

impl Scenario {
    pub fn parse(source: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(source).map_err(|e| SimError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| &a.id == id)
    }

    pub fn regime_windows(&self) -> BTreeMap<String, Minutes> {
        self.regimes.iter().map(|r| (r.name.clone(), r.window)).collect()
    }

    pub fn authorities(&self) -> BTreeSet<&str> {
        self.agents.iter().map(|a| a.authority.as_str()).collect()
    }

    /// Registers every agent and returns the runtime and initial topology.
    pub fn instantiate(&self) -> Result<(AgentRuntime, Topology), SimError> {
        let mut rt = AgentRuntime::new();
        for a in &self.agents {
            rt.register(a.profile(), a.envelope.clone(), a.dependencies.clone(), a.provides.clone(), self.t0)
                .map_err(|e| SimError::Invalid(e.to_string()))?;
        }
        let ids: BTreeSet<AgentId> = self.agents.iter().map(|a| a.id.clone()).collect();
        let topo = Topology::register(&rt.declarations(self.t0), &ids)
            .map_err(|e| SimError::DanglingReference(e.to_string()))?;
        Ok((rt, topo))
    }

    fn validate(&self) -> Result<(), SimError> {
        let dangling = |what: String| Err(SimError::DanglingReference(what));
        if self.config.window == 0 {
            return Err(SimError::Invalid("config.window must be positive".into()));
        }
        if self.config.fairness_threshold.is_nan() || self.config.fairness_threshold <= 1.0 {
            return Err(SimError::Invalid("config.fairness_threshold must exceed 1".into()));
        }
        if let Some(l) = self.config.languages.iter().find(|l| !LANGUAGES.contains(&l.as_str())) {
            return Err(SimError::Invalid(format!("unsupported language `{l}`")));
        }
        let mut names = BTreeSet::new();
        for r in &self.regimes {
            if !names.insert(&r.name) {
                return Err(SimError::Invalid(format!("duplicate regime `{}`", r.name)));
            }
        }
        if !self.zones.is_empty() {
            Zones::new(self.zones.clone()).map_err(|e| SimError::Invalid(e.to_string()))?;
        }
        self.instantiate()?;

        let agents: BTreeSet<&AgentId> = self.agents.iter().map(|a| &a.id).collect();
        let mut seen_events = BTreeSet::new();
        let mut decisions = BTreeSet::new();
        let mut last = self.t0;
        for ev in &self.events {
            if ev.time < last {
                return Err(SimError::Invalid(format!("event `{}` is out of time order", ev.id)));
            }
            last = ev.time;
            for actor in &ev.actors {
                if !agents.contains(&AgentId::new(actor.as_str())) && !self.external_actors.contains(actor) {
                    return dangling(format!("event `{}` names unknown actor `{actor}`", ev.id));
                }
            }
            for input in &ev.inputs {
                let agent = match input {
                    Input::Action { agent, .. }
                    | Input::Telemetry { agent, .. }
                    | Input::SharedSignal { agent, .. }
                    | Input::Enforcement { agent, .. }
                    | Input::Mode { agent, .. }
                    | Input::Decision { agent, .. }
                    | Input::Reassess { agent, .. }
                    | Input::HumanReview { agent, .. } => Some(agent),
                    _ => None,
                };
                if let Some(a) = agent {
                    if !agents.contains(a) {
                        return dangling(format!("event `{}` references unknown agent `{a}`", ev.id));
                    }
                }
                match input {
                    Input::Enforcement { zone_counts, .. } => {
                        if let Some(z) = zone_counts.keys().find(|z| !self.zones.iter().any(|k| &k.zone_id == *z)) {
                            return dangling(format!("event `{}` references unknown zone `{z}`", ev.id));
                        }
                    }
                    Input::Decision { id, caused_by, zone, .. } => {
                        if let Some(c) = caused_by.iter().find(|c| !seen_events.contains(*c)) {
                            return dangling(format!("decision `{id}` cites unknown or later event `{c}`"));
                        }
                        if !self.zones.iter().any(|k| &k.zone_id == zone) {
                            return dangling(format!("decision `{id}` references unknown zone `{zone}`"));
                        }
                        if !decisions.insert(id.clone()) {
                            return Err(SimError::Invalid(format!("duplicate decision `{id}`")));
                        }
                    }
                    Input::Contest { decision, language } => {
                        if !decisions.contains(decision) {
                            return dangling(format!("contest cites unknown decision `{decision}`"));
                        }
                        if !self.config.languages.contains(language) {
                            return Err(SimError::Invalid(format!("unsupported language `{language}`")));
                        }
                    }
                    Input::Resolve { rules } => {
                        if rules.contains(&RuleId::T4) && self.regimes.is_empty() {
                            return Err(SimError::Invalid("T4 needs at least one regime".into()));
                        }
                    }
                    Input::Telemetry { agent, samples } => {
                        let spec = self.agent(agent).expect("checked above");
                        if let Some(m) = samples.keys().find(|m| !spec.envelope.metrics.contains_key(*m)) {
                            return dangling(format!("telemetry for `{agent}` names undeclared metric `{m}`"));
                        }
                    }
                    _ => {}
                }
            }
            if !seen_events.insert(ev.id.clone()) {
                return Err(SimError::Invalid(format!("duplicate event id `{}`", ev.id)));
            }
        }
        Ok(())
    }
}

/// Loads a scenario from a file path or a shipped fixture name.
pub fn load_scenario(path_or_name: &str) -> Result<Scenario, SimError> {
    if let Some(src) = fixture(path_or_name) {
        return Scenario::parse(src);
    }
    let path = Path::new(path_or_name);
    let src = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    Scenario::parse(&src)
}
