use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::agent_runtime::{ClearanceToken, CouplingClass, Declaration, OperatingMode, ProposedAction, TopologyView};
use crate::calibration::Activation;
use crate::ids::AgentId;

use super::OrchestrationError;

/// A declared dependency of `dependent` on a resource provided by `from_system`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Coupling {
    pub from_system: AgentId,
    pub to_resource: String,
    pub dependent: AgentId,
    pub coupling_class: CouplingClass,
    pub declared_by: String,
    pub topology_version: u64,
}

/// Compound-event pattern registered after an incident review.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingRisk {
    pub trigger_factors: Vec<String>,
    pub agents: BTreeSet<AgentId>,
    pub domains: BTreeSet<String>,
    pub registered_in: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopologySnapshot {
    pub version: u64,
    pub couplings: Vec<Coupling>,
    pub risk_register: Vec<CouplingRisk>,
}

/// Versioned coupling graph. Every structural change bumps the version and
/// keeps the previous snapshot; operating-mode updates do not.
#[derive(Clone, Debug)]
pub struct Topology {
    version: u64,
    declarations: BTreeMap<AgentId, Declaration>,
    couplings: Vec<Coupling>,
    risk_register: Vec<CouplingRisk>,
    history: Vec<TopologySnapshot>,
}

impl Topology {
    /// Builds the coupling graph from the agents' declarations.
    pub fn register(declarations: &[Declaration], registered: &BTreeSet<AgentId>) -> Result<Self, OrchestrationError> {
        let mut map = BTreeMap::new();
        for d in declarations {
            if !registered.contains(&d.agent_id) {
                return Err(OrchestrationError::UnknownAgent(d.agent_id.clone()));
            }
            map.insert(d.agent_id.clone(), d.clone());
        }
        let couplings = derive_couplings(&map, 1)?;
        Ok(Self { version: 1, declarations: map, couplings, risk_register: Vec::new(), history: Vec::new() })
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn risk_register(&self) -> &[CouplingRisk] {
        &self.risk_register
    }

    pub fn snapshot(&self) -> TopologySnapshot {
        TopologySnapshot {
            version: self.version,
            couplings: self.couplings.clone(),
            risk_register: self.risk_register.clone(),
        }
    }

    /// Snapshot of an earlier or the current version.
    pub fn at_version(&self, version: u64) -> Option<TopologySnapshot> {
        if version == self.version {
            return Some(self.snapshot());
        }
        self.history.iter().find(|s| s.version == version).cloned()
    }

    pub fn versions(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.history.iter().map(|s| s.version).collect();
        v.push(self.version);
        v
    }

    fn bump(&mut self) {
        self.history.push(self.snapshot());
        self.version += 1;
        for c in &mut self.couplings {
            c.topology_version = self.version;
        }
    }

    /// Applies a fresh declaration. Structural changes (dependencies or
    /// provided resources) create a new version; mode changes are recorded
    /// in place.
    pub fn apply_declaration(&mut self, declaration: Declaration) -> Result<u64, OrchestrationError> {
        let structural = self
            .declarations
            .get(&declaration.agent_id)
            .is_none_or(|prev| prev.dependencies != declaration.dependencies || prev.provides != declaration.provides);
        if !structural {
            self.declarations.insert(declaration.agent_id.clone(), declaration);
            return Ok(self.version);
        }
        let mut next = self.declarations.clone();
        next.insert(declaration.agent_id.clone(), declaration);
        let couplings = derive_couplings(&next, self.version + 1)?;
        self.bump();
        self.declarations = next;
        self.couplings = couplings;
        Ok(self.version)
    }

    /// Adds a compound-event pattern to the risk register as a new version.
    pub fn register_risk(&mut self, mut risk: CouplingRisk) -> u64 {
        self.bump();
        risk.registered_in = self.version;
        self.risk_register.push(risk);
        self.version
    }

    pub fn mode(&self, agent: &AgentId) -> Option<OperatingMode> {
        self.declarations.get(agent).map(|d| d.operating_mode)
    }

    pub fn authority(&self, agent: &AgentId) -> Option<&str> {
        self.declarations.get(agent).map(|d| d.authority.as_str())
    }

    /// Agents whose declared dependencies are served by `provider`.
    pub fn dependents_of(&self, provider: &AgentId) -> BTreeSet<AgentId> {
        self.couplings.iter().filter(|c| &c.from_system == provider).map(|c| c.dependent.clone()).collect()
    }

    /// True when a chain of couplings (in either direction) joins the agents.
    pub fn connected(&self, a: &AgentId, b: &AgentId) -> bool {
        if a == b {
            return true;
        }
        let mut adj: BTreeMap<&AgentId, Vec<&AgentId>> = BTreeMap::new();
        for c in &self.couplings {
            adj.entry(&c.from_system).or_default().push(&c.dependent);
            adj.entry(&c.dependent).or_default().push(&c.from_system);
        }
        let mut seen = BTreeSet::from([a]);
        let mut queue = VecDeque::from([a]);
        while let Some(n) = queue.pop_front() {
            for m in adj.get(n).into_iter().flatten() {
                if *m == b {
                    return true;
                }
                if seen.insert(*m) {
                    queue.push_back(*m);
                }
            }
        }
        false
    }

    /// Known risk covering both agents, if any.
    pub fn known_risk(&self, a: &AgentId, b: &AgentId) -> Option<&CouplingRisk> {
        self.risk_register.iter().find(|r| r.agents.contains(a) && r.agents.contains(b))
    }
}

impl TopologyView for Topology {
    fn version(&self) -> u64 {
        self.version
    }

    fn is_safety_coupled(&self, resource: &str) -> bool {
        self.couplings.iter().any(|c| c.to_resource == resource && c.coupling_class == CouplingClass::SafetyCoupled)
    }
}

fn derive_couplings(
    declarations: &BTreeMap<AgentId, Declaration>,
    version: u64,
) -> Result<Vec<Coupling>, OrchestrationError> {
    let mut providers: BTreeMap<&str, &Declaration> = BTreeMap::new();
    for d in declarations.values() {
        for r in &d.provides {
            providers.insert(r, d);
        }
    }
    let mut out = Vec::new();
    for d in declarations.values() {
        for dep in &d.dependencies {
            let provider = providers
                .get(dep.resource.as_str())
                .ok_or_else(|| OrchestrationError::DanglingResource(dep.resource.clone()))?;
            out.push(Coupling {
                from_system: provider.agent_id.clone(),
                to_resource: dep.resource.clone(),
                dependent: d.agent_id.clone(),
                coupling_class: dep.class,
                declared_by: d.authority.clone(),
                topology_version: version,
            });
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DenialReason {
    OrchestrationInactive,
    DegradedDependent(Coupling),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Denial {
    pub agent: AgentId,
    pub action_id: String,
    pub topology_version: u64,
    pub reason: DenialReason,
}

/// Orchestration gate for actions on coupled resources. An action is denied
/// when it touches a safety-coupled resource whose dependent is not in
/// Normal mode, unless a human override has been recorded.
#[allow(clippy::result_large_err)]
pub fn issue_clearance(
    topology: &Topology,
    agent: &AgentId,
    action: &ProposedAction,
    orchestration: Activation,
    human_override: bool,
) -> Result<ClearanceToken, Denial> {
    let deny = |reason| Denial {
        agent: agent.clone(),
        action_id: action.id.clone(),
        topology_version: topology.version,
        reason,
    };
    if orchestration == Activation::Off {
        return Err(deny(DenialReason::OrchestrationInactive));
    }
    if !human_override {
        let violated = topology.couplings.iter().find(|c| {
            &c.from_system == agent
                && c.coupling_class == CouplingClass::SafetyCoupled
                && action.resources.contains(&c.to_resource)
                && topology.mode(&c.dependent).is_some_and(|m| m != OperatingMode::Normal)
        });
        if let Some(c) = violated {
            return Err(deny(DenialReason::DegradedDependent(c.clone())));
        }
    }
    Ok(ClearanceToken { agent: agent.clone(), action_id: action.id.clone(), topology_version: topology.version })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_runtime::Dependency;

    fn decl(id: &str, authority: &str, deps: &[(&str, CouplingClass)], provides: &[&str]) -> Declaration {
        Declaration {
            agent_id: id.into(),
            authority: authority.into(),
            dependencies: deps.iter().map(|(r, c)| Dependency { resource: r.to_string(), class: *c }).collect(),
            provides: provides.iter().map(|s| s.to_string()).collect(),
            operating_mode: OperatingMode::Normal,
            timestamp: 0,
        }
    }

    fn corridor() -> (Vec<Declaration>, BTreeSet<AgentId>) {
        let decls = vec![
            decl("E", "DEWA", &[], &["signal_power"]),
            decl("T", "RTA", &[("signal_power", CouplingClass::SafetyCoupled)], &[]),
        ];
        let ids = decls.iter().map(|d| d.agent_id.clone()).collect();
        (decls, ids)
    }

    fn curtail() -> ProposedAction {
        ProposedAction {
            id: "curtail".into(),
            resources: BTreeSet::from(["signal_power".to_string()]),
            ..Default::default()
        }
    }

    #[test]
    fn power_signal_edge_is_safety_coupled() {
        let (decls, ids) = corridor();
        let t = Topology::register(&decls, &ids).unwrap();
        assert_eq!(t.version(), 1);
        let c = &t.couplings()[0];
        assert_eq!((c.from_system.as_str(), c.to_resource.as_str(), c.dependent.as_str()), ("E", "signal_power", "T"));
        assert_eq!(c.coupling_class, CouplingClass::SafetyCoupled);
        assert!(t.is_safety_coupled("signal_power"));
        assert!(t.connected(&"E".into(), &"T".into()));
    }

    #[test]
    fn empty_topology() {
        let t = Topology::register(&[], &BTreeSet::new()).unwrap();
        assert_eq!(t.version(), 1);
        assert!(t.couplings().is_empty());
    }

    #[test]
    fn unknown_agent_and_dangling_resource() {
        let (decls, _) = corridor();
        let err = Topology::register(&decls, &BTreeSet::from([AgentId::new("E")])).unwrap_err();
        assert!(matches!(err, OrchestrationError::UnknownAgent(_)));
        let lone = vec![decl("T", "RTA", &[("signal_power", CouplingClass::SafetyCoupled)], &[])];
        let err = Topology::register(&lone, &BTreeSet::from([AgentId::new("T")])).unwrap_err();
        assert!(matches!(err, OrchestrationError::DanglingResource(r) if r == "signal_power"));
    }

    #[test]
    fn update_bumps_version_and_keeps_history() {
        let (decls, ids) = corridor();
        let mut t = Topology::register(&decls, &ids).unwrap();
        let mut e = decls[0].clone();
        e.dependencies.insert(Dependency { resource: "signal_power".into(), class: CouplingClass::Advisory });
        assert_eq!(t.apply_declaration(e).unwrap(), 2);
        assert_eq!(t.couplings().len(), 2);
        assert_eq!(t.at_version(1).unwrap().couplings.len(), 1);
        assert_eq!(t.versions(), vec![1, 2]);
        // a mode change alone is not structural
        let mut t_decl = decls[1].clone();
        t_decl.operating_mode = OperatingMode::Degraded;
        assert_eq!(t.apply_declaration(t_decl).unwrap(), 2);
        assert_eq!(t.mode(&"T".into()), Some(OperatingMode::Degraded));
    }

    #[test]
    fn clearance_rules() {
        let (decls, ids) = corridor();
        let mut t = Topology::register(&decls, &ids).unwrap();
        let e = AgentId::new("E");
        assert!(issue_clearance(&t, &e, &curtail(), Activation::Full, true).is_ok());
        assert!(issue_clearance(&t, &e, &curtail(), Activation::Full, false).is_ok());

        let mut degraded = decls[1].clone();
        degraded.operating_mode = OperatingMode::Degraded;
        t.apply_declaration(degraded).unwrap();
        let denial = issue_clearance(&t, &e, &curtail(), Activation::Full, false).unwrap_err();
        assert!(matches!(&denial.reason, DenialReason::DegradedDependent(c) if c.to_resource == "signal_power"));
        assert_eq!(denial.topology_version, 1);
        assert!(issue_clearance(&t, &e, &curtail(), Activation::Full, true).is_ok());

        let other =
            ProposedAction { id: "x".into(), resources: BTreeSet::from(["other".to_string()]), ..Default::default() };
        assert!(issue_clearance(&t, &e, &other, Activation::Basic, false).is_ok());
        let off = issue_clearance(&t, &e, &other, Activation::Off, false).unwrap_err();
        assert_eq!(off.reason, DenialReason::OrchestrationInactive);
    }
}
