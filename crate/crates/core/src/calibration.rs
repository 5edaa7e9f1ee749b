//! Autonomy evidence protocol and autonomy-calibrated governance levels.
//!
//! Three pure steps: evidence -> autonomy level (L2..L4) via the shipped
//! decision table, profile -> governance level (G1..G5), and governance
//! level -> per-layer activation and oversight posture.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::AgentId;

pub const DEFAULT_DECISION_TABLE: &str = include_str!("../data/autonomy_table.toml");

crate::str_enum! {
    pub enum DecisionScope { Advisory, BoundedTask, Operational, RealTimeControl }
}

crate::str_enum! {
    pub enum HumanInvolvement { PreApproval, ExceptionHandling, Monitoring, SupervisoryOverride }
}

crate::str_enum! {
    pub enum DomainCriticality { CustomerFacing, PublicSpace, CriticalInfrastructure }
}

crate::str_enum! {
    pub enum AutonomyLevel { L2, L3, L4 }
}

crate::str_enum! {
    pub enum GovernanceLevel { G1, G2, G3, G4, G5 }
}

crate::str_enum! {
    /// Layer activation intensity. `Basic` runs monitoring, declaration
    /// intake and trace recording with enforcement in advisory mode;
    /// `Full` enforces.
    pub enum Activation { Off, Basic, Full }
}

impl DecisionScope {
    pub const ALL: [DecisionScope; 4] = [
        DecisionScope::Advisory,
        DecisionScope::BoundedTask,
        DecisionScope::Operational,
        DecisionScope::RealTimeControl,
    ];
}

impl HumanInvolvement {
    pub const ALL: [HumanInvolvement; 4] = [
        HumanInvolvement::PreApproval,
        HumanInvolvement::ExceptionHandling,
        HumanInvolvement::Monitoring,
        HumanInvolvement::SupervisoryOverride,
    ];
}

impl DomainCriticality {
    pub const ALL: [DomainCriticality; 3] =
        [DomainCriticality::CustomerFacing, DomainCriticality::PublicSpace, DomainCriticality::CriticalInfrastructure];
}

impl GovernanceLevel {
    pub const ALL: [GovernanceLevel; 5] =
        [GovernanceLevel::G1, GovernanceLevel::G2, GovernanceLevel::G3, GovernanceLevel::G4, GovernanceLevel::G5];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AutonomyEvidence {
    pub decision_scope: DecisionScope,
    pub human_involvement: HumanInvolvement,
    pub domain_criticality: DomainCriticality,
}

impl AutonomyEvidence {
    pub fn new(scope: DecisionScope, human: HumanInvolvement, criticality: DomainCriticality) -> Self {
        Self { decision_scope: scope, human_involvement: human, domain_criticality: criticality }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemProfile {
    pub id: AgentId,
    pub authority: String,
    pub domain: String,
    pub evidence: AutonomyEvidence,
    #[serde(default)]
    pub endangers_essential_services: bool,
    #[serde(default)]
    pub cross_org_dependencies: bool,
    #[serde(default)]
    pub multi_agent_ecosystem: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerActivationMap {
    pub agent: Activation,
    pub orchestration: Activation,
    pub city: Activation,
}

impl fmt::Display for LayerActivationMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A: {}; O: {}; C: {}", self.agent, self.orchestration, self.city)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("decision table schema error: {0}")]
    Schema(String),
    #[error("decision table does not cover scope={0} human={1}")]
    Incomplete(DecisionScope, HumanInvolvement),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRow {
    pub scope: Vec<DecisionScope>,
    pub human: Vec<HumanInvolvement>,
    pub level: AutonomyLevel,
    pub rationale: String,
}

/// First-match decision table over (scope, human involvement).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionTable {
    #[serde(rename = "row")]
    pub rows: Vec<DecisionRow>,
}

impl DecisionTable {
    /// Parses a table and rejects it unless every scope/human cell is covered.
    pub fn parse(source: &str) -> Result<Self, CalibrationError> {
        let table: DecisionTable =
            toml::from_str(source).map_err(|e| CalibrationError::Schema(e.message().to_string()))?;
        for scope in DecisionScope::ALL {
            for human in HumanInvolvement::ALL {
                if table.lookup(scope, human).is_none() {
                    return Err(CalibrationError::Incomplete(scope, human));
                }
            }
        }
        Ok(table)
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_DECISION_TABLE).expect("shipped decision table is total")
    }

    fn lookup(&self, scope: DecisionScope, human: HumanInvolvement) -> Option<&DecisionRow> {
        self.rows.iter().find(|r| r.scope.contains(&scope) && r.human.contains(&human))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AutonomyClassification {
    pub level: AutonomyLevel,
    pub rationale: String,
}

pub fn classify_autonomy_with(table: &DecisionTable, evidence: &AutonomyEvidence) -> AutonomyClassification {
    let row = table
        .lookup(evidence.decision_scope, evidence.human_involvement)
        .expect("decision table totality is checked at parse time");
    AutonomyClassification {
        level: row.level,
        rationale: format!(
            "{} (scope={}, human={}, criticality={})",
            row.rationale, evidence.decision_scope, evidence.human_involvement, evidence.domain_criticality
        ),
    }
}

pub fn classify_autonomy(evidence: &AutonomyEvidence) -> AutonomyClassification {
    thread_local! {
        static TABLE: DecisionTable = DecisionTable::shipped();
    }
    TABLE.with(|t| classify_autonomy_with(t, evidence))
}

/// First part of the G3/G4 test: autonomous control, meaning L4, or L3
/// exercised as real-time control.
pub fn exercises_autonomous_control(evidence: &AutonomyEvidence) -> bool {
    match classify_autonomy(evidence).level {
        AutonomyLevel::L4 => true,
        AutonomyLevel::L3 => evidence.decision_scope == DecisionScope::RealTimeControl,
        AutonomyLevel::L2 => false,
    }
}

pub fn assign_governance_level(profile: &SystemProfile) -> GovernanceLevel {
    let evidence = &profile.evidence;
    if profile.multi_agent_ecosystem {
        GovernanceLevel::G5
    } else if exercises_autonomous_control(evidence)
        && profile.endangers_essential_services
        && profile.cross_org_dependencies
    {
        GovernanceLevel::G4
    } else {
        match evidence.decision_scope {
            DecisionScope::Operational | DecisionScope::RealTimeControl => GovernanceLevel::G3,
            DecisionScope::BoundedTask => GovernanceLevel::G2,
            DecisionScope::Advisory => GovernanceLevel::G1,
        }
    }
}

pub fn layer_activation(level: GovernanceLevel) -> LayerActivationMap {
    use Activation::*;
    let (agent, orchestration, city) = match level {
        GovernanceLevel::G1 | GovernanceLevel::G2 => (Full, Off, Off),
        GovernanceLevel::G3 => (Full, Basic, Off),
        GovernanceLevel::G4 => (Full, Full, Basic),
        GovernanceLevel::G5 => (Full, Full, Full),
    };
    LayerActivationMap { agent, orchestration, city }
}

pub fn oversight_posture(level: GovernanceLevel) -> &'static str {
    match level {
        GovernanceLevel::G1 => "human-in-command",
        GovernanceLevel::G2 => "human-on-the-loop",
        GovernanceLevel::G3 => "human-over-the-loop",
        GovernanceLevel::G4 => "supervisory",
        GovernanceLevel::G5 => "societal",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DecisionScope::*;
    use DomainCriticality::*;
    use HumanInvolvement::*;

    fn profile(evidence: AutonomyEvidence, endangers: bool, cross_org: bool) -> SystemProfile {
        SystemProfile {
            id: AgentId::new("sys"),
            authority: "auth".into(),
            domain: "energy".into(),
            evidence,
            endangers_essential_services: endangers,
            cross_org_dependencies: cross_org,
            multi_agent_ecosystem: false,
        }
    }

    #[test]
    fn classification_anchors() {
        let gtic = AutonomyEvidence::new(RealTimeControl, SupervisoryOverride, CriticalInfrastructure);
        assert_eq!(classify_autonomy(&gtic).level, AutonomyLevel::L4);
        let falcon = AutonomyEvidence::new(Advisory, PreApproval, PublicSpace);
        assert_eq!(classify_autonomy(&falcon).level, AutonomyLevel::L2);
        let rammas = AutonomyEvidence::new(BoundedTask, ExceptionHandling, CustomerFacing);
        assert_eq!(classify_autonomy(&rammas).level, AutonomyLevel::L3);
    }

    #[test]
    fn rationale_names_criteria() {
        let e = AutonomyEvidence::new(Operational, Monitoring, PublicSpace);
        let c = classify_autonomy(&e);
        assert!(c.rationale.contains("scope=Operational"));
        assert!(c.rationale.contains("human=Monitoring"));
    }

    #[test]
    fn incomplete_table_is_rejected() {
        let partial = "[[row]]\nscope = [\"Advisory\"]\nhuman = [\"PreApproval\"]\nlevel = \"L2\"\nrationale = \"x\"\n";
        assert!(matches!(DecisionTable::parse(partial), Err(CalibrationError::Incomplete(..))));
    }

    #[test]
    fn governance_anchors() {
        let gtic =
            profile(AutonomyEvidence::new(RealTimeControl, SupervisoryOverride, CriticalInfrastructure), true, true);
        assert_eq!(assign_governance_level(&gtic), GovernanceLevel::G4);
        let oyoon = profile(AutonomyEvidence::new(Operational, ExceptionHandling, PublicSpace), false, true);
        assert_eq!(classify_autonomy(&oyoon.evidence).level, AutonomyLevel::L3);
        assert_eq!(assign_governance_level(&oyoon), GovernanceLevel::G3);
        let no_cross_org = profile(gtic.evidence, true, false);
        assert_eq!(assign_governance_level(&no_cross_org), GovernanceLevel::G3);
        let mut eco = oyoon.clone();
        eco.multi_agent_ecosystem = true;
        assert_eq!(assign_governance_level(&eco), GovernanceLevel::G5);
    }

    #[test]
    fn activation_rows() {
        use Activation::*;
        let row = |l| {
            let m = layer_activation(l);
            (m.agent, m.orchestration, m.city)
        };
        assert_eq!(row(GovernanceLevel::G1), (Full, Off, Off));
        assert_eq!(row(GovernanceLevel::G3), (Full, Basic, Off));
        assert_eq!(row(GovernanceLevel::G5), (Full, Full, Full));
        assert_eq!(layer_activation(GovernanceLevel::G3).to_string(), "A: Full; O: Basic; C: Off");
    }

    #[test]
    fn postures() {
        assert_eq!(oversight_posture(GovernanceLevel::G2), "human-on-the-loop");
        assert_eq!(oversight_posture(GovernanceLevel::G4), "supervisory");
        assert_eq!(oversight_posture(GovernanceLevel::G1), "human-in-command");
    }

    #[test]
    fn activation_is_monotone_and_agent_always_full() {
        for pair in GovernanceLevel::ALL.windows(2) {
            let (lo, hi) = (layer_activation(pair[0]), layer_activation(pair[1]));
            assert!(lo.agent <= hi.agent && lo.orchestration <= hi.orchestration && lo.city <= hi.city);
        }
        assert!(GovernanceLevel::ALL.iter().all(|&l| layer_activation(l).agent == Activation::Full));
    }

    #[test]
    fn classification_is_total() {
        let mut cells = 0;
        for s in DecisionScope::ALL {
            for h in HumanInvolvement::ALL {
                for c in DomainCriticality::ALL {
                    let e = AutonomyEvidence::new(s, h, c);
                    assert_eq!(classify_autonomy(&e), classify_autonomy(&e));
                    cells += 1;
                }
            }
        }
        assert_eq!(cells, 48);
    }
}
