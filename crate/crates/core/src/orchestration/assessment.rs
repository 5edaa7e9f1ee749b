use crate::agent_runtime::{AuditTrail, TopologyView};
use crate::ids::Minutes;

use super::attribution::{attribute, AttributionReport};
use super::incident::{IncidentRecord, IncidentStatus};
use super::topology::{CouplingRisk, Topology};
use super::{CascadeEvent, OrchestrationError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegimeSection {
    pub regime: String,
    pub window: Minutes,
    pub deadline: Minutes,
    pub notified_at: Option<Minutes>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsolidatedAssessment {
    pub incident_id: u64,
    pub attribution: AttributionReport,
    pub sections: Vec<RegimeSection>,
}

/// Adds a compound-event pattern to the topology risk register.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyUpdateDirective {
    pub base_version: u64,
    pub risk: CouplingRisk,
}

impl TopologyUpdateDirective {
    /// Returns the new topology version.
    pub fn apply(&self, topology: &mut Topology) -> u64 {
        topology.register_risk(self.risk.clone())
    }
}

/// Post-event assessment: one section per applicable regime, attribution of
/// the shared incident record, and a directive registering the cascade's
/// pattern as a known coupling risk.
pub fn consolidate_assessment(
    incident: &IncidentRecord,
    cascade: &CascadeEvent,
    trail: &AuditTrail,
    topology: &Topology,
    trigger_factors: &[String],
    force: bool,
) -> Result<(ConsolidatedAssessment, TopologyUpdateDirective), OrchestrationError> {
    if incident.status == IncidentStatus::Open && !force {
        return Err(OrchestrationError::OpenIncident(incident.incident_id));
    }
    let attribution = attribute(trail, incident.shared_record_id, topology.version())?;
    let sections = incident
        .regime_clocks
        .iter()
        .map(|(regime, window)| RegimeSection {
            regime: regime.clone(),
            window: *window,
            deadline: incident.t0 + window,
            notified_at: incident.notifications.iter().find(|n| &n.regime == regime).map(|n| n.sent_at),
        })
        .collect();
    let directive = TopologyUpdateDirective {
        base_version: topology.version(),
        risk: CouplingRisk {
            trigger_factors: trigger_factors.to_vec(),
            agents: cascade.agents.clone(),
            domains: cascade.domains.clone(),
            registered_in: 0,
        },
    };
    Ok((ConsolidatedAssessment { incident_id: incident.incident_id, attribution, sections }, directive))
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::agent_runtime::{Pseudonymizer, RetentionPolicy};
    use crate::orchestration::open_incident;

    fn setup(regimes: &[(&str, Minutes)]) -> (IncidentRecord, CascadeEvent, AuditTrail, Topology) {
        let mut trail = AuditTrail::new(RetentionPolicy::default(), Pseudonymizer::new("k"));
        let cascade = CascadeEvent {
            cascade_id: 1,
            signals: vec![],
            agents: BTreeSet::from(["E".into(), "T".into()]),
            domains: BTreeSet::from(["energy".into(), "traffic".into()]),
            opened_at: 30,
            window_used: 30,
            known_risk: false,
        };
        let regimes: BTreeMap<String, Minutes> = regimes.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let inc = open_incident(1, &cascade, &regimes, 30, &mut trail, []).unwrap();
        let topo = Topology::register(&[], &BTreeSet::new()).unwrap();
        (inc, cascade, trail, topo)
    }

    #[test]
    fn open_incident_refuses_without_override() {
        let (inc, c, trail, topo) = setup(&[("GDPR", 4320)]);
        assert!(matches!(
            consolidate_assessment(&inc, &c, &trail, &topo, &[], false),
            Err(OrchestrationError::OpenIncident(1))
        ));
        assert!(consolidate_assessment(&inc, &c, &trail, &topo, &[], true).is_ok());
    }

    #[test]
    fn single_regime_single_section_and_directive_bumps_version() {
        let (mut inc, c, trail, mut topo) = setup(&[("GDPR", 4320)]);
        inc.status = IncidentStatus::Closing;
        let factors = vec!["substation_fault".to_string(), "metro_diversion".into(), "extreme_heat".into()];
        let (a, d) = consolidate_assessment(&inc, &c, &trail, &topo, &factors, false).unwrap();
        assert_eq!(a.sections.len(), 1);
        assert_eq!(a.sections[0].deadline, 30 + 4320);
        assert_eq!(d.base_version, 1);
        assert_eq!(d.apply(&mut topo), 2);
        assert_eq!(topo.risk_register()[0].trigger_factors, factors);
        assert!(topo.known_risk(&"E".into(), &"T".into()).is_some());
    }
}
