use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::agent_runtime::{AuditTrail, EventKind, NewRecord};
use crate::ids::{AgentId, Minutes, RecordId};

use super::{CascadeEvent, OrchestrationError, ORCHESTRATION_OWNER};

crate::str_enum! {
    pub enum IncidentStatus { Open, Closing, Closed }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Notification {
    pub regime: String,
    pub sent_at: Minutes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncidentRecord {
    pub incident_id: u64,
    pub cascade_id: u64,
    pub t0: Minutes,
    /// Regime name to notification window, in minutes after `t0`.
    pub regime_clocks: BTreeMap<String, Minutes>,
    pub baseline_deadline: Minutes,
    pub notifications: BTreeSet<Notification>,
    pub shared_record_id: RecordId,
    pub status: IncidentStatus,
}

impl IncidentRecord {
    pub fn absolute_deadline(&self, regime: &str) -> Option<Minutes> {
        self.regime_clocks.get(regime).map(|w| self.t0 + w)
    }

    /// Structured text export of the incident.
    pub fn export(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "incident_id\t{}", self.incident_id);
        let _ = writeln!(out, "cascade_id\t{}", self.cascade_id);
        let _ = writeln!(out, "t0\t{}", self.t0);
        let _ = writeln!(out, "regime\twindow\tdeadline\tnotified_at");
        for (regime, window) in &self.regime_clocks {
            let sent = self.notifications.iter().find(|n| &n.regime == regime).map(|n| n.sent_at.to_string());
            let _ = writeln!(out, "{regime}\t{window}\t{}\t{}", self.t0 + window, sent.as_deref().unwrap_or("-"));
        }
        let _ = writeln!(out, "baseline\t{}", self.baseline_deadline);
        let _ = writeln!(out, "shared_record_id\t{}", self.shared_record_id);
        out
    }
}

/// Strictest clock: the earliest notification window of any applicable regime.
pub fn baseline_deadline(regimes: &BTreeMap<String, Minutes>) -> Option<Minutes> {
    regimes.values().copied().min()
}

/// Opens the single shared incident for a cascade and dispatches one
/// notification per regime in parallel at `t0`.
pub fn open_incident(
    incident_id: u64,
    cascade: &CascadeEvent,
    regimes: &BTreeMap<String, Minutes>,
    t0: Minutes,
    trail: &mut AuditTrail,
    causes: impl IntoIterator<Item = RecordId>,
) -> Result<IncidentRecord, OrchestrationError> {
    let baseline = baseline_deadline(regimes).ok_or(OrchestrationError::EmptyRegimeSet)?;
    let regime_list = regimes.keys().cloned().collect::<Vec<_>>().join(",");
    let shared = trail.append(
        NewRecord::new(AgentId::new(ORCHESTRATION_OWNER), t0, EventKind::GovernanceEvidence)
            .field("incident", incident_id)
            .field("cascade", cascade.cascade_id)
            .field("regimes", regime_list)
            .field("baseline_deadline", baseline)
            .causes(causes),
    )?;
    Ok(IncidentRecord {
        incident_id,
        cascade_id: cascade.cascade_id,
        t0,
        regime_clocks: regimes.clone(),
        baseline_deadline: baseline,
        notifications: regimes.keys().map(|r| Notification { regime: r.clone(), sent_at: t0 }).collect(),
        shared_record_id: shared,
        status: IncidentStatus::Open,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_runtime::{Pseudonymizer, RetentionPolicy};

    fn cascade() -> CascadeEvent {
        CascadeEvent {
            cascade_id: 1,
            signals: vec![],
            agents: BTreeSet::new(),
            domains: BTreeSet::new(),
            opened_at: 30,
            window_used: 30,
            known_risk: false,
        }
    }

    fn regimes(pairs: &[(&str, Minutes)]) -> BTreeMap<String, Minutes> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn trail() -> AuditTrail {
        AuditTrail::new(RetentionPolicy::default(), Pseudonymizer::new("k"))
    }

    #[test]
    fn nis2_gdpr_baseline_is_one_day() {
        let mut t = trail();
        let inc = open_incident(1, &cascade(), &regimes(&[("NIS2", 1440), ("GDPR", 4320)]), 30, &mut t, []).unwrap();
        assert_eq!(inc.baseline_deadline, 1440);
        assert_eq!(inc.notifications.len(), 2);
        assert!(inc.notifications.iter().all(|n| n.sent_at == 30));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn singleton_and_three_regimes() {
        let mut t = trail();
        let inc = open_incident(1, &cascade(), &regimes(&[("GDPR", 4320)]), 0, &mut t, []).unwrap();
        assert_eq!(inc.baseline_deadline, 4320);
        let inc = open_incident(
            2,
            &cascade(),
            &regimes(&[("NIS2", 1440), ("GDPR", 4320), ("AIACT", 15 * 1440)]),
            0,
            &mut t,
            [],
        )
        .unwrap();
        assert_eq!(inc.baseline_deadline, 1440);
        assert_eq!(inc.notifications.len(), 3);
        assert_ne!(inc.shared_record_id, RecordId(1));
    }

    #[test]
    fn empty_regime_set() {
        let err = open_incident(1, &cascade(), &BTreeMap::new(), 0, &mut trail(), []).unwrap_err();
        assert!(matches!(err, OrchestrationError::EmptyRegimeSet));
    }

    #[test]
    fn export_lists_each_regime() {
        let inc =
            open_incident(1, &cascade(), &regimes(&[("NIS2", 1440), ("GDPR", 4320)]), 30, &mut trail(), []).unwrap();
        let text = inc.export();
        assert!(text.contains("NIS2\t1440\t1470\t30\n"));
        assert!(text.contains("baseline\t1440\n"));
    }
}
