use std::collections::{BTreeMap, BTreeSet};

use crate::agent_runtime::AuditTrail;
use crate::ids::{AgentId, RecordId};

use super::OrchestrationError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributionReport {
    pub outcome: RecordId,
    /// Contributing agent to its ancestor record ids, ascending.
    pub contributors: BTreeMap<AgentId, Vec<RecordId>>,
    pub topology_version: u64,
}

impl AttributionReport {
    pub fn agents(&self) -> BTreeSet<AgentId> {
        self.contributors.keys().cloned().collect()
    }
}

/// Owners of every record in the causal closure of `outcome`, the outcome
/// itself included.
pub fn attribute(
    trail: &AuditTrail,
    outcome: RecordId,
    topology_version: u64,
) -> Result<AttributionReport, OrchestrationError> {
    if !trail.contains(outcome) {
        return Err(OrchestrationError::UnknownRecord(outcome));
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![outcome];
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        if let Some(r) = trail.get(id) {
            stack.extend(r.cause_links.iter().copied());
        }
    }
    let mut contributors: BTreeMap<AgentId, Vec<RecordId>> = BTreeMap::new();
    for id in seen {
        let owner = trail.get(id).expect("closure only follows existing records").agent_id.clone();
        contributors.entry(owner).or_default().push(id);
    }
    Ok(AttributionReport { outcome, contributors, topology_version })
}
