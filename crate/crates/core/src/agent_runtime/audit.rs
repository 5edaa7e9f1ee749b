//! Shared inter-agent audit trail with pseudonymized payloads, tiered
//! access and graduated retention.
//!
//! Every record belongs to one agent; the per-agent trail is a filtered view
//! of the shared trail. Appends are totally ordered by record id, which the
//! simulation clock assigns monotonically.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RuntimeError;
use crate::ids::{AgentId, Minutes, RecordId};

pub const MINUTES_PER_DAY: Minutes = 24 * 60;

crate::str_enum! {
    /// Who may read a record. Ordered from least to most privileged.
    pub enum AccessTier { Public, Oversight, Regulator }
}

crate::str_enum! {
    pub enum EventKind {
        PolicyDecision,
        Drift,
        Telemetry,
        Heartbeat,
        Declaration,
        Detection,
        Enforcement,
        Action,
        GovernanceEvidence,
    }
}

crate::str_enum! {
    pub enum RetentionClass { Enforcement, Telemetry, Declaration, Governance }
}

impl EventKind {
    pub fn retention_class(self) -> RetentionClass {
        match self {
            EventKind::Detection | EventKind::Enforcement => RetentionClass::Enforcement,
            EventKind::Drift | EventKind::Telemetry | EventKind::Heartbeat => RetentionClass::Telemetry,
            EventKind::Declaration => RetentionClass::Declaration,
            EventKind::PolicyDecision | EventKind::Action | EventKind::GovernanceEvidence => RetentionClass::Governance,
        }
    }
}

/// Retention windows per record class, in simulated minutes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetentionPolicy {
    pub enforcement: Minutes,
    pub telemetry: Minutes,
    pub declaration: Minutes,
    pub governance: Minutes,
}

impl Default for RetentionPolicy {
    fn default() -> Self {
        Self {
            enforcement: 90 * MINUTES_PER_DAY,
            telemetry: 7 * MINUTES_PER_DAY,
            declaration: 365 * MINUTES_PER_DAY,
            governance: 365 * MINUTES_PER_DAY,
        }
    }
}

impl RetentionPolicy {
    pub fn window(&self, class: RetentionClass) -> Minutes {
        match class {
            RetentionClass::Enforcement => self.enforcement,
            RetentionClass::Telemetry => self.telemetry,
            RetentionClass::Declaration => self.declaration,
            RetentionClass::Governance => self.governance,
        }
    }
}

/// Keyed deterministic token substitution. The key never enters the trail.
#[derive(Clone)]
pub struct Pseudonymizer {
    key: Vec<u8>,
}

impl std::fmt::Debug for Pseudonymizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Pseudonymizer { .. }")
    }
}

impl Pseudonymizer {
    pub fn new(key: impl AsRef<[u8]>) -> Self {
        Self { key: key.as_ref().to_vec() }
    }

    pub fn token(&self, subject: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.key.len() as u64).to_be_bytes());
        hasher.update(&self.key);
        hasher.update(subject.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::from("pn-");
        for byte in &digest[..8] {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

/// Payload keys whose values identify a data subject.
pub const SUBJECT_KEYS: [&str; 3] = ["subject", "plate", "resident"];

pub type Payload = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRecord {
    pub record_id: RecordId,
    pub agent_id: AgentId,
    pub timestamp: Minutes,
    pub event_kind: EventKind,
    pub payload: Payload,
    /// Set when subject-identifying values were replaced by pseudonyms.
    pub pseudonymized: bool,
    pub access_tier: AccessTier,
    pub retention_deadline: Minutes,
    pub cause_links: BTreeSet<RecordId>,
    pub tombstone: bool,
}

impl AuditRecord {
    /// Export line: record_id, timestamp, agent_id, event_kind, tier,
    /// tombstone flag, cause links, payload. Tab separated.
    pub fn export_line(&self) -> String {
        let causes = if self.cause_links.is_empty() {
            "-".to_string()
        } else {
            self.cause_links.iter().map(RecordId::to_string).collect::<Vec<_>>().join(",")
        };
        let payload = if self.payload.is_empty() {
            "-".to_string()
        } else {
            let mut fields: Vec<String> =
                self.payload.iter().map(|(k, v)| format!("{}={}", clean(k), clean(v))).collect();
            if self.pseudonymized {
                fields.insert(0, "pseudonymized=1".into());
            }
            fields.join(";")
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.record_id,
            self.timestamp,
            self.agent_id,
            self.event_kind,
            self.access_tier,
            u8::from(self.tombstone),
            causes,
            payload
        )
    }
}

fn clean(s: &str) -> String {
    s.chars().map(|c| if matches!(c, '\t' | '\n' | '\r' | ';') { ' ' } else { c }).collect()
}

/// A record to append. The trail assigns id, deadline and pseudonyms.
#[derive(Clone, Debug)]
pub struct NewRecord {
    pub agent_id: AgentId,
    pub timestamp: Minutes,
    pub event_kind: EventKind,
    pub payload: Payload,
    pub subject_identifying: bool,
    pub access_tier: AccessTier,
    pub cause_links: BTreeSet<RecordId>,
}

impl NewRecord {
    pub fn new(agent_id: AgentId, timestamp: Minutes, event_kind: EventKind) -> Self {
        Self {
            agent_id,
            timestamp,
            event_kind,
            payload: Payload::new(),
            subject_identifying: false,
            access_tier: AccessTier::Oversight,
            cause_links: BTreeSet::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.payload.insert(key.to_string(), value.to_string());
        self
    }

    pub fn identifying(mut self, yes: bool) -> Self {
        self.subject_identifying = yes;
        self
    }

    pub fn tier(mut self, tier: AccessTier) -> Self {
        self.access_tier = tier;
        self
    }

    pub fn causes(mut self, causes: impl IntoIterator<Item = RecordId>) -> Self {
        self.cause_links.extend(causes);
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PurgeReport {
    pub purged_by_tier: BTreeMap<AccessTier, usize>,
}

impl PurgeReport {
    pub fn total(&self) -> usize {
        self.purged_by_tier.values().sum()
    }
}

#[derive(Clone, Debug)]
pub struct AuditTrail {
    records: Vec<AuditRecord>,
    retention: RetentionPolicy,
    pseudonymizer: Pseudonymizer,
}

impl AuditTrail {
    pub fn new(retention: RetentionPolicy, pseudonymizer: Pseudonymizer) -> Self {
        Self { records: Vec::new(), retention, pseudonymizer }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn get(&self, id: RecordId) -> Option<&AuditRecord> {
        // ids are dense and start at 1
        let idx = usize::try_from(id.0).ok()?.checked_sub(1)?;
        self.records.get(idx).filter(|r| r.record_id == id)
    }

    pub fn contains(&self, id: RecordId) -> bool {
        self.get(id).is_some()
    }

    pub fn agent_trail<'a>(&'a self, agent: &'a AgentId) -> impl Iterator<Item = &'a AuditRecord> + 'a {
        self.records.iter().filter(move |r| &r.agent_id == agent)
    }

    /// Records readable at `tier`.
    pub fn view(&self, tier: AccessTier) -> impl Iterator<Item = &AuditRecord> {
        self.records.iter().filter(move |r| r.access_tier <= tier)
    }

    pub fn append(&mut self, new: NewRecord) -> Result<RecordId, RuntimeError> {
        for cause in &new.cause_links {
            let linked = self.get(*cause).ok_or(RuntimeError::DanglingCauseLink(*cause))?;
            if linked.timestamp >= new.timestamp {
                return Err(RuntimeError::CauseNotEarlier { cause: *cause, at: new.timestamp });
            }
        }
        let record_id = RecordId(self.records.len() as u64 + 1);
        let mut payload = new.payload;
        if new.subject_identifying {
            let has_subject_key = payload.keys().any(|k| SUBJECT_KEYS.contains(&k.as_str()));
            for (key, value) in payload.iter_mut() {
                if !has_subject_key || SUBJECT_KEYS.contains(&key.as_str()) {
                    *value = self.pseudonymizer.token(value);
                }
            }
        }
        let window = self.retention.window(new.event_kind.retention_class());
        self.records.push(AuditRecord {
            record_id,
            agent_id: new.agent_id,
            timestamp: new.timestamp,
            event_kind: new.event_kind,
            payload,
            pseudonymized: new.subject_identifying,
            access_tier: new.access_tier,
            retention_deadline: new.timestamp + window.max(1),
            cause_links: new.cause_links,
            tombstone: false,
        });
        Ok(record_id)
    }

    /// Tombstones every record whose deadline has passed: the payload is
    /// erased, the skeleton (id, time, kind, cause links) stays.
    pub fn apply_retention(&mut self, now: Minutes) -> PurgeReport {
        let mut report = PurgeReport::default();
        for record in self.records.iter_mut().filter(|r| !r.tombstone && r.retention_deadline < now) {
            record.payload.clear();
            record.tombstone = true;
            *report.purged_by_tier.entry(record.access_tier).or_default() += 1;
        }
        report
    }

    /// Line-delimited export ordered by (timestamp, record_id).
    pub fn export(&self) -> String {
        let mut sorted: Vec<&AuditRecord> = self.records.iter().collect();
        sorted.sort_by_key(|r| (r.timestamp, r.record_id));
        sorted.iter().map(|r| r.export_line() + "\n").collect()
    }
}
