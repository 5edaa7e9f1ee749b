use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::agent_runtime::AuditTrail;
use crate::ids::{AgentId, RecordId};
use crate::orchestration::{attribute, AttributionReport};

use super::CityError;

pub const LANGUAGES: &[&str] = &["ar", "en"];

const TEMPLATE_EN: &str = "Case {case}\n\
Decision: {decision}\n\
Information relied upon: {information}\n\
Contributing systems: {systems}\n\
Responsible authorities: {authorities}\n\
Review available: {review}\n\
Remedy: {remedy}\n";

const TEMPLATE_AR: &str = "القضية {case}\n\
القرار: {decision}\n\
المعلومات التي تم الاعتماد عليها: {information}\n\
الأنظمة المساهمة: {systems}\n\
الجهات المسؤولة: {authorities}\n\
المراجعة المتاحة: {review}\n\
سبل الانتصاف: {remedy}\n";

crate::str_enum! {
    pub enum CaseStatus { Open, UnderReview, Resolved }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CaseId(pub u64);

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case-{:04}", self.0)
    }
}

impl std::str::FromStr for CaseId {
    type Err = crate::ids::ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("case-")
            .and_then(|n| n.parse().ok())
            .map(CaseId)
            .ok_or_else(|| crate::ids::ParseIdError(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContestationConfig {
    pub review_path: String,
    pub remedy: String,
}

impl Default for ContestationConfig {
    fn default() -> Self {
        Self {
            review_path: "joint review by every contributing authority".into(),
            remedy: "decision suspended pending review; annulment and refund if upheld".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContestationCase {
    pub case_id: CaseId,
    pub decision: RecordId,
    pub decision_summary: String,
    pub information: String,
    pub chain: AttributionReport,
    pub authorities: BTreeSet<String>,
    pub explanations: BTreeMap<String, String>,
    pub review_path: String,
    pub remedy: String,
    pub status: CaseStatus,
}

impl ContestationCase {
    pub fn agents(&self) -> BTreeSet<AgentId> {
        self.chain.agents()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CaseStore {
    config: ContestationConfig,
    cases: Vec<ContestationCase>,
}

impl CaseStore {
    pub fn new(config: ContestationConfig) -> Self {
        Self { config, cases: Vec::new() }
    }

    pub fn get(&self, id: CaseId) -> Option<&ContestationCase> {
        self.cases.iter().find(|c| c.case_id == id)
    }

    pub fn cases(&self) -> &[ContestationCase] {
        &self.cases
    }

    /// Opens a case bound to the full causal chain behind `decision`.
    /// `authority_of` maps contributing agents to their authorities.
    pub fn open_contestation(
        &mut self,
        decision: RecordId,
        trail: &AuditTrail,
        topology_version: u64,
        authority_of: &BTreeMap<AgentId, String>,
    ) -> Result<&mut ContestationCase, CityError> {
        let record = trail.get(decision).ok_or(CityError::UnknownRecord(decision))?;
        let chain = attribute(trail, decision, topology_version).map_err(|_| CityError::UnknownRecord(decision))?;
        let authorities = chain.agents().iter().filter_map(|a| authority_of.get(a).cloned()).collect();
        let information = record.payload.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ");
        let case = ContestationCase {
            case_id: CaseId(self.cases.len() as u64 + 1),
            decision,
            decision_summary: format!("{} by {} at t={}", record.event_kind, record.agent_id, record.timestamp),
            information: if information.is_empty() { "-".into() } else { information },
            chain,
            authorities,
            explanations: BTreeMap::new(),
            review_path: self.config.review_path.clone(),
            remedy: self.config.remedy.clone(),
            status: CaseStatus::Open,
        };
        self.cases.push(case);
        Ok(self.cases.last_mut().expect("just pushed"))
    }

    pub fn advance(&mut self, id: CaseId) -> Result<CaseStatus, CityError> {
        let case = self.cases.iter_mut().find(|c| c.case_id == id).ok_or(CityError::UnknownCase(id))?;
        case.status = match case.status {
            CaseStatus::Open => CaseStatus::UnderReview,
            CaseStatus::UnderReview | CaseStatus::Resolved => CaseStatus::Resolved,
        };
        Ok(case.status)
    }
}

/// Deterministic template fill in one of the shipped resident languages.
pub fn render_explanation(case: &ContestationCase, language: &str) -> Result<String, CityError> {
    let template = match language {
        "en" => TEMPLATE_EN,
        "ar" => TEMPLATE_AR,
        other => return Err(CityError::UnsupportedLanguage(other.to_string())),
    };
    let systems = case.agents().iter().map(AgentId::to_string).collect::<Vec<_>>().join(", ");
    let authorities = case.authorities.iter().cloned().collect::<Vec<_>>().join(", ");
    Ok(template
        .replace("{case}", &case.case_id.to_string())
        .replace("{decision}", &case.decision_summary)
        .replace("{information}", &case.information)
        .replace("{systems}", &systems)
        .replace("{authorities}", &authorities)
        .replace("{review}", &case.review_path)
        .replace("{remedy}", &case.remedy))
}
