//! Control catalog: the 25 governance measures, their regulatory
//! traceability links, and the five conflict-resolution rules.
//!
//! The catalog is immutable once loaded. [`load_catalog`] parses and then
//! runs [`validate_catalog`], rejecting any catalog with findings;
//! [`parse_catalog`] stops after the schema check so that a malformed
//! catalog can still be inspected and reported on.
//!
//! Seven measures (R-11, R-15, R-17, R-18, R-21, R-22, R-25) are carried as
//! inert stubs: no name, no obligations, no layer, never activatable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{measure, MeasureId, RuleId};

/// The catalog shipped with the engine.
pub const DEFAULT_CATALOG: &str = include_str!("../data/catalog.toml");

pub const EXPECTED_MEASURE_COUNT: usize = 25;
pub const EXPECTED_ACTIVATABLE_COUNT: usize = 18;

pub const STUB_IDS: [MeasureId; 7] =
    [measure(11), measure(15), measure(17), measure(18), measure(21), measure(22), measure(25)];

pub const NOVEL_IDS: [MeasureId; 5] = [measure(1), measure(2), measure(3), measure(4), measure(5)];

const AGENT_CENSUS: [MeasureId; 5] = [measure(9), measure(10), measure(19), measure(20), measure(23)];
const CITY_CENSUS: [MeasureId; 5] = [measure(4), measure(8), measure(13), measure(14), measure(16)];
const ORCHESTRATION_CENSUS: [MeasureId; 8] =
    [measure(1), measure(2), measure(3), measure(5), measure(6), measure(7), measure(12), measure(24)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    Agent,
    Orchestration,
    City,
    Unassigned,
}

impl Layer {
    /// Single-letter code used in activation traces.
    pub fn code(self) -> &'static str {
        match self {
            Layer::Agent => "A",
            Layer::Orchestration => "O",
            Layer::City => "C",
            Layer::Unassigned => "-",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Novel,
    Integration,
    Implementation,
    Stub,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Framework {
    #[serde(rename = "AIACT")]
    AiAct,
    #[serde(rename = "ISO42001")]
    Iso42001,
    #[serde(rename = "NISTRMF")]
    NistRmf,
    #[serde(rename = "OTHER")]
    Other,
}

impl Framework {
    pub fn label(self) -> &'static str {
        match self {
            Framework::AiAct => "AIACT",
            Framework::Iso42001 => "ISO42001",
            Framework::NistRmf => "NISTRMF",
            Framework::Other => "OTHER",
        }
    }
}

impl std::str::FromStr for Framework {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AIACT" => Ok(Framework::AiAct),
            "ISO42001" => Ok(Framework::Iso42001),
            "NISTRMF" => Ok(Framework::NistRmf),
            "OTHER" => Ok(Framework::Other),
            other => Err(CatalogError::Schema(format!("unknown framework `{other}`"))),
        }
    }
}

/// A pointer from a measure to the provision it operationalises.
/// Locators are opaque labels matched by exact string comparison.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObligationRef {
    pub framework: Framework,
    pub locator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ObligationRef {
    pub fn new(framework: Framework, locator: impl Into<String>) -> Self {
        Self { framework, locator: locator.into(), note: None }
    }

    fn matches(&self, other: &ObligationRef) -> bool {
        self.framework == other.framework && self.locator == other.locator
    }
}

impl fmt::Display for ObligationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.framework.label(), self.locator)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernanceMeasure {
    pub id: MeasureId,
    #[serde(default)]
    pub name: String,
    pub layer: Layer,
    pub kind: MeasureKind,
    pub activatable: bool,
    #[serde(default)]
    pub gap_addressed: String,
    /// Free-form assessor notes, e.g. alternative layer placements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
    #[serde(default)]
    pub obligations: Vec<ObligationRef>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    TieredLogging,
    GraduatedRetention,
    ConsolidatedAssessment,
    StrictestClockTriage,
    TieredDisclosure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictRule {
    pub id: RuleId,
    pub tension: String,
    pub implementing_measures: Vec<MeasureId>,
    pub resolution: Resolution,
    pub layer: Layer,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog schema error: {0}")]
    Schema(String),
    #[error("catalog integrity error: {}", format_findings(.0))]
    Integrity(Vec<Finding>),
    #[error("unknown measure {0}")]
    UnknownMeasure(String),
    #[error("unknown conflict rule {0}")]
    UnknownRule(String),
}

fn format_findings(findings: &[Finding]) -> String {
    findings.iter().map(Finding::to_string).collect::<Vec<_>>().join("; ")
}

/// One invariant violation reported by [`validate_catalog`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    /// Measure id, rule id, or `catalog` for whole-catalog checks.
    pub subject: String,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.subject, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn by_rule<'a>(&'a self, rule: &'a str) -> impl Iterator<Item = &'a Finding> + 'a {
        self.findings.iter().filter(move |f| f.rule == rule)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    #[serde(rename = "measure", default)]
    pub measures: Vec<GovernanceMeasure>,
    #[serde(rename = "rule", default)]
    pub rules: Vec<ConflictRule>,
}

impl Catalog {
    /// Loads and validates the shipped catalog.
    pub fn shipped() -> Catalog {
        load_catalog(DEFAULT_CATALOG).expect("shipped catalog is valid")
    }

    pub fn measure(&self, id: MeasureId) -> Option<&GovernanceMeasure> {
        self.measures.iter().find(|m| m.id == id)
    }

    pub fn layer_of(&self, id: MeasureId) -> Option<Layer> {
        self.measure(id).map(|m| m.layer)
    }

    pub fn is_activatable(&self, id: MeasureId) -> bool {
        self.measure(id).is_some_and(|m| m.activatable)
    }

    pub fn rule(&self, id: RuleId) -> Option<&ConflictRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn count_kind(&self, kind: MeasureKind) -> usize {
        self.measures.iter().filter(|m| m.kind == kind).count()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("catalog serializes")
    }
}

/// Parses a catalog without running integrity checks.
pub fn parse_catalog(source: &str) -> Result<Catalog, CatalogError> {
    toml::from_str(source).map_err(|e| CatalogError::Schema(e.message().to_string()))
}

/// Parses and validates; any finding is an [`CatalogError::Integrity`].
pub fn load_catalog(source: &str) -> Result<Catalog, CatalogError> {
    let catalog = parse_catalog(source)?;
    let report = validate_catalog(&catalog);
    if report.is_clean() {
        Ok(catalog)
    } else {
        Err(CatalogError::Integrity(report.findings))
    }
}

/// All measures that cite `obligation` (same framework, identical locator).
pub fn trace_forward(catalog: &Catalog, obligation: &ObligationRef) -> BTreeSet<MeasureId> {
    catalog.measures.iter().filter(|m| m.obligations.iter().any(|o| o.matches(obligation))).map(|m| m.id).collect()
}

pub fn trace_backward(catalog: &Catalog, id: MeasureId) -> Result<Vec<ObligationRef>, CatalogError> {
    catalog.measure(id).map(|m| m.obligations.clone()).ok_or_else(|| CatalogError::UnknownMeasure(id.to_string()))
}

pub fn resolve_rule<'c>(catalog: &'c Catalog, tension_id: &str) -> Result<&'c ConflictRule, CatalogError> {
    let id: RuleId = tension_id.parse().map_err(|_| CatalogError::UnknownRule(tension_id.to_string()))?;
    catalog.rule(id).ok_or_else(|| CatalogError::UnknownRule(tension_id.to_string()))
}

/// Fixed rule-to-mechanism mapping the catalog must reproduce.
fn expected_rule(id: RuleId) -> (&'static [MeasureId], Resolution, Layer) {
    const T1: [MeasureId; 1] = [measure(19)];
    const T2: [MeasureId; 2] = [measure(19), measure(7)];
    const T3: [MeasureId; 1] = [measure(12)];
    const T4: [MeasureId; 1] = [measure(5)];
    const T5: [MeasureId; 1] = [measure(14)];
    match id {
        RuleId::T1 => (&T1, Resolution::TieredLogging, Layer::Agent),
        RuleId::T2 => (&T2, Resolution::GraduatedRetention, Layer::Orchestration),
        RuleId::T3 => (&T3, Resolution::ConsolidatedAssessment, Layer::Orchestration),
        RuleId::T4 => (&T4, Resolution::StrictestClockTriage, Layer::Orchestration),
        RuleId::T5 => (&T5, Resolution::TieredDisclosure, Layer::City),
    }
}

fn expected_layer(id: MeasureId) -> Option<Layer> {
    if AGENT_CENSUS.contains(&id) {
        Some(Layer::Agent)
    } else if CITY_CENSUS.contains(&id) {
        Some(Layer::City)
    } else if ORCHESTRATION_CENSUS.contains(&id) {
        Some(Layer::Orchestration)
    } else if STUB_IDS.contains(&id) {
        Some(Layer::Unassigned)
    } else {
        None
    }
}

pub fn validate_catalog(catalog: &Catalog) -> ValidationReport {
    let mut findings = Vec::new();
    let mut push = |subject: String, rule: &'static str, detail: String| {
        findings.push(Finding { subject, rule, detail });
    };

    if catalog.measures.len() != EXPECTED_MEASURE_COUNT {
        push(
            "catalog".into(),
            "entry-count",
            format!("expected {EXPECTED_MEASURE_COUNT} measures, found {}", catalog.measures.len()),
        );
    }

    let mut seen = BTreeMap::new();
    for m in &catalog.measures {
        *seen.entry(m.id).or_insert(0usize) += 1;
    }
    for (id, n) in &seen {
        if *n > 1 {
            push(id.to_string(), "unique-id", format!("appears {n} times"));
        }
    }

    for m in &catalog.measures {
        let id = m.id.to_string();
        let is_stub_id = STUB_IDS.contains(&m.id);
        let stub_view = [m.kind == MeasureKind::Stub, !m.activatable, m.layer == Layer::Unassigned];
        if stub_view.iter().any(|&v| v != is_stub_id) {
            push(
                id.clone(),
                "stub-consistency",
                format!("stub id: {is_stub_id}; kind={:?} activatable={} layer={}", m.kind, m.activatable, m.layer),
            );
        }
        if (m.kind == MeasureKind::Novel) != NOVEL_IDS.contains(&m.id) {
            push(id.clone(), "novel-set", format!("kind {:?} inconsistent with novel set R-01..R-05", m.kind));
        }
        if is_stub_id && !m.obligations.is_empty() {
            push(id.clone(), "stub-obligations", "stub carries obligation references".into());
        }
        if !is_stub_id && m.obligations.is_empty() {
            push(id.clone(), "obligation-present", "activatable measure has no obligation reference".into());
        }
        if m.obligations.iter().any(|o| o.locator.trim().is_empty()) {
            push(id.clone(), "locator-non-empty", "obligation with empty locator".into());
        }
        if let Some(expected) = expected_layer(m.id) {
            // Stub layer mismatches are already covered by stub-consistency.
            if !is_stub_id && m.layer != expected {
                push(id, "layer-census", format!("assigned {}, expected {expected}", m.layer));
            }
        }
    }

    let activatable = catalog.measures.iter().filter(|m| m.activatable).count();
    if catalog.measures.len() == EXPECTED_MEASURE_COUNT && activatable != EXPECTED_ACTIVATABLE_COUNT {
        push(
            "catalog".into(),
            "activatable-count",
            format!("expected {EXPECTED_ACTIVATABLE_COUNT} activatable measures, found {activatable}"),
        );
    }

    if catalog.rules.len() != RuleId::ALL.len() {
        push("catalog".into(), "rule-count", format!("expected 5 rules, found {}", catalog.rules.len()));
    }
    for id in RuleId::ALL {
        let matching: Vec<_> = catalog.rules.iter().filter(|r| r.id == id).collect();
        match matching.as_slice() {
            [] => push(id.to_string(), "rule-missing", "rule absent".into()),
            [rule] => {
                let (measures, resolution, layer) = expected_rule(id);
                if rule.implementing_measures != measures || rule.resolution != resolution || rule.layer != layer {
                    let ids: Vec<String> = rule.implementing_measures.iter().map(|m| m.to_string()).collect();
                    push(
                        id.to_string(),
                        "rule-mapping",
                        format!(
                            "{} / {:?} / {} does not match the fixed mapping",
                            ids.join(","),
                            rule.resolution,
                            rule.layer
                        ),
                    );
                }
            }
            _ => push(id.to_string(), "unique-rule", format!("appears {} times", matching.len())),
        }
    }

    ValidationReport { findings }
}
