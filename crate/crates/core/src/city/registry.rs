use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::calibration::{
    assign_governance_level, classify_autonomy, oversight_posture, AutonomyEvidence, AutonomyLevel, GovernanceLevel,
    SystemProfile,
};
use crate::ids::{AgentId, ParseIdError};

use super::CityError;

pub const DEFAULT_REGISTRY: &str = include_str!("../../data/registry.toml");

crate::str_enum! {
    pub enum GovernanceBasis { Binding, Voluntary }
}

crate::str_enum! {
    pub enum DisclosureTier { Public, Regulator }
}

/// Assessed autonomy, possibly spanning adjacent levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AutonomyRange {
    pub min: AutonomyLevel,
    pub max: AutonomyLevel,
}

impl AutonomyRange {
    pub fn contains(&self, level: AutonomyLevel) -> bool {
        self.min <= level && level <= self.max
    }
}

impl fmt::Display for AutonomyRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.min == self.max {
            write!(f, "{}", self.min)
        } else {
            write!(f, "{}-{}", self.min, self.max)
        }
    }
}

impl FromStr for AutonomyRange {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (min, max) = match s.split_once('-') {
            Some((a, b)) => (a.parse()?, b.parse()?),
            None => {
                let l = s.parse()?;
                (l, l)
            }
        };
        if min > max {
            return Err(ParseIdError(s.to_string()));
        }
        Ok(Self { min, max })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistryEntry {
    pub profile: SystemProfile,
    pub name: String,
    pub autonomy: AutonomyRange,
    pub governance_basis: GovernanceBasis,
    pub key_metric: String,
    /// Documentation withheld from the public tier.
    pub confidential: BTreeMap<String, String>,
}

impl RegistryEntry {
    pub fn level(&self) -> GovernanceLevel {
        assign_governance_level(&self.profile)
    }

    pub fn tiers(&self) -> BTreeSet<DisclosureTier> {
        BTreeSet::from([DisclosureTier::Public, DisclosureTier::Regulator])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegistry {
    #[serde(default)]
    system: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    name: String,
    authority: String,
    domain: String,
    autonomy: String,
    governance_basis: GovernanceBasis,
    key_metric: String,
    evidence: AutonomyEvidence,
    #[serde(default)]
    endangers_essential_services: bool,
    #[serde(default)]
    cross_org_dependencies: bool,
    #[serde(default)]
    multi_agent_ecosystem: bool,
    #[serde(default)]
    confidential: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default)]
pub struct Registry {
    entries: BTreeMap<AgentId, RegistryEntry>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(source: &str) -> Result<Self, CityError> {
        let raw: RawRegistry = toml::from_str(source).map_err(|e| CityError::Schema(e.to_string()))?;
        let mut reg = Registry::new();
        for r in raw.system {
            let autonomy: AutonomyRange = r
                .autonomy
                .parse()
                .map_err(|_| CityError::Schema(format!("{}: bad autonomy `{}`", r.id, r.autonomy)))?;
            let profile = SystemProfile {
                id: AgentId::new(r.id),
                authority: r.authority,
                domain: r.domain,
                evidence: r.evidence,
                endangers_essential_services: r.endangers_essential_services,
                cross_org_dependencies: r.cross_org_dependencies,
                multi_agent_ecosystem: r.multi_agent_ecosystem,
            };
            let entry = reg.register_system(profile, autonomy, &r.key_metric, r.governance_basis)?;
            entry.name = r.name;
            entry.confidential = r.confidential;
        }
        Ok(reg)
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_REGISTRY).expect("shipped registry is valid")
    }

    pub fn register_system(
        &mut self,
        profile: SystemProfile,
        autonomy: AutonomyRange,
        key_metric: &str,
        basis: GovernanceBasis,
    ) -> Result<&mut RegistryEntry, CityError> {
        if self.entries.contains_key(&profile.id) {
            return Err(CityError::DuplicateSystem(profile.id));
        }
        let id = profile.id.clone();
        let entry = RegistryEntry {
            name: id.to_string(),
            profile,
            autonomy,
            governance_basis: basis,
            key_metric: key_metric.to_string(),
            confidential: BTreeMap::new(),
        };
        Ok(self.entries.entry(id).or_insert(entry))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &AgentId) -> Option<&RegistryEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    pub fn by_basis(&self, basis: GovernanceBasis) -> Vec<&RegistryEntry> {
        self.entries().filter(|e| e.governance_basis == basis).collect()
    }

    pub fn by_authority(&self, authority: &str) -> Vec<&RegistryEntry> {
        self.entries().filter(|e| e.profile.authority == authority).collect()
    }

    pub fn by_domain(&self, domain: &str) -> Vec<&RegistryEntry> {
        self.entries().filter(|e| e.profile.domain == domain).collect()
    }

    pub fn by_level(&self, level: GovernanceLevel) -> Vec<&RegistryEntry> {
        self.entries().filter(|e| e.level() == level).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisclosurePackage {
    pub system: AgentId,
    pub tier: DisclosureTier,
    pub fields: BTreeMap<String, String>,
}

/// Builds the documentation package for one tier. Regulators receive every
/// field, including confidential ones and a pointer into the audit trail.
pub fn publish_disclosure(
    registry: &Registry,
    system: &AgentId,
    tier: DisclosureTier,
) -> Result<DisclosurePackage, CityError> {
    let e = registry.get(system).ok_or_else(|| CityError::UnknownSystem(system.clone()))?;
    let level = e.level();
    let mut fields = BTreeMap::from([
        ("system".to_string(), e.name.clone()),
        ("authority".to_string(), e.profile.authority.clone()),
        ("domain".to_string(), e.profile.domain.clone()),
        ("autonomy".to_string(), e.autonomy.to_string()),
        ("assessed_autonomy".to_string(), classify_autonomy(&e.profile.evidence).level.to_string()),
        ("governance_basis".to_string(), e.governance_basis.to_string()),
        ("governance_level".to_string(), level.to_string()),
        ("oversight_posture".to_string(), oversight_posture(level).to_string()),
        ("key_metric".to_string(), e.key_metric.clone()),
    ]);
    if tier == DisclosureTier::Regulator {
        fields.extend(e.confidential.iter().map(|(k, v)| (k.clone(), v.clone())));
        fields.insert("trail_access".to_string(), format!("trail://{}", e.profile.id));
    }
    Ok(DisclosurePackage { system: system.clone(), tier, fields })
}
