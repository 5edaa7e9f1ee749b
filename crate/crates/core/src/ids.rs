//! Identifier newtypes shared across the engine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Simulated clock value in whole minutes.
pub type Minutes = u64;

/// Governance measure identifier, `R-01` through `R-25`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasureId(u8);

impl MeasureId {
    pub const MAX: u8 = 25;

    pub fn new(number: u8) -> Option<Self> {
        (1..=Self::MAX).contains(&number).then_some(Self(number))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    /// All 25 identifiers in ascending order.
    pub fn all() -> impl Iterator<Item = MeasureId> {
        (1..=Self::MAX).map(MeasureId)
    }
}

/// Shorthand for building a measure id from a literal number in code paths
/// where the value is known to be in range.
pub const fn measure(number: u8) -> MeasureId {
    assert!(number >= 1 && number <= MeasureId::MAX);
    MeasureId(number)
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R-{:02}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid identifier `{0}`")]
pub struct ParseIdError(pub String);

impl FromStr for MeasureId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("R-")
            .filter(|d| d.len() == 2 && d.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| ParseIdError(s.to_string()))?;
        digits.parse::<u8>().ok().and_then(MeasureId::new).ok_or_else(|| ParseIdError(s.to_string()))
    }
}

impl Serialize for MeasureId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeasureId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Conflict-resolution rule identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl RuleId {
    pub const ALL: [RuleId; 5] = [RuleId::T1, RuleId::T2, RuleId::T3, RuleId::T4, RuleId::T5];
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            RuleId::T1 => 1,
            RuleId::T2 => 2,
            RuleId::T3 => 3,
            RuleId::T4 => 4,
            RuleId::T5 => 5,
        };
        write!(f, "T{n}")
    }
}

impl FromStr for RuleId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL.into_iter().find(|r| r.to_string() == s).ok_or_else(|| ParseIdError(s.to_string()))
    }
}

/// Identifier of a deployed agent system within a scenario or registry.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Audit record identifier. Assigned sequentially by the trail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordId(pub u64);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rec-{:05}", self.0)
    }
}

impl FromStr for RecordId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("rec-").and_then(|n| n.parse().ok()).map(RecordId).ok_or_else(|| ParseIdError(s.to_string()))
    }
}
