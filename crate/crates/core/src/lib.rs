//! Governance control plane for interacting smart-city AI agents.
//!
//! The engine is split by the layer a mechanism executes at:
//!
//! - [`catalog`]: the 25-measure control catalog, regulatory traceability
//!   and the five conflict-resolution rules.
//! - [`calibration`]: autonomy evidence, governance levels G1..G5 and the
//!   per-level layer activation rule.
//! - [`agent_runtime`]: unit-level policy enforcement, drift detection,
//!   tiered audit logging with retention, reassessment triggers.
//! - [`orchestration`]: interaction topology, cascade correlation,
//!   strictest-clock incident triage, joint oversight, attribution,
//!   conflict dispatch and consolidated assessment.
//! - [`city`]: registry, tiered disclosure, fairness monitoring,
//!   contestation and explanation rendering.
//! - [`sim`]: deterministic discrete-event scenario engine producing
//!   activation traces and summaries.

pub mod agent_runtime;
pub mod calibration;
pub mod catalog;
pub mod city;
pub mod ids;
pub mod orchestration;
pub mod sim;

pub use ids::{AgentId, MeasureId, Minutes, RecordId, RuleId};

/// Declares a fieldless enum whose `Display`/`FromStr` use the variant name.
#[macro_export]
#[doc(hidden)]
macro_rules! str_enum {
    ($(#[$meta:meta])* $vis:vis enum $name:ident { $($variant:ident),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
        $vis enum $name { $($variant),+ }

        impl $name {
            pub const VARIANTS: &'static [&'static str] = &[$(stringify!($variant)),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => stringify!($variant)),+ }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $name {
            type Err = $crate::ids::ParseIdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok($name::$variant),)+
                    other => Err($crate::ids::ParseIdError(other.to_string())),
                }
            }
        }
    };
}
