use std::collections::BTreeSet;
use std::fmt;

use crate::catalog::Layer;
use crate::ids::{measure, MeasureId, Minutes, RuleId};

use super::shipped_catalog as catalog;
use super::trace::ActivationTrace;

/// Mechanisms that count as cross-agency coordination points: joint
/// oversight, attribution and consolidated assessment.
pub const COORDINATION_MEASURES: [MeasureId; 3] = [measure(6), measure(24), measure(12)];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationSummary {
    pub measures: BTreeSet<MeasureId>,
    pub detection_time: Option<Minutes>,
    pub coordination_points: BTreeSet<MeasureId>,
    pub rules: BTreeSet<RuleId>,
    pub layers: BTreeSet<Layer>,
    pub chain_complete: bool,
    pub systemic_learning: bool,
}

/// Derives the summary from the trace alone.
pub fn summarize(trace: &ActivationTrace) -> ActivationSummary {
    let measures: BTreeSet<MeasureId> = trace.rows.iter().flat_map(|r| r.measures.iter().copied()).collect();
    let rules = trace.rows.iter().flat_map(|r| r.rules.iter().copied()).collect();
    let layers = measures.iter().filter_map(|m| catalog().layer_of(*m)).filter(|l| *l != Layer::Unassigned).collect();
    let coordination_points = COORDINATION_MEASURES.iter().copied().filter(|m| measures.contains(m)).collect();
    let chain_complete = trace
        .decisions
        .iter()
        .all(|d| d.case.is_some() && d.case_agents == d.attribution_agents && !d.case_agents.is_empty());
    ActivationSummary {
        measures,
        detection_time: trace.detection_at.map(|t| t - trace.t0),
        coordination_points,
        rules,
        layers,
        chain_complete,
        systemic_learning: !trace.directives.is_empty(),
    }
}

impl fmt::Display for ActivationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| if v.is_empty() { "-".to_string() } else { v.join(",") };
        let total = catalog().measures.len();
        writeln!(
            f,
            "measures_activated\t{} of {total}\t{}",
            self.measures.len(),
            join(self.measures.iter().map(|m| m.to_string()).collect())
        )?;
        match self.detection_time {
            Some(t) => writeln!(f, "detection_time_min\t{t}")?,
            None => writeln!(f, "detection_time_min\t-")?,
        }
        writeln!(
            f,
            "coordination_points\t{}\t{}",
            self.coordination_points.len(),
            join(self.coordination_points.iter().map(|m| m.to_string()).collect())
        )?;
        writeln!(
            f,
            "rules_invoked\t{}\t{}",
            self.rules.len(),
            join(self.rules.iter().map(|r| r.to_string()).collect())
        )?;
        writeln!(
            f,
            "layers_activated\t{}\t{}",
            self.layers.len(),
            join(self.layers.iter().map(|l| l.code().to_string()).collect())
        )?;
        writeln!(f, "chain_complete\t{}", self.chain_complete)?;
        writeln!(f, "systemic_learning\t{}", self.systemic_learning)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trace::RunMode;

    #[test]
    fn empty_trace_is_all_zero() {
        let s = summarize(&ActivationTrace::empty("x", RunMode::WithFramework, 0));
        assert!(s.measures.is_empty() && s.rules.is_empty() && s.layers.is_empty() && s.coordination_points.is_empty());
        assert_eq!(s.detection_time, None);
        assert!(!s.systemic_learning);
    }
}
