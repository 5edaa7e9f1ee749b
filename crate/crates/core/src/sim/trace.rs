use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::catalog::Layer;
use crate::city::CaseId;
use crate::ids::{AgentId, MeasureId, Minutes, RuleId};
use crate::orchestration::{IncidentRecord, TopologyUpdateDirective};

use super::SimError;

pub const TSV_HEADER: &str = "time_min\tevent\tagents\tmeasures\tlayer\trules";

crate::str_enum! {
    pub enum RunMode { WithFramework, Baseline }
}

/// Layer column of a trace row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowLayer {
    None,
    Agent,
    Orchestration,
    City,
    /// An agent-layer decision handed up to the orchestration layer.
    AgentToOrchestration,
}

impl RowLayer {
    pub fn from_layer(layer: Layer) -> Self {
        match layer {
            Layer::Agent => RowLayer::Agent,
            Layer::Orchestration => RowLayer::Orchestration,
            Layer::City => RowLayer::City,
            Layer::Unassigned => RowLayer::None,
        }
    }
}

impl fmt::Display for RowLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowLayer::None => "-",
            RowLayer::Agent => "A",
            RowLayer::Orchestration => "O",
            RowLayer::City => "C",
            RowLayer::AgentToOrchestration => "A→O",
        })
    }
}

impl FromStr for RowLayer {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "-" => RowLayer::None,
            "A" => RowLayer::Agent,
            "O" => RowLayer::Orchestration,
            "C" => RowLayer::City,
            "A→O" => RowLayer::AgentToOrchestration,
            other => return Err(SimError::Schema(format!("bad layer `{other}`"))),
        })
    }
}

/// One row of the activation trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GovernanceEvent {
    pub time: Minutes,
    pub event: String,
    pub agents: Vec<String>,
    pub measures: BTreeSet<MeasureId>,
    pub layer: RowLayer,
    pub rules: BTreeSet<RuleId>,
}

impl GovernanceEvent {
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.time,
            self.event,
            join_or_dash(self.agents.iter()),
            join_or_dash(self.measures.iter()),
            self.layer,
            join_or_dash(self.rules.iter()),
        )
    }
}

fn join_or_dash<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    let v: Vec<String> = items.map(|i| i.to_string()).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(",")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionAnnotation {
    pub decision: String,
    pub issued_at: Minutes,
    pub case: Option<CaseId>,
    pub case_agents: BTreeSet<AgentId>,
    pub attribution_agents: BTreeSet<AgentId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HumanReviewTask {
    pub agent: AgentId,
    pub requested_at: Minutes,
    pub scheduled_at: Minutes,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationTrace {
    pub scenario: String,
    pub mode: RunMode,
    pub t0: Minutes,
    pub rows: Vec<GovernanceEvent>,
    /// Cascade open time, or the first agent-level detection when no cascade forms.
    pub detection_at: Option<Minutes>,
    pub decisions: Vec<DecisionAnnotation>,
    pub directives: Vec<TopologyUpdateDirective>,
    pub human_reviews: Vec<HumanReviewTask>,
    pub incidents: Vec<IncidentRecord>,
}

impl ActivationTrace {
    pub fn empty(scenario: &str, mode: RunMode, t0: Minutes) -> Self {
        Self {
            scenario: scenario.to_string(),
            mode,
            t0,
            rows: Vec::new(),
            detection_at: None,
            decisions: Vec::new(),
            directives: Vec::new(),
            human_reviews: Vec::new(),
            incidents: Vec::new(),
        }
    }

    pub fn row_at(&self, time: Minutes) -> Option<&GovernanceEvent> {
        self.rows.iter().find(|r| r.time == time)
    }
}

crate::str_enum! {
    pub enum TraceFormat { Tsv, Text }
}

impl TraceFormat {
    pub fn parse_name(name: &str) -> Result<Self, SimError> {
        match name.to_ascii_lowercase().as_str() {
            "tsv" => Ok(TraceFormat::Tsv),
            "text" => Ok(TraceFormat::Text),
            other => Err(SimError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn emit_trace(trace: &ActivationTrace, format: TraceFormat) -> String {
    match format {
        TraceFormat::Tsv => emit_tsv(&trace.rows),
        TraceFormat::Text => emit_text(trace),
    }
}

pub fn emit_tsv(rows: &[GovernanceEvent]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.tsv_line());
        out.push('\n');
    }
    out
}

fn emit_text(trace: &ActivationTrace) -> String {
    let header = ["time", "event", "agents", "measures", "layer", "rules"];
    let cells: Vec<[String; 6]> = trace
        .rows
        .iter()
        .map(|r| {
            let line = r.tsv_line();
            let mut it = line.split('\t').map(str::to_string);
            std::array::from_fn(|_| it.next().unwrap_or_default())
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {} ({})", trace.scenario, trace.mode);
    let fmt_row = |cols: &[String]| {
        cols.iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let _ = writeln!(out, "{}", fmt_row(&header.map(String::from)));
    for row in &cells {
        let _ = writeln!(out, "{}", fmt_row(row));
    }
    let _ = writeln!(out, "times are fixed fixture estimates on a simulated minute clock, not measured latencies");
    out
}

/// Parses a TSV trace back into rows.
pub fn parse_tsv(src: &str) -> Result<Vec<GovernanceEvent>, SimError> {
    let mut lines = src.lines();
    if lines.next() != Some(TSV_HEADER) {
        return Err(SimError::Schema("missing trace header".into()));
    }
    let bad = |l: &str| SimError::Schema(format!("bad trace line `{l}`"));
    lines
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            let [time, event, agents, measures, layer, rules] = cols[..] else { return Err(bad(l)) };
            let list = |s: &str| -> Vec<String> {
                if s == "-" {
                    Vec::new()
                } else {
                    s.split(',').map(str::to_string).collect()
                }
            };
            Ok(GovernanceEvent {
                time: time.parse().map_err(|_| bad(l))?,
                event: event.to_string(),
                agents: list(agents),
                measures: list(measures).iter().map(|m| m.parse()).collect::<Result<_, _>>().map_err(|_| bad(l))?,
                layer: layer.parse()?,
                rules: list(rules).iter().map(|r| r.parse()).collect::<Result<_, _>>().map_err(|_| bad(l))?,
            })
        })
        .collect()
}
