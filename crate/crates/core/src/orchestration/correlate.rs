use std::collections::BTreeSet;

use crate::agent_runtime::{DriftSignal, OperatingMode};
use crate::ids::{AgentId, Minutes};

use super::topology::Topology;

pub const DEFAULT_WINDOW: Minutes = 30;

/// Raised as soon as coupled agents in two or more domains drift inside the
/// same correlation window.
#[derive(Clone, Debug, PartialEq)]
pub struct EmergentImpactFlag {
    pub raised_at: Minutes,
    pub agents: BTreeSet<AgentId>,
    pub domains: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeEvent {
    pub cascade_id: u64,
    pub signals: Vec<DriftSignal>,
    pub agents: BTreeSet<AgentId>,
    pub domains: BTreeSet<String>,
    pub opened_at: Minutes,
    pub window_used: Minutes,
    /// The contributing pattern was already in the risk register.
    pub known_risk: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correlation {
    pub flag: EmergentImpactFlag,
    pub cascade: CascadeEvent,
}

/// Correlates drift signals over tumbling windows anchored at `anchor`.
///
/// Within a window, a pair of signals from distinct domains whose agents are
/// joined by a coupling path raises an emergent-impact flag at the later
/// signal's time. The cascade itself opens when the window closes, or at the
/// flag time if the pair matches a registered coupling risk.
pub fn correlate(
    signals: &[DriftSignal],
    topology: &Topology,
    window: Minutes,
    anchor: Minutes,
) -> Option<Correlation> {
    assert!(window > 0, "correlation window must be positive");
    let mut sorted: Vec<&DriftSignal> = signals.iter().filter(|s| s.timestamp >= anchor).collect();
    sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.agent_id.cmp(&b.agent_id)));

    let mut idx = 0;
    while idx < sorted.len() {
        let bucket = (sorted[idx].timestamp - anchor) / window;
        let end = sorted[idx..]
            .iter()
            .position(|s| (s.timestamp - anchor) / window != bucket)
            .map_or(sorted.len(), |p| idx + p);
        let group = &sorted[idx..end];
        if let Some(c) = correlate_window(group, topology, window, anchor + (bucket + 1) * window) {
            return Some(c);
        }
        idx = end;
    }
    None
}

fn correlate_window(
    group: &[&DriftSignal],
    topology: &Topology,
    window: Minutes,
    close: Minutes,
) -> Option<Correlation> {
    // first qualifying pair by arrival order of the later signal
    let mut first: Option<(usize, usize)> = None;
    'outer: for j in 0..group.len() {
        for i in 0..j {
            let (a, b) = (group[i], group[j]);
            if a.domain != b.domain && topology.connected(&a.agent_id, &b.agent_id) {
                first = Some((i, j));
                break 'outer;
            }
        }
    }
    let (i, j) = first?;
    let raised_at = group[j].timestamp;
    let known_risk = topology.known_risk(&group[i].agent_id, &group[j].agent_id).is_some();

    // every signal in the window that is coupled to a signal of another domain
    let contributing: Vec<DriftSignal> = group
        .iter()
        .filter(|s| group.iter().any(|o| o.domain != s.domain && topology.connected(&s.agent_id, &o.agent_id)))
        .map(|s| (*s).clone())
        .collect();
    let flag_signals: Vec<&DriftSignal> = group[..=j].iter().copied().filter(|s| contributing.contains(s)).collect();
    let flag = EmergentImpactFlag {
        raised_at,
        agents: flag_signals.iter().map(|s| s.agent_id.clone()).collect(),
        domains: flag_signals.iter().map(|s| s.domain.clone()).collect(),
    };
    let cascade = CascadeEvent {
        cascade_id: 0,
        agents: contributing.iter().map(|s| s.agent_id.clone()).collect(),
        domains: contributing.iter().map(|s| s.domain.clone()).collect(),
        signals: contributing,
        opened_at: if known_risk { raised_at } else { close },
        window_used: window,
        known_risk,
    };
    Some(Correlation { flag, cascade })
}

crate::str_enum! {
    pub enum CascadeState { Open, Closed }
}

/// Tracks the single open cascade and decides when it closes.
#[derive(Clone, Debug)]
pub struct CascadeTracker {
    window: Minutes,
    next_id: u64,
    current: Option<(CascadeEvent, CascadeState)>,
    normal_since: Option<Minutes>,
    closed_at: Option<Minutes>,
}

impl CascadeTracker {
    pub fn new(window: Minutes) -> Self {
        Self { window, next_id: 1, current: None, normal_since: None, closed_at: None }
    }

    /// Opens the cascade unless one is already tracked. Returns the assigned
    /// event when a new cascade was opened.
    pub fn open(&mut self, mut cascade: CascadeEvent) -> Option<&CascadeEvent> {
        if self.current.is_some() {
            return None;
        }
        cascade.cascade_id = self.next_id;
        self.next_id += 1;
        self.current = Some((cascade, CascadeState::Open));
        self.current.as_ref().map(|(c, _)| c)
    }

    pub fn cascade(&self) -> Option<&CascadeEvent> {
        self.current.as_ref().map(|(c, _)| c)
    }

    pub fn is_open(&self) -> bool {
        matches!(self.current, Some((_, CascadeState::Open)))
    }

    pub fn closed_at(&self) -> Option<Minutes> {
        self.closed_at
    }

    /// Feeds the current modes of contributing agents. The cascade closes
    /// once all of them have been Normal for a full window.
    pub fn update(&mut self, now: Minutes, mode_of: impl Fn(&AgentId) -> Option<OperatingMode>) -> Option<Minutes> {
        let (cascade, state) = self.current.as_mut()?;
        if *state == CascadeState::Closed {
            return None;
        }
        let all_normal = cascade.agents.iter().all(|a| mode_of(a).is_none_or(|m| m == OperatingMode::Normal));
        if !all_normal {
            self.normal_since = None;
            return None;
        }
        let since = *self.normal_since.get_or_insert(now);
        if now >= since + self.window {
            *state = CascadeState::Closed;
            self.closed_at = Some(since + self.window);
            return self.closed_at;
        }
        None
    }

    /// Time at which the cascade would close if nothing changes.
    pub fn pending_close(&self) -> Option<Minutes> {
        match (&self.current, self.normal_since) {
            (Some((_, CascadeState::Open)), Some(since)) => Some(since + self.window),
            _ => None,
        }
    }
}
