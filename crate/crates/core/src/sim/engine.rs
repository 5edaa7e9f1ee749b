//! Deterministic discrete-event loop over a scenario timeline.
//!
//! Scenario events are processed in file order at their minute. Internal
//! timers (correlation window close, cascade close) fire after the scenario
//! events of the same minute; their activations merge into the last row at
//! that minute, or form a row of their own when no scenario event shares it.

use std::collections::{BTreeMap, BTreeSet};

use crate::agent_runtime::{
    AccessTier, AgentRuntime, AuditTrail, BoundViolated, DriftSignal, EventKind, NewRecord, OperatingMode,
    ProposedAction, Pseudonymizer, ReassessmentOutcome, RetentionPolicy, Severity, TopologyView,
};
use crate::calibration::{layer_activation, Activation, LayerActivationMap};
use crate::catalog::Layer;
use crate::city::{monitor_fairness, render_explanation, CaseStore, ContestationConfig, EnforcementEvent, Zones};
use crate::ids::{measure, AgentId, MeasureId, Minutes, RecordId, RuleId};
use crate::orchestration::{
    attribute, consolidate_assessment, correlate, escalate_joint_oversight, issue_clearance, open_incident,
    resolve_conflict, CascadeEvent, CascadeTracker, ConflictContext, CouplingRisk, DisclosureField, IncidentRecord,
    IncidentStatus, LoggingContext, Topology,
};

use super::scenario::{Input, Scenario, ScenarioEvent};
use super::shipped_catalog;
use super::trace::{ActivationTrace, DecisionAnnotation, GovernanceEvent, HumanReviewTask, RowLayer, RunMode};

const R01: MeasureId = measure(1);
const R02: MeasureId = measure(2);
const R03: MeasureId = measure(3);
const R04: MeasureId = measure(4);
const R06: MeasureId = measure(6);
const R08: MeasureId = measure(8);
const R09: MeasureId = measure(9);
const R10: MeasureId = measure(10);
const R12: MeasureId = measure(12);
const R16: MeasureId = measure(16);
const R24: MeasureId = measure(24);

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub mode: Option<RunMode>,
    /// Coupling risks registered before the run, e.g. from an earlier run's directives.
    pub known_risks: Vec<CouplingRisk>,
}

pub fn run(scenario: &Scenario, mode: RunMode) -> ActivationTrace {
    run_with(scenario, &RunOptions { mode: Some(mode), known_risks: Vec::new() })
}

pub fn run_with(scenario: &Scenario, options: &RunOptions) -> ActivationTrace {
    match options.mode.unwrap_or(RunMode::WithFramework) {
        RunMode::Baseline => run_baseline(scenario),
        RunMode::WithFramework => run_session(scenario, &options.known_risks).trace,
    }
}

/// End state of a governed run, for follow-up queries against its trail.
pub struct Session {
    pub trace: ActivationTrace,
    pub trail: AuditTrail,
    pub topology: Topology,
    pub cases: CaseStore,
    /// Decision id to its enforcement record.
    pub decisions: BTreeMap<String, RecordId>,
}

impl Session {
    pub fn authorities(&self, scenario: &Scenario) -> BTreeMap<AgentId, String> {
        scenario.agents.iter().map(|a| (a.id.clone(), a.authority.clone())).collect()
    }
}

pub fn run_session(scenario: &Scenario, known_risks: &[CouplingRisk]) -> Session {
    let mut engine = Engine::new(scenario, known_risks);
    engine.run();
    engine.finish()
}

/// Same physical timeline with governance disabled: resident-facing
/// decisions still happen, nothing else is recorded.
fn run_baseline(scenario: &Scenario) -> ActivationTrace {
    let mut trace = ActivationTrace::empty(&scenario.name, RunMode::Baseline, scenario.t0);
    for ev in &scenario.events {
        for input in &ev.inputs {
            if let Input::Decision { id, .. } = input {
                trace.decisions.push(DecisionAnnotation {
                    decision: id.clone(),
                    issued_at: ev.time,
                    case: None,
                    case_agents: BTreeSet::new(),
                    attribution_agents: BTreeSet::new(),
                });
            }
        }
    }
    trace
}

struct Row {
    time: Minutes,
    event: String,
    agents: Vec<String>,
    measures: BTreeSet<MeasureId>,
    rules: BTreeSet<RuleId>,
    escalated: bool,
}

impl Row {
    fn new(time: Minutes, event: &str, agents: Vec<String>) -> Self {
        Self {
            time,
            event: event.to_string(),
            agents,
            measures: BTreeSet::new(),
            rules: BTreeSet::new(),
            escalated: false,
        }
    }

    fn activate(&mut self, m: MeasureId) {
        self.measures.insert(m);
    }

    fn is_empty(&self) -> bool {
        self.measures.is_empty() && self.rules.is_empty()
    }

    fn merge(&mut self, other: Row) {
        self.measures.extend(other.measures);
        self.rules.extend(other.rules);
        self.escalated |= other.escalated;
    }

    fn finish(self) -> GovernanceEvent {
        let catalog = shipped_catalog();
        for m in &self.measures {
            assert!(catalog.is_activatable(*m), "{m} is not an activatable measure");
        }
        let layer = if self.escalated {
            RowLayer::AgentToOrchestration
        } else {
            self.measures
                .iter()
                .filter_map(|m| catalog.layer_of(*m))
                .filter(|l| *l != Layer::Unassigned)
                .max()
                .map_or(RowLayer::None, RowLayer::from_layer)
        };
        GovernanceEvent {
            time: self.time,
            event: self.event,
            agents: self.agents,
            measures: self.measures,
            layer,
            rules: self.rules,
        }
    }
}

fn max_activation(maps: impl Iterator<Item = LayerActivationMap>) -> LayerActivationMap {
    maps.fold(
        LayerActivationMap { agent: Activation::Off, orchestration: Activation::Off, city: Activation::Off },
        |acc, m| LayerActivationMap {
            agent: acc.agent.max(m.agent),
            orchestration: acc.orchestration.max(m.orchestration),
            city: acc.city.max(m.city),
        },
    )
}

struct Engine<'a> {
    sc: &'a Scenario,
    runtime: AgentRuntime,
    topology: Topology,
    trail: AuditTrail,
    zones: Option<Zones>,
    signals: Vec<(DriftSignal, RecordId)>,
    flag_agents: BTreeSet<AgentId>,
    pending_open: Option<Minutes>,
    tracker: CascadeTracker,
    incident: Option<IncidentRecord>,
    cases: CaseStore,
    enforcement: Vec<EnforcementEvent>,
    event_records: BTreeMap<String, Vec<RecordId>>,
    decisions: BTreeMap<String, RecordId>,
    first_detection: Option<Minutes>,
    rows: Vec<Row>,
    trace: ActivationTrace,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario, known_risks: &[CouplingRisk]) -> Self {
        let (mut runtime, mut topology) = sc.instantiate().expect("scenario was validated at load");
        runtime.take_declarations();
        for r in known_risks {
            topology.register_risk(r.clone());
        }
        let zones = if sc.zones.is_empty() { None } else { Some(Zones::new(sc.zones.clone()).expect("validated")) };
        Self {
            sc,
            runtime,
            topology,
            trail: AuditTrail::new(RetentionPolicy::default(), Pseudonymizer::new(&sc.config.pseudonym_key)),
            zones,
            signals: Vec::new(),
            flag_agents: BTreeSet::new(),
            pending_open: None,
            tracker: CascadeTracker::new(sc.config.window),
            incident: None,
            cases: CaseStore::new(ContestationConfig::default()),
            enforcement: Vec::new(),
            event_records: BTreeMap::new(),
            decisions: BTreeMap::new(),
            first_detection: None,
            rows: Vec::new(),
            trace: ActivationTrace::empty(&sc.name, RunMode::WithFramework, sc.t0),
        }
    }

    fn activation(&self, agent: &AgentId) -> LayerActivationMap {
        layer_activation(self.runtime.level(agent).expect("registered agent"))
    }

    fn joint<'b>(&self, agents: impl IntoIterator<Item = &'b AgentId>) -> LayerActivationMap {
        max_activation(agents.into_iter().map(|a| self.activation(a)))
    }

    fn cascade_agents(&self) -> BTreeSet<AgentId> {
        let mut all = self.flag_agents.clone();
        if let Some(c) = self.tracker.cascade() {
            all.extend(c.agents.iter().cloned());
        }
        all
    }

    fn authority(&self, agent: &AgentId) -> String {
        self.sc.agent(agent).map(|a| a.authority.clone()).unwrap_or_default()
    }

    fn next_timer(&self) -> Option<Minutes> {
        [self.pending_open, self.tracker.pending_close()].into_iter().flatten().min()
    }

    fn run(&mut self) {
        let events = &self.sc.events;
        let mut idx = 0;
        loop {
            let t = match (events.get(idx).map(|e| e.time), self.next_timer()) {
                (None, None) => break,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (Some(a), Some(b)) => a.min(b),
            };
            let rows_before = self.rows.len();
            while idx < events.len() && events[idx].time == t {
                let row = self.process_event(&events[idx]);
                self.rows.push(row);
                idx += 1;
            }
            let mut timer_row = Row::new(t, "", Vec::new());
            self.fire_timers(t, &mut timer_row);
            if !timer_row.is_empty() {
                if self.rows.len() > rows_before {
                    self.rows.last_mut().expect("row at t").merge(timer_row);
                } else {
                    self.rows.push(timer_row);
                }
            }
            self.update_tracker(t);
        }
    }

    fn update_tracker(&mut self, t: Minutes) {
        let runtime = &self.runtime;
        if self.tracker.update(t, |a| runtime.mode(a).ok()).is_some() {
            if let Some(inc) = self.incident.as_mut() {
                inc.status = IncidentStatus::Closing;
            }
        }
    }

    fn fire_timers(&mut self, t: Minutes, row: &mut Row) {
        if self.pending_open.is_some_and(|p| p <= t) {
            self.pending_open = None;
            let signals: Vec<DriftSignal> = self.signals.iter().map(|(s, _)| s.clone()).collect();
            if let Some(c) = correlate(&signals, &self.topology, self.sc.config.window, self.sc.t0) {
                row.event = "cascade_window_close".into();
                row.agents = self.ordered_agents(&c.cascade.agents);
                self.open_cascade(c.cascade, t, row);
            }
        }
        if self.tracker.pending_close().is_some_and(|p| p <= t) {
            self.update_tracker(t);
        }
    }

    fn ordered_agents(&self, set: &BTreeSet<AgentId>) -> Vec<String> {
        self.sc.agents.iter().filter(|a| set.contains(&a.id)).map(|a| a.id.to_string()).collect()
    }

    fn process_event(&mut self, ev: &ScenarioEvent) -> Row {
        let mut row = Row::new(ev.time, &ev.label, ev.actors.clone());
        for input in &ev.inputs {
            self.process_input(ev, input, &mut row);
        }
        row
    }

    fn record(&mut self, ev: &ScenarioEvent, new: NewRecord) -> RecordId {
        let id = self.trail.append(new).expect("engine only cites earlier records");
        self.event_records.entry(ev.id.clone()).or_default().push(id);
        id
    }

    fn apply_declarations(&mut self, agent: &AgentId, row: &mut Row) {
        for d in self.runtime.take_declarations() {
            let degraded = d.operating_mode != OperatingMode::Normal;
            self.topology.apply_declaration(d).expect("declarations keep resources intact");
            // alert routed to coupled dependents through the topology
            if degraded
                && self.activation(agent).orchestration >= Activation::Basic
                && !self.topology.dependents_of(agent).is_empty()
            {
                row.activate(R01);
            }
        }
    }

    fn process_input(&mut self, ev: &ScenarioEvent, input: &Input, row: &mut Row) {
        let now = ev.time;
        match input {
            Input::Trigger { .. } => {}
            Input::Action { agent, id, resources, setpoints, request_clearance, human_override } => {
                let act = self.activation(agent);
                let action = ProposedAction {
                    id: id.clone(),
                    resources: resources.clone(),
                    setpoints: setpoints.clone(),
                    cause_links: BTreeSet::new(),
                };
                let token = if *request_clearance {
                    if act.orchestration >= Activation::Basic
                        && resources.iter().any(|r| self.topology.is_safety_coupled(r))
                    {
                        row.activate(R01);
                    }
                    issue_clearance(&self.topology, agent, &action, act.orchestration, *human_override).ok()
                } else {
                    None
                };
                let out = self
                    .runtime
                    .enforce_policy(agent, &action, &self.topology, token.as_ref(), &mut self.trail, now)
                    .expect("registered agent with declared metrics");
                self.event_records.entry(ev.id.clone()).or_default().push(out.record);
                if out.engaged() {
                    row.activate(R09);
                }
                if out.escalated && act.orchestration >= Activation::Basic {
                    row.activate(R01);
                    row.escalated = true;
                }
            }
            Input::Telemetry { agent, samples } => {
                let signals = self.runtime.observe_all(agent, samples, now).expect("validated metrics");
                for s in signals {
                    row.activate(R10);
                    self.first_detection.get_or_insert(now);
                    let rec = self.record(
                        ev,
                        NewRecord::new(agent.clone(), now, EventKind::Drift)
                            .field("metric", &s.metric)
                            .field("observed", s.observed)
                            .field("severity", s.severity),
                    );
                    if self.activation(agent).orchestration >= Activation::Basic {
                        self.push_signal(s, rec, row);
                    }
                }
                self.apply_declarations(agent, row);
            }
            Input::SharedSignal { agent, metric, observed, min, max } => {
                if self.activation(agent).orchestration < Activation::Basic {
                    return;
                }
                let bound = if observed < min {
                    BoundViolated::Below(*min)
                } else if observed > max {
                    BoundViolated::Above(*max)
                } else {
                    return;
                };
                let rec = self.record(
                    ev,
                    NewRecord::new(agent.clone(), now, EventKind::Telemetry)
                        .field("source", "shared-resource-monitoring")
                        .field("metric", metric)
                        .field("observed", observed),
                );
                let domain = self.sc.agent(agent).map(|a| a.domain.clone()).unwrap_or_default();
                let s = DriftSignal {
                    agent_id: agent.clone(),
                    metric: metric.clone(),
                    observed: *observed,
                    bound,
                    domain,
                    timestamp: now,
                    severity: Severity::Warning,
                };
                self.push_signal(s, rec, row);
            }
            Input::Enforcement { agent, zone_counts } => {
                let total: u64 = zone_counts.values().sum();
                self.record(
                    ev,
                    NewRecord::new(agent.clone(), now, EventKind::Detection)
                        .field("detections", total)
                        .field("subject", format!("plates:{total}"))
                        .identifying(true),
                );
                for (zone, n) in zone_counts {
                    self.enforcement.extend((0..*n).map(|_| EnforcementEvent { zone_id: zone.clone(), time: now }));
                }
                let mut involved = self.cascade_agents();
                let cascade_active = !involved.is_empty();
                involved.insert(agent.clone());
                let city = if cascade_active { self.joint(&involved).city } else { self.activation(agent).city };
                let Some(zones) = self.zones.as_ref().filter(|_| city >= Activation::Basic) else { return };
                let flags = monitor_fairness(
                    &self.enforcement,
                    zones,
                    cascade_active,
                    self.sc.config.fairness_threshold,
                    now,
                    self.sc.config.window,
                )
                .expect("validated zones and threshold");
                if !flags.is_empty() {
                    row.activate(R08);
                }
                for f in flags.iter().filter(|f| f.human_review) {
                    self.trace.human_reviews.push(HumanReviewTask {
                        agent: agent.clone(),
                        requested_at: now,
                        scheduled_at: now,
                        reason: format!(
                            "enforcement concentration in {} at {:.2}x baseline during an active cascade",
                            f.zone_id, f.concentration_ratio
                        ),
                    });
                }
            }
            Input::JointOversight => {
                if !self.tracker.is_open() {
                    return;
                }
                let cascade = self.tracker.cascade().expect("open").clone();
                if self.joint(&cascade.agents).orchestration >= Activation::Basic {
                    let authorities = cascade.agents.iter().map(|a| self.authority(a)).collect();
                    if escalate_joint_oversight(&cascade, &authorities, &self.trail, now).is_ok() {
                        row.activate(R06);
                    }
                }
            }
            Input::Resolve { rules } => {
                let scope: BTreeSet<AgentId> = match self.tracker.cascade() {
                    Some(c) => c.agents.clone(),
                    None => self.sc.agents.iter().map(|a| a.id.clone()).collect(),
                };
                if self.joint(&scope).orchestration < Activation::Basic {
                    return;
                }
                row.activate(R02);
                for rule_id in rules {
                    let rule = shipped_catalog().rule(*rule_id).expect("five shipped rules").clone();
                    let ctx = self.conflict_context(now);
                    let out =
                        resolve_conflict(&rule, &ctx, &mut self.trail, now).expect("context built for every rule");
                    row.rules.insert(*rule_id);
                    row.measures.extend(out.executed);
                }
            }
            Input::Mode { agent, mode } => {
                self.runtime.set_mode(agent, *mode, now).expect("registered agent");
                self.apply_declarations(agent, row);
            }
            Input::Decision { id, agent, violation, zone, subject, caused_by } => {
                let causes: Vec<RecordId> =
                    caused_by.iter().flat_map(|e| self.event_records.get(e).cloned().unwrap_or_default()).collect();
                let rec = self.record(
                    ev,
                    NewRecord::new(agent.clone(), now, EventKind::Enforcement)
                        .field("decision", id)
                        .field("violation", violation)
                        .field("zone", zone)
                        .field("subject", subject)
                        .identifying(true)
                        .tier(AccessTier::Oversight)
                        .causes(causes),
                );
                self.decisions.insert(id.clone(), rec);
                self.trace.decisions.push(DecisionAnnotation {
                    decision: id.clone(),
                    issued_at: now,
                    case: None,
                    case_agents: BTreeSet::new(),
                    attribution_agents: BTreeSet::new(),
                });
            }
            Input::Contest { decision, .. } => {
                let rec = self.decisions[decision];
                let version = self.topology.version();
                let attribution = attribute(&self.trail, rec, version).expect("decision record exists");
                let chain_agents = attribution.agents();
                let joint = self.joint(chain_agents.iter().filter(|a| self.runtime.is_registered(a)));
                if joint.city < Activation::Basic {
                    return;
                }
                let authority_of: BTreeMap<AgentId, String> =
                    self.sc.agents.iter().map(|a| (a.id.clone(), a.authority.clone())).collect();
                let case =
                    self.cases.open_contestation(rec, &self.trail, version, &authority_of).expect("decision exists");
                row.activate(R04);
                row.activate(R24);
                let texts: BTreeMap<String, String> = self
                    .sc
                    .config
                    .languages
                    .iter()
                    .map(|l| (l.clone(), render_explanation(case, l).expect("validated language")))
                    .collect();
                case.explanations = texts;
                row.activate(R16);
                let (case_id, case_agents) = (case.case_id, case.agents());
                if let Some(d) = self.trace.decisions.iter_mut().find(|d| &d.decision == decision) {
                    d.case = Some(case_id);
                    d.case_agents = case_agents;
                    d.attribution_agents = chain_agents;
                }
            }
            Input::Reassess { agent, change, alters_conformity } => {
                let version = Some(self.topology.version());
                let task = self.runtime.reassessment_trigger(agent, *change, now, version).expect("registered agent");
                let done = self
                    .runtime
                    .complete_reassessment(task.id, ReassessmentOutcome { alters_conformity: *alters_conformity })
                    .expect("task just created");
                row.measures.extend(done.activated_measures());
            }
            Input::HumanReview { agent, within } => {
                self.trace.human_reviews.push(HumanReviewTask {
                    agent: agent.clone(),
                    requested_at: now,
                    scheduled_at: self.sc.t0 + within,
                    reason: "operator review of the agent recommendation".into(),
                });
            }
            Input::PostEventReview => self.post_event_review(now, row),
        }
    }

    fn conflict_context(&self, now: Minutes) -> ConflictContext {
        let regimes = self.sc.regime_windows();
        ConflictContext {
            logging: Some(LoggingContext {
                event_kind: EventKind::Detection,
                subject_identifying: true,
                requested_tier: AccessTier::Oversight,
            }),
            retention_now: Some(now),
            assessments: Some(regimes.keys().cloned().collect()),
            regimes: Some(regimes),
            incident_open: self.incident.is_some(),
            disclosure: Some(vec![
                DisclosureField { name: "purpose".into(), confidential: false },
                DisclosureField { name: "governance_level".into(), confidential: false },
                DisclosureField { name: "vendor_internals".into(), confidential: true },
                DisclosureField { name: "envelope_bounds".into(), confidential: true },
            ]),
        }
    }

    fn push_signal(&mut self, signal: DriftSignal, record: RecordId, row: &mut Row) {
        let now = signal.timestamp;
        self.signals.push((signal.clone(), record));
        if self.tracker.cascade().is_some() {
            return;
        }
        let signals: Vec<DriftSignal> = self.signals.iter().map(|(s, _)| s.clone()).collect();
        let Some(c) = correlate(&signals, &self.topology, self.sc.config.window, self.sc.t0) else { return };
        if c.cascade.signals.contains(&signal) && c.flag.raised_at <= now {
            row.activate(R03);
            self.flag_agents = c.cascade.agents.clone();
        }
        if c.cascade.opened_at <= now {
            self.pending_open = None;
            self.open_cascade(c.cascade, now, row);
        } else {
            self.pending_open = Some(c.cascade.opened_at);
        }
    }

    fn open_cascade(&mut self, cascade: CascadeEvent, now: Minutes, row: &mut Row) {
        // a signal recorded in the same minute cannot be cited as a cause
        let causes: Vec<RecordId> = self
            .signals
            .iter()
            .filter(|(s, _)| cascade.signals.contains(s))
            .map(|(_, r)| *r)
            .filter(|r| self.trail.get(*r).is_some_and(|rec| rec.timestamp < now))
            .collect();
        let Some(opened) = self.tracker.open(cascade) else { return };
        let cascade = opened.clone();
        row.activate(R03);
        self.trace.detection_at = Some(now);
        let joint = self.joint(&cascade.agents);
        if joint.orchestration < Activation::Basic {
            return;
        }
        let authorities: BTreeSet<String> = cascade.agents.iter().map(|a| self.authority(a)).collect();
        if escalate_joint_oversight(&cascade, &authorities, &self.trail, now).is_ok() {
            row.activate(R06);
        }
        let regimes = self.sc.regime_windows();
        if !regimes.is_empty() {
            let id = self.trace.incidents.len() as u64 + 1;
            let inc = open_incident(id, &cascade, &regimes, now, &mut self.trail, causes).expect("non-empty regimes");
            let t4 = shipped_catalog().rule(RuleId::T4).expect("T4 shipped");
            row.measures.extend(t4.implementing_measures.iter().copied());
            row.rules.insert(RuleId::T4);
            self.incident = Some(inc);
        }
    }

    fn post_event_review(&mut self, now: Minutes, row: &mut Row) {
        let (Some(inc), Some(cascade)) = (self.incident.clone(), self.tracker.cascade().cloned()) else { return };
        if self.joint(&cascade.agents).orchestration < Activation::Basic {
            return;
        }
        let Ok((assessment, directive)) =
            consolidate_assessment(&inc, &cascade, &self.trail, &self.topology, &self.sc.trigger_factors, false)
        else {
            return;
        };
        let t3 = shipped_catalog().rule(RuleId::T3).expect("T3 shipped").clone();
        let ctx = ConflictContext {
            assessments: Some(assessment.sections.iter().map(|s| s.regime.clone()).collect()),
            ..Default::default()
        };
        let out = resolve_conflict(&t3, &ctx, &mut self.trail, now).expect("assessments supplied");
        row.rules.insert(RuleId::T3);
        row.measures.extend(out.executed);
        row.activate(R12);
        row.activate(R24);
        directive.apply(&mut self.topology);
        row.activate(R01);
        self.trace.directives.push(directive);
        if let Some(i) = self.incident.as_mut() {
            i.status = IncidentStatus::Closed;
        }
    }

    fn finish(mut self) -> Session {
        if self.trace.detection_at.is_none() {
            self.trace.detection_at = self.first_detection;
        }
        self.trace.rows = self.rows.into_iter().map(Row::finish).collect();
        self.trace.incidents = self.incident.into_iter().collect();
        Session {
            trace: self.trace,
            trail: self.trail,
            topology: self.topology,
            cases: self.cases,
            decisions: self.decisions,
        }
    }
}
