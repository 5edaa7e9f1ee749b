//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use govcore::agent_runtime::{AuditTrail, EventKind, NewRecord, Pseudonymizer, RetentionPolicy};
use govcore::calibration::{
    assign_governance_level, classify_autonomy, layer_activation, Activation, AutonomyEvidence, AutonomyLevel,
    DecisionScope, DomainCriticality, GovernanceLevel, HumanInvolvement, SystemProfile,
};
use govcore::catalog::{trace_backward, trace_forward, validate_catalog, Catalog, Layer, MeasureKind};
use govcore::city::{
    monitor_fairness, publish_disclosure, DisclosureTier, EnforcementEvent, GovernanceBasis, Registry, Zone, Zones,
};
use govcore::ids::measure;
use govcore::orchestration::baseline_deadline;
use govcore::sim::{emit_trace, emit_tsv, load_scenario, run, summarize, RowLayer, RunMode, TraceFormat};
use govcore::{AgentId, MeasureId, Minutes, RuleId};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

const CORRIDOR_GOLDEN: &str = include_str!("golden/corridor_cascade.trace.tsv");
const DNSC_GOLDEN: &str = include_str!("golden/dnsc_anomaly.trace.tsv");

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn ids(ns: &[u8]) -> BTreeSet<MeasureId> {
    ns.iter().map(|n| measure(*n)).collect()
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("corridor cascade golden trace", corridor_golden),
        ("corridor cascade summary metrics", corridor_summary),
        ("baseline mode records nothing", baseline),
        ("single-authority anomaly stays at the agent layer", dnsc),
        ("layer activation per governance level", layer_table),
        ("two-part G3/G4 test", two_part_test),
        ("strictest-clock baseline", strictest_clock),
        ("attribution equals ancestor reachability", attribution_oracle),
        ("catalog integrity and registry counts", catalog_integrity),
        ("retention, disclosure tiering and fairness flags", retention_tiering_fairness),
        ("deterministic traces", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match result {
            Ok(()) => println!("PASS {:>2}. {name} ({} ms)", i + 1, started.elapsed().as_millis()),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn corridor_golden() -> Outcome {
    let started = Instant::now();
    let sc = load_scenario("corridor_cascade").map_err(|e| e.to_string())?;
    let trace = run(&sc, RunMode::WithFramework);
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "run took {elapsed:?}");
    ensure!(emit_tsv(&trace.rows) == CORRIDOR_GOLDEN, "trace differs from golden file");

    // Per-row measures, layer and rules as listed in the published trace.
    // Row 30 additionally carries R-05, executed by T4.
    let listed: [(Minutes, &[u8], RowLayer, &[RuleId]); 9] = [
        (0, &[], RowLayer::None, &[]),
        (5, &[1, 9], RowLayer::AgentToOrchestration, &[]),
        (10, &[1, 10], RowLayer::Orchestration, &[]),
        (15, &[3], RowLayer::Orchestration, &[]),
        (25, &[8, 3], RowLayer::City, &[]),
        (30, &[3, 6], RowLayer::Orchestration, &[RuleId::T4]),
        (45, &[2, 6], RowLayer::Orchestration, &[RuleId::T1, RuleId::T4]),
        (60, &[4, 16, 24], RowLayer::City, &[]),
        (120, &[12, 1, 24], RowLayer::Orchestration, &[RuleId::T3]),
    ];
    ensure!(trace.rows.len() == listed.len(), "{} rows, expected {}", trace.rows.len(), listed.len());
    let mut explicit = BTreeSet::new();
    for (row, (time, ms, layer, rules)) in trace.rows.iter().zip(listed) {
        let mut expected = ids(ms);
        explicit.extend(expected.iter().copied());
        if time == 30 {
            expected.insert(measure(5));
        }
        ensure!(row.time == time, "row at {} where {time} expected", row.time);
        ensure!(row.measures == expected, "t={time}: measures {:?}, expected {:?}", row.measures, expected);
        ensure!(row.layer == layer, "t={time}: layer {}, expected {layer}", row.layer);
        let rules: BTreeSet<RuleId> = rules.iter().copied().collect();
        ensure!(row.rules == rules, "t={time}: rules {:?}, expected {:?}", row.rules, rules);
    }
    ensure!(explicit.len() == 11, "{} explicitly listed ids", explicit.len());
    Ok(())
}

fn corridor_summary() -> Outcome {
    let sc = load_scenario("corridor_cascade").map_err(|e| e.to_string())?;
    let s = summarize(&run(&sc, RunMode::WithFramework));
    ensure!(s.measures.len() == 12, "{} measures activated", s.measures.len());
    ensure!(s.measures.contains(&measure(5)), "R-05 missing");
    ensure!(s.rules == BTreeSet::from([RuleId::T1, RuleId::T3, RuleId::T4]), "rules {:?}", s.rules);
    ensure!(s.coordination_points == ids(&[6, 24, 12]), "coordination points {:?}", s.coordination_points);
    ensure!(s.layers == BTreeSet::from([Layer::Agent, Layer::Orchestration, Layer::City]), "layers {:?}", s.layers);
    ensure!(s.chain_complete, "accountability chain incomplete");
    ensure!(s.systemic_learning, "no topology directive");
    ensure!(s.detection_time == Some(30), "detection at {:?}", s.detection_time);
    Ok(())
}

fn baseline() -> Outcome {
    let sc = load_scenario("corridor_cascade").map_err(|e| e.to_string())?;
    let trace = run(&sc, RunMode::Baseline);
    let s = summarize(&trace);
    ensure!(trace.rows.is_empty(), "{} governance events", trace.rows.len());
    ensure!(s.measures.is_empty(), "{} activations", s.measures.len());
    ensure!(s.rules.is_empty(), "{} rules", s.rules.len());
    ensure!(s.coordination_points.is_empty(), "{} coordination points", s.coordination_points.len());
    ensure!(!s.chain_complete, "chain reported complete without governance");
    Ok(())
}

fn dnsc() -> Outcome {
    let sc = load_scenario("dnsc_anomaly").map_err(|e| e.to_string())?;
    let trace = run(&sc, RunMode::WithFramework);
    let s = summarize(&trace);
    ensure!(s.measures == ids(&[9, 10, 20]), "measures {:?}", s.measures);
    ensure!(s.layers == BTreeSet::from([Layer::Agent]), "layers {:?}", s.layers);
    ensure!(trace.rows.iter().all(|r| matches!(r.layer, RowLayer::Agent | RowLayer::None)), "non-agent row layer");
    ensure!(s.rules.is_empty(), "rules {:?}", s.rules);
    ensure!(s.coordination_points.is_empty(), "coordination points {:?}", s.coordination_points);
    ensure!(s.detection_time == Some(5), "detection at {:?}", s.detection_time);
    let reviews: Vec<Minutes> = trace.human_reviews.iter().map(|h| h.scheduled_at - trace.t0).collect();
    ensure!(reviews == [15], "human review offsets {reviews:?}");
    ensure!(emit_tsv(&trace.rows) == DNSC_GOLDEN, "trace differs from golden file");
    Ok(())
}

fn layer_table() -> Outcome {
    use Activation::*;
    let table = [
        (GovernanceLevel::G1, [Full, Off, Off]),
        (GovernanceLevel::G2, [Full, Off, Off]),
        (GovernanceLevel::G3, [Full, Basic, Off]),
        (GovernanceLevel::G4, [Full, Full, Basic]),
        (GovernanceLevel::G5, [Full, Full, Full]),
    ];
    let mut cells = 0;
    for (level, [a, o, c]) in table {
        let m = layer_activation(level);
        for (got, want, layer) in [(m.agent, a, "A"), (m.orchestration, o, "O"), (m.city, c, "C")] {
            ensure!(got == want, "{level} {layer}: {got}, expected {want}");
            cells += 1;
        }
    }
    ensure!(cells == 15, "{cells} cells checked");
    Ok(())
}

fn all_evidence() -> Vec<AutonomyEvidence> {
    let mut out = Vec::new();
    for s in DecisionScope::VARIANTS {
        for h in HumanInvolvement::VARIANTS {
            for c in DomainCriticality::VARIANTS {
                out.push(AutonomyEvidence {
                    decision_scope: s.parse().unwrap(),
                    human_involvement: h.parse().unwrap(),
                    domain_criticality: c.parse().unwrap(),
                });
            }
        }
    }
    out
}

fn profile(evidence: AutonomyEvidence, endangers: bool, crossorg: bool, ecosystem: bool) -> SystemProfile {
    SystemProfile {
        id: AgentId::from("p"),
        authority: "A".into(),
        domain: "d".into(),
        evidence,
        endangers_essential_services: endangers,
        cross_org_dependencies: crossorg,
        multi_agent_ecosystem: ecosystem,
    }
}

/// Autonomous control: L4, or L3 in real-time control.
fn qualifies(e: &AutonomyEvidence) -> bool {
    match classify_autonomy(e).level {
        AutonomyLevel::L4 => true,
        AutonomyLevel::L3 => e.decision_scope == DecisionScope::RealTimeControl,
        AutonomyLevel::L2 => false,
    }
}

fn two_part_test() -> Outcome {
    let mut cells = 0;
    let mut g4_cells = 0;
    for e in all_evidence() {
        for endangers in [false, true] {
            for crossorg in [false, true] {
                let level = assign_governance_level(&profile(e, endangers, crossorg, false));
                let expect_g4 = endangers && crossorg && qualifies(&e);
                ensure!(
                    (level == GovernanceLevel::G4) == expect_g4,
                    "{e:?} endangers={endangers} crossorg={crossorg}: {level}"
                );
                if expect_g4 {
                    g4_cells += 1;
                    ensure!(layer_activation(level).orchestration == Activation::Full, "G4 without full orchestration");
                }
                cells += 1;
            }
        }
    }
    ensure!(cells == 48 * 4 && g4_cells > 0, "{cells} cells, {g4_cells} at G4");

    let registry = Registry::shipped();
    for (id, want) in [
        ("falcon-eye", GovernanceLevel::G1),
        ("rammas", GovernanceLevel::G2),
        ("oyoon", GovernanceLevel::G3),
        ("gtic", GovernanceLevel::G4),
    ] {
        let got = registry.get(&AgentId::from(id)).ok_or(format!("{id} missing"))?.level();
        ensure!(got == want, "{id}: {got}, expected {want}");
    }

    let evidence = all_evidence();
    let strategy = (0..evidence.len(), any::<bool>(), any::<bool>());
    runner(256)
        .run(&strategy, |(i, endangers, crossorg)| {
            let e = evidence[i];
            let level = assign_governance_level(&profile(e, endangers, crossorg, false));
            prop_assert_eq!(level == GovernanceLevel::G4, endangers && crossorg && qualifies(&e));
            prop_assert!(level != GovernanceLevel::G5);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn strictest_clock() -> Outcome {
    let nis2_gdpr = BTreeMap::from([("NIS2".to_string(), 1440), ("GDPR".to_string(), 4320)]);
    ensure!(baseline_deadline(&nis2_gdpr) == Some(1440), "NIS2 + GDPR baseline {:?}", baseline_deadline(&nis2_gdpr));

    let strategy = (prop::collection::btree_map("[A-Z]{2,6}", 1u64..=100_000, 1..8), "[a-z]{2,6}", 1u64..=100_000);
    runner(1000)
        .run(&strategy, |(regimes, extra, window)| {
            let mut sorted: Vec<Minutes> = regimes.values().copied().collect();
            sorted.sort_unstable();
            let base = baseline_deadline(&regimes);
            prop_assert_eq!(base, Some(sorted[0]));
            let mut more = regimes.clone();
            more.insert(extra, window);
            prop_assert!(baseline_deadline(&more).unwrap() <= base.unwrap());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn attribution_oracle() -> Outcome {
    runner(500)
        .run(&common::dag(50, 6), |dag| {
            let (trail, ids) = common::build_trail(&dag);
            let report = govcore::orchestration::attribute(&trail, ids[dag.outcome], 1).unwrap();
            let oracle = common::reachable(&dag);
            let records: BTreeSet<_> = report.contributors.values().flatten().copied().collect();
            let expected: BTreeSet<_> = oracle.iter().map(|i| ids[*i]).collect();
            prop_assert_eq!(records, expected);
            let agents: BTreeSet<AgentId> = oracle.iter().map(|i| common::agent_name(dag.owners[*i])).collect();
            prop_assert_eq!(report.agents(), agents);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn catalog_integrity() -> Outcome {
    let catalog = Catalog::shipped();
    let report = validate_catalog(&catalog);
    ensure!(report.is_clean(), "{} findings, first: {}", report.findings.len(), report.findings[0]);
    for m in &catalog.measures {
        for o in trace_backward(&catalog, m.id).map_err(|e| e.to_string())? {
            ensure!(trace_forward(&catalog, &o).contains(&m.id), "{} cites {o} but forward lookup misses it", m.id);
            for other in trace_forward(&catalog, &o) {
                let back = trace_backward(&catalog, other).map_err(|e| e.to_string())?;
                ensure!(
                    back.iter().any(|b| b.framework == o.framework && b.locator == o.locator),
                    "{other} returned for {o} but does not cite it"
                );
            }
        }
    }
    ensure!(catalog.measures.len() == 25, "{} measures", catalog.measures.len());
    ensure!(catalog.count_kind(MeasureKind::Novel) == 5, "{} novel", catalog.count_kind(MeasureKind::Novel));
    ensure!(catalog.count_kind(MeasureKind::Stub) == 7, "{} stubs", catalog.count_kind(MeasureKind::Stub));
    let registry = Registry::shipped();
    ensure!(registry.len() == 10, "{} registry entries", registry.len());
    let voluntary = registry.by_basis(GovernanceBasis::Voluntary).len();
    let binding = registry.by_basis(GovernanceBasis::Binding).len();
    ensure!(voluntary == 9 && binding == 1, "{voluntary} voluntary, {binding} binding");
    Ok(())
}

fn retention_tiering_fairness() -> Outcome {
    // Retention: nothing past its window keeps a payload; nothing within it loses one.
    let policy = RetentionPolicy::default();
    let kinds = EventKind::VARIANTS;
    let record = (0..kinds.len(), 0u64..200_000, any::<bool>());
    let strategy = (prop::collection::vec(record, 1..40), 0u64..400_000);
    runner(256)
        .run(&strategy, |(records, now)| {
            let mut sorted = records.clone();
            sorted.sort_by_key(|r| r.1);
            let mut trail = AuditTrail::new(policy.clone(), Pseudonymizer::new("k"));
            for (k, ts, identifying) in &sorted {
                let kind: EventKind = kinds[*k].parse().unwrap();
                trail
                    .append(
                        NewRecord::new("a".into(), *ts, kind)
                            .field("subject", "plate-1")
                            .field("note", "n")
                            .identifying(*identifying),
                    )
                    .unwrap();
            }
            trail.apply_retention(now);
            for r in trail.records() {
                let expired = r.timestamp + policy.window(r.event_kind.retention_class()).max(1) < now;
                prop_assert_eq!(r.payload.is_empty(), expired, "{:?}", r);
                if r.pseudonymized && !expired {
                    prop_assert_ne!(r.payload.get("subject").map(String::as_str), Some("plate-1"));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let registry = Registry::shipped();
    for e in registry.entries() {
        let public = publish_disclosure(&registry, &e.profile.id, DisclosureTier::Public).map_err(|e| e.to_string())?;
        let full =
            publish_disclosure(&registry, &e.profile.id, DisclosureTier::Regulator).map_err(|e| e.to_string())?;
        let (p, f): (BTreeSet<_>, BTreeSet<_>) = (public.fields.keys().collect(), full.fields.keys().collect());
        ensure!(p.is_subset(&f) && p != f, "{}: public fields not a strict subset", e.profile.id);
        for k in e.confidential.keys() {
            ensure!(!p.contains(k), "{}: confidential `{k}` published", e.profile.id);
        }
    }

    // 100 events, zone baseline 0.2 receives 50: ratio 2.5 flags at 2.0.
    let zones = Zones::new(vec![
        Zone { zone_id: "a".into(), baseline_share: 0.2, vulnerable: true },
        Zone { zone_id: "b".into(), baseline_share: 0.8, vulnerable: false },
    ])
    .map_err(|e| e.to_string())?;
    let events: Vec<EnforcementEvent> =
        (0..100).map(|i| EnforcementEvent { zone_id: if i < 50 { "a" } else { "b" }.into(), time: 0 }).collect();
    let flags = monitor_fairness(&events, &zones, true, 2.0, 0, 30).map_err(|e| e.to_string())?;
    ensure!(flags.len() == 1 && flags[0].zone_id == "a", "flags {flags:?}");
    ensure!((flags[0].concentration_ratio - 2.5).abs() < 1e-9 && flags[0].human_review, "flag {:?}", flags[0]);

    let strategy = (2usize..6).prop_flat_map(|n| (common::shares(n), prop::collection::vec(0u64..60, n), 11u64..40));
    runner(500)
        .run(&strategy, |(pcts, counts, tenths)| {
            let zones = Zones::new(
                pcts.iter()
                    .enumerate()
                    .map(|(i, p)| Zone {
                        zone_id: format!("z{i}"),
                        baseline_share: *p as f64 / 100.0,
                        vulnerable: false,
                    })
                    .collect(),
            )
            .unwrap();
            let events: Vec<EnforcementEvent> = counts
                .iter()
                .enumerate()
                .flat_map(|(i, n)| (0..*n).map(move |_| EnforcementEvent { zone_id: format!("z{i}"), time: 0 }))
                .collect();
            let flags = monitor_fairness(&events, &zones, false, tenths as f64 / 10.0, 0, 30).unwrap();
            let got: BTreeSet<usize> = flags.iter().map(|f| f.zone_id[1..].parse().unwrap()).collect();
            prop_assert_eq!(got, common::fairness_oracle(&counts, &pcts, tenths));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("govcore-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for name in ["corridor_cascade", "dnsc_anomaly"] {
        let sc = load_scenario(name).map_err(|e| e.to_string())?;
        for mode in [RunMode::WithFramework, RunMode::Baseline] {
            for format in [TraceFormat::Tsv, TraceFormat::Text] {
                let mut bytes = Vec::new();
                for attempt in 0..2 {
                    let path = dir.join(format!("{name}-{mode}-{format}-{attempt}"));
                    std::fs::write(&path, emit_trace(&run(&sc, mode), format)).map_err(|e| e.to_string())?;
                    bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
                }
                ensure!(bytes[0] == bytes[1], "{name} {mode} {format}: runs differ");
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
