//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use govcore::agent_runtime::{AuditTrail, EventKind, NewRecord, Pseudonymizer, RetentionPolicy};
use govcore::{AgentId, RecordId};
use proptest::prelude::*;
use proptest::sample::Index;

/// A random causal DAG: node `i` may only cite nodes `< i`.
#[derive(Clone, Debug)]
pub struct Dag {
    pub parents: Vec<BTreeSet<usize>>,
    pub owners: Vec<u8>,
    pub outcome: usize,
}

pub fn dag(max_nodes: usize, agents: u8) -> impl Strategy<Value = Dag> {
    (1..=max_nodes).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(any::<Index>(), 0..4), n),
            prop::collection::vec(0..agents, n),
            0..n,
        )
            .prop_map(|(picks, owners, outcome)| {
                let parents = picks
                    .iter()
                    .enumerate()
                    .map(|(i, p)| if i == 0 { BTreeSet::new() } else { p.iter().map(|ix| ix.index(i)).collect() })
                    .collect();
                Dag { parents, owners, outcome }
            })
    })
}

pub fn agent_name(owner: u8) -> AgentId {
    AgentId::from(format!("agent-{owner}").as_str())
}

/// Appends one record per node; node `i` is stamped at minute `i + 1`.
pub fn build_trail(dag: &Dag) -> (AuditTrail, Vec<RecordId>) {
    let mut trail = AuditTrail::new(RetentionPolicy::default(), Pseudonymizer::new("oracle"));
    let mut ids = Vec::with_capacity(dag.parents.len());
    for (i, parents) in dag.parents.iter().enumerate() {
        let causes: Vec<RecordId> = parents.iter().map(|p| ids[*p]).collect();
        let id = trail
            .append(NewRecord::new(agent_name(dag.owners[i]), i as u64 + 1, EventKind::Action).causes(causes))
            .expect("parents are strictly earlier");
        ids.push(id);
    }
    (trail, ids)
}

/// Brute-force ancestor reachability by fixed-point iteration over the
/// node list, with no stack or queue.
pub fn reachable(dag: &Dag) -> BTreeSet<usize> {
    let n = dag.parents.len();
    let mut reach = vec![false; n];
    reach[dag.outcome] = true;
    loop {
        let mut changed = false;
        for i in 0..n {
            if reach[i] {
                for &p in &dag.parents[i] {
                    if !reach[p] {
                        reach[p] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|i| reach[*i]).collect()
}

/// Flag oracle in exact integer arithmetic. Shares are whole percents and
/// the threshold is `tenths / 10`: a zone with `n` of `total` events flags
/// iff `(n / total) / (pct / 100) >= tenths / 10`.
pub fn fairness_oracle(counts: &[u64], pcts: &[u64], tenths: u64) -> BTreeSet<usize> {
    let total: u64 = counts.iter().sum();
    (0..counts.len()).filter(|&z| counts[z] > 0 && total > 0 && 1000 * counts[z] >= tenths * pcts[z] * total).collect()
}

/// Whole-percent shares summing to 100, each at least 5.
pub fn shares(zones: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..20, zones).prop_map(|w| {
        let sum: u64 = w.iter().sum();
        let mut pct: Vec<u64> = w.iter().map(|x| 5 + x * (100 - 5 * w.len() as u64) / sum).collect();
        let rest = 100 - pct.iter().sum::<u64>();
        pct[0] += rest;
        pct
    })
}
