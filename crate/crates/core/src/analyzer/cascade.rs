use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bib::BehaviorRecord;
use crate::trigger::{FiringDecision, FiringReason};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerTally {
    pub fired: usize,
    pub condition_false: usize,
    pub deduped: usize,
    pub depth_exceeded: usize,
    pub budget_exhausted: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CascadeStats {
    pub depth_histogram: BTreeMap<u32, usize>,
    /// Direct children per behavior, for behaviors with at least one.
    pub fan_out: BTreeMap<u64, usize>,
    /// Largest fan-out anywhere in each root's cascade.
    pub max_fan_out_per_root: BTreeMap<u64, usize>,
    pub max_fan_out: usize,
    /// Mean depth of cascade leaves, i.e. edges from root to leaf.
    pub mean_chain_length: f64,
    pub edges: usize,
    pub triggers: BTreeMap<String, TriggerTally>,
}

pub fn cascade_stats(log: &[BehaviorRecord], decisions: &[FiringDecision]) -> CascadeStats {
    let mut s = CascadeStats::default();
    let by_id: BTreeMap<u64, &BehaviorRecord> = log.iter().map(|b| (b.behavior_id, b)).collect();
    for b in log {
        *s.depth_histogram.entry(b.cascade_depth).or_default() += 1;
        if let Some(p) = b.caused_by {
            *s.fan_out.entry(p).or_default() += 1;
            s.edges += 1;
        }
    }
    let root_of = |mut id: u64| {
        while let Some(p) = by_id.get(&id).and_then(|b| b.caused_by) {
            if !by_id.contains_key(&p) {
                break;
            }
            id = p;
        }
        id
    };
    for b in log {
        let root = root_of(b.behavior_id);
        let fan = s.fan_out.get(&b.behavior_id).copied().unwrap_or(0);
        let slot = s.max_fan_out_per_root.entry(root).or_default();
        *slot = (*slot).max(fan);
    }
    s.max_fan_out = s.fan_out.values().copied().max().unwrap_or(0);
    let leaves: Vec<u32> = log
        .iter()
        .filter(|b| !s.fan_out.contains_key(&b.behavior_id))
        .map(|b| b.cascade_depth)
        .collect();
    if !leaves.is_empty() {
        s.mean_chain_length =
            leaves.iter().map(|&d| f64::from(d)).sum::<f64>() / leaves.len() as f64;
    }
    for d in decisions {
        let t = s.triggers.entry(d.trigger_id.clone()).or_default();
        match d.reason {
            FiringReason::Fired => t.fired += 1,
            FiringReason::ConditionFalse => t.condition_false += 1,
            FiringReason::Deduped => t.deduped += 1,
            FiringReason::DepthExceeded => t.depth_exceeded += 1,
            FiringReason::BudgetExhausted => t.budget_exhausted += 1,
        }
    }
    s
}
