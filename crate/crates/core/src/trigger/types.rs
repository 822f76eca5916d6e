use std::fmt;

use serde::{Deserialize, Serialize};

use super::pattern::EventPattern;
use crate::action::ActionTemplate;
use crate::predicate::PredicateExpr;

/// Standing request by a subject to be told about matching events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub subscription_id: u64,
    pub subscriber: String,
    pub pattern: EventPattern,
    pub created_at: i64,
}

/// Event-condition-action rule. The condition may read only the event's
/// object and the firing context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRule {
    pub trigger_id: String,
    pub pattern: EventPattern,
    pub condition: PredicateExpr,
    pub actor: String,
    pub action: ActionTemplate,
    pub priority: i64,
    pub description: String,
}

/// Which fields identify duplicate firings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupKeyFields {
    pub trigger: bool,
    pub actor: bool,
    pub object: bool,
}

impl Default for DedupKeyFields {
    fn default() -> Self {
        DedupKeyFields {
            trigger: true,
            actor: true,
            object: true,
        }
    }
}

/// Limits on trigger propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationPolicy {
    pub max_cascade_depth: u32,
    /// Ticks during which a fired key suppresses repeats.
    pub dedup_window: i64,
    pub dedup_key: DedupKeyFields,
    /// Maximum fired decisions per tick.
    pub tick_budget: usize,
}

impl Default for PropagationPolicy {
    fn default() -> Self {
        PropagationPolicy {
            max_cascade_depth: 16,
            dedup_window: 10,
            dedup_key: DedupKeyFields::default(),
            tick_budget: 1000,
        }
    }
}

impl PropagationPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_cascade_depth == 0 || self.dedup_window <= 0 || self.tick_budget == 0 {
            return Err("propagation bounds must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiringReason {
    Fired,
    ConditionFalse,
    Deduped,
    DepthExceeded,
    BudgetExhausted,
}

impl FiringReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FiringReason::Fired => "fired",
            FiringReason::ConditionFalse => "condition_false",
            FiringReason::Deduped => "deduped",
            FiringReason::DepthExceeded => "depth_exceeded",
            FiringReason::BudgetExhausted => "budget_exhausted",
        }
    }
}

impl fmt::Display for FiringReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Audit record of one trigger evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringDecision {
    pub trigger_id: String,
    pub event_id: u64,
    pub tick: i64,
    pub fired: bool,
    pub reason: FiringReason,
}
