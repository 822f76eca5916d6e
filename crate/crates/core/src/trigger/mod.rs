//! Information-driven propagation: subscriptions over the change feed,
//! event-condition-action triggers, and the governor that bounds cascades.

mod engine;
mod pattern;
mod types;

pub use engine::{event_context, TriggerEngine, TriggerError};
pub use pattern::EventPattern;
pub use types::{
    DedupKeyFields, FiringDecision, FiringReason, PropagationPolicy, Subscription, TriggerRule,
};
