//! Validity checking of behaviors and the built-in coordination rules
//! (write mutual exclusion, negotiation deadlines).

mod engine;
mod mutex;
mod negotiation;
mod rule;
mod verdict;

pub use engine::{BehaviorRequest, PolicyEngine, PolicyError};
pub use mutex::MutexGuard;
pub use negotiation::{
    due_tick, is_response_to, negotiation_timeout_check, responder_of, Directive, NegotiationRule,
    IN_REPLY_TO, REQUEST_TO,
};
pub use rule::{Component, Scope, ValidityRule};
pub use verdict::{GateResult, RuleFailure, RuleResult, Verdict};

#[cfg(test)]
mod tests;
