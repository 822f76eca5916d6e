//! Behavior-centric coordination engine.
//!
//! Every behavior `subject:operation(object)` is checked against the
//! subject, object and context constraints of all applicable rules, recorded
//! in the behavioral information base ([`bib::Bib`]), and may trigger further
//! behaviors through governed publish/subscribe propagation
//! ([`trigger::TriggerEngine`]). [`sim`] runs scripted multi-agent scenarios
//! deterministically and [`analyzer`] mines the resulting logs.

pub mod action;
pub mod analyzer;
pub mod bib;
pub mod export;
pub mod literal;
pub mod policy;
pub mod predicate;
pub mod sim;
pub mod trigger;

pub use literal::{CmpOp, Literal, LiteralType};
pub use rust_decimal::Decimal;
