//! Deterministic tick-based simulation of scripted agents over a BIB.

mod harness;
mod scenario;
pub(crate) mod syntax;

use thiserror::Error;

pub use harness::{RunLimits, RunResult, Simulation, SubjectCounters, TickStats};
pub use scenario::{
    load_scenario, Activation, AgentScript, Clause, ExternalEvent, NegotiationSpec, Scenario,
    ScheduledEvent, SCENARIO_HEADER, SNAPSHOT_HEADER,
};
pub(crate) use scenario::{parse_document, write_entity_sections, write_rules};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unresolved references: {}", .0.join("; "))]
    Dangling(Vec<String>),
    #[error("{0}")]
    Invalid(String),
}

impl ScenarioError {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        ScenarioError::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
