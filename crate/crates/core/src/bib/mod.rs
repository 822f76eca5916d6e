//! The behavioral information base: entities, behavior log, change feed and models.

mod forecast;
mod records;
mod store;

pub use forecast::{project_linear, ForecastError, ForecastModel, ModelKind, ModelOutput};
pub use records::*;
pub use store::{apply_event, replay_feed, BehaviorFilter, Bib, BibError, Entity};

#[cfg(test)]
mod tests;
