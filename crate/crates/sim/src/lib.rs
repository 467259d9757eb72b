//! Agent-based simulation and log analytics for the commons engine.
//!
//! [`runner`] drives a real [`commons_core::Engine`] with parameterized
//! residents described by a TOML [`scenario`]. [`analytics`] works from an
//! event log alone, so it applies equally to simulated and live houses.
//! [`output`] renders the results as CSV and SVG.

pub mod analytics;
pub mod output;
pub mod runner;
pub mod scenario;

use commons_core::EngineError;

pub use runner::{run_scenario, run_scenario_with, SimRun};
pub use scenario::SimScenario;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("event log is empty")]
    EmptyLog,
    #[error("analysis window contains no claims")]
    EmptyWindow,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
