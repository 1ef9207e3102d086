//! Scripted crisis scenarios and the metrics computed from their runs.

pub mod metrics;
pub mod runner;
pub mod scenario;

pub use metrics::{emit_metrics, PriorityMetrics, RunMetrics};
pub use runner::{run, run_with, RunOutput, StepRejection};
pub use scenario::{load_scenario, parse_scenario, validate_scenario, Action, Location, Scenario, ScenarioError, Step};
