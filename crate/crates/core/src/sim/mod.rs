//! Scenarios, closed-loop episodes, Monte-Carlo aggregation and file outputs.

mod episode;
mod export;
mod scenario;
mod stats;

use thiserror::Error;

pub use episode::{simulate_episode, EpisodeLog, StepRecord};
pub use export::{
    episode_columns, export_metrics, read_numeric_csv, write_aggregate_csv, write_aggregate_summary,
    write_episode_csv, write_episode_summary, Format, Metrics, NumericTable, AGGREGATE_COLUMNS,
};
pub use scenario::{
    builtin_scenario_path, AgentsSection, EpisodeSection, GroundTruth, RobotSection, Scenario, Variant,
    SCHEMA_VERSION,
};
pub use stats::{aggregate, mean_ci, run_monte_carlo, AggregateStats, RunSummary, Series, Z_95};

use crate::dynamics::DynamicsError;
use crate::planner::PlannerError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
