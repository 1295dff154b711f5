//! CSV and TOML outputs. Floats are written in their shortest round-trip form,
//! so identical inputs give identical bytes and re-reading loses nothing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{AggregateStats, EpisodeLog, Scenario, Series, SimError};

/// Episode CSV columns; `robot_theta` appears only for robots with a heading.
pub fn episode_columns(has_heading: bool) -> Vec<&'static str> {
    let mut c = vec!["step", "time_s", "robot_x", "robot_y"];
    if has_heading {
        c.push("robot_theta");
    }
    c.extend(["u1", "u2", "q_c", "cum_cost", "min_agent_dist_m", "min_obs_dist_m", "iter_time_ms"]);
    c
}

pub const AGGREGATE_COLUMNS: [&str; 8] =
    ["metric", "step", "time_s", "mean", "ci_half_width", "ci_lower", "ci_upper", "n_runs"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, SimError> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

/// Writes one row per step. `iter_time_ms` is left empty unless `timing` is
/// set, because wall-clock times differ between otherwise identical runs.
pub fn write_episode_csv(log: &EpisodeLog, path: impl AsRef<Path>, timing: bool) -> Result<(), SimError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(episode_columns(log.has_heading)).map_err(|e| io_err(path, e))?;
    for s in &log.steps {
        let mut row = vec![
            s.step.to_string(),
            s.time_s.to_string(),
            s.robot.position[0].to_string(),
            s.robot.position[1].to_string(),
        ];
        if log.has_heading {
            row.push(s.robot.heading.to_string());
        }
        row.extend([
            s.control[0].to_string(),
            s.control[1].to_string(),
            s.q_c.to_string(),
            s.cum_cost.to_string(),
            s.min_agent_dist.to_string(),
            s.min_obs_dist.to_string(),
            if timing { (s.iter_time_s * 1e3).to_string() } else { String::new() },
        ]);
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// A numeric CSV read back: header plus rows, empty cells as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a CSV whose cells are numbers or empty; text cells are an error.
pub fn read_numeric_csv(path: impl AsRef<Path>) -> Result<NumericTable, SimError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>()
                        .map(Some)
                        .map_err(|_| SimError::Parse(format!("{}: not a number: {c:?}", path.display())))
                }
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

/// Long-format aggregate: one block of `steps` rows per metric.
pub fn write_aggregate_csv(stats: &AggregateStats, path: impl AsRef<Path>) -> Result<(), SimError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(AGGREGATE_COLUMNS).map_err(|e| io_err(path, e))?;
    let blocks: [(&str, &Series); 3] = [
        ("cum_cost", &stats.cum_cost),
        ("min_agent_dist_m", &stats.min_agent_dist),
        ("min_obs_dist_m", &stats.min_obs_dist),
    ];
    for (name, s) in blocks {
        for t in 0..s.mean.len() {
            let (m, h) = (s.mean[t], s.half_width[t]);
            w.write_record([
                name.to_string(),
                t.to_string(),
                ((t + 1) as f64 * stats.dt).to_string(),
                m.to_string(),
                h.to_string(),
                (m - h).to_string(),
                (m + h).to_string(),
                s.count[t].to_string(),
            ])
            .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct EpisodeSummary<'a> {
    kind: &'static str,
    seed: u64,
    steps: usize,
    goal_reached: bool,
    collision: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<&'a str>,
    final_cum_cost: f64,
    final_cum_stability_cost: f64,
    min_agent_dist_m: f64,
    min_obs_dist_m: f64,
    mean_effective_sample_size: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_iteration_time_ms: Option<f64>,
    scenario: &'a Scenario,
}

#[derive(Serialize)]
struct AggregateSummary<'a> {
    kind: &'static str,
    n_runs: usize,
    seed0: u64,
    collision_rate: f64,
    goal_rate: f64,
    final_cum_cost_mean: f64,
    final_cum_cost_ci_half_width: f64,
    min_agent_dist_ci_lower_m: f64,
    min_obs_dist_ci_lower_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_iteration_time_ms: Option<f64>,
    failures: BTreeMap<String, String>,
    scenario: &'a Scenario,
}

fn write_toml(path: &Path, value: &impl Serialize) -> Result<(), SimError> {
    let text = toml::to_string(value).map_err(|e| SimError::Parse(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Rates, final values and the resolved scenario of one episode.
pub fn write_episode_summary(
    log: &EpisodeLog,
    scenario: &Scenario,
    path: impl AsRef<Path>,
    timing: bool,
) -> Result<(), SimError> {
    let last = log.steps.last();
    write_toml(
        path.as_ref(),
        &EpisodeSummary {
            kind: "episode",
            seed: log.seed,
            steps: log.steps.len(),
            goal_reached: log.goal_reached,
            collision: log.collision,
            failure: log.failure.as_deref(),
            final_cum_cost: last.map_or(0.0, |s| s.cum_cost),
            final_cum_stability_cost: last.map_or(0.0, |s| s.cum_stability_cost),
            min_agent_dist_m: log.min_agent_distance(),
            min_obs_dist_m: log.min_obstacle_distance(),
            mean_effective_sample_size: log.steps.iter().map(|s| s.effective_sample_size).sum::<f64>()
                / log.steps.len().max(1) as f64,
            mean_iteration_time_ms: timing.then(|| log.mean_iteration_time_s() * 1e3),
            scenario,
        },
    )
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn write_aggregate_summary(
    stats: &AggregateStats,
    scenario: &Scenario,
    seed0: u64,
    path: impl AsRef<Path>,
    timing: bool,
) -> Result<(), SimError> {
    write_toml(
        path.as_ref(),
        &AggregateSummary {
            kind: "aggregate",
            n_runs: stats.n_runs,
            seed0,
            collision_rate: stats.collision_rate,
            goal_rate: stats.goal_rate,
            final_cum_cost_mean: stats.cum_cost.last_mean(),
            final_cum_cost_ci_half_width: stats.cum_cost.half_width.last().copied().unwrap_or(f64::NAN),
            min_agent_dist_ci_lower_m: min_of(&stats.min_agent_dist.lower()),
            min_obs_dist_ci_lower_m: min_of(&stats.min_obs_dist.lower()),
            mean_iteration_time_ms: timing.then(|| stats.mean_iteration_time_s * 1e3),
            failures: stats.failures.iter().map(|(s, m)| (s.to_string(), m.clone())).collect(),
            scenario,
        },
    )
}

/// Writes either kind of metrics to `path`, choosing CSV or TOML by extension.
pub enum Metrics<'a> {
    Episode(&'a EpisodeLog),
    Aggregate(&'a AggregateStats),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Summary,
}

pub fn export_metrics(
    metrics: Metrics<'_>,
    scenario: &Scenario,
    path: impl AsRef<Path>,
    format: Format,
) -> Result<(), SimError> {
    match (metrics, format) {
        (Metrics::Episode(l), Format::Csv) => write_episode_csv(l, path, false),
        (Metrics::Episode(l), Format::Summary) => write_episode_summary(l, scenario, path, false),
        (Metrics::Aggregate(a), Format::Csv) => write_aggregate_csv(a, path),
        (Metrics::Aggregate(a), Format::Summary) => {
            let seed0 = a.runs.first().map_or(0, |r| r.seed);
            write_aggregate_summary(a, scenario, seed0, path, false)
        }
    }
}
