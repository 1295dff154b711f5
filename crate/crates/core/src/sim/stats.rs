use rayon::prelude::*;

use super::{simulate_episode, EpisodeLog, Scenario, SimError};

/// Normal quantile of the two-sided 95% interval.
pub const Z_95: f64 = 1.96;

/// Mean and 95% normal-approximation interval half-width per step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
    /// Runs contributing at each step.
    pub count: Vec<usize>,
}

impl Series {
    pub fn lower(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.half_width).map(|(m, h)| m - h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.half_width).map(|(m, h)| m + h).collect()
    }

    pub fn last_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(f64::NAN)
    }
}

/// `(mean, 1.96 s / √n)` with the `n - 1` sample standard deviation. Equal
/// values, including a single value or agreeing infinities (no agents or no
/// obstacles), give exactly that value and zero width.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let Some(&first) = values.first() else {
        return (f64::NAN, f64::NAN);
    };
    if values.iter().all(|v| *v == first) {
        return (first, 0.0);
    }
    if values.iter().any(|v| v.is_infinite()) {
        return (values.iter().sum::<f64>() / n as f64, f64::INFINITY);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, Z_95 * sd / (n as f64).sqrt())
}

/// Per-run summary kept for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub cum_cost: Vec<f64>,
    pub min_agent_dist: Vec<f64>,
    pub min_obs_dist: Vec<f64>,
    pub collision: bool,
    pub goal_reached: bool,
    pub mean_iteration_time_s: f64,
    pub failure: Option<String>,
}

impl From<&EpisodeLog> for RunSummary {
    fn from(log: &EpisodeLog) -> Self {
        Self {
            seed: log.seed,
            cum_cost: log.steps.iter().map(|s| s.cum_cost).collect(),
            min_agent_dist: log.steps.iter().map(|s| s.min_agent_dist).collect(),
            min_obs_dist: log.steps.iter().map(|s| s.min_obs_dist).collect(),
            collision: log.collision,
            goal_reached: log.goal_reached,
            mean_iteration_time_s: log.mean_iteration_time_s(),
            failure: log.failure.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub n_runs: usize,
    pub steps: usize,
    pub dt: f64,
    pub cum_cost: Series,
    pub min_agent_dist: Series,
    pub min_obs_dist: Series,
    /// Fraction of runs with any clearance at or below zero.
    pub collision_rate: f64,
    pub goal_rate: f64,
    pub mean_iteration_time_s: f64,
    /// `(seed, message)` of every episode that ended early.
    pub failures: Vec<(u64, String)>,
    pub runs: Vec<RunSummary>,
}

fn series(runs: &[RunSummary], steps: usize, pick: impl Fn(&RunSummary) -> &[f64]) -> Series {
    let mut s = Series::default();
    let mut values = Vec::with_capacity(runs.len());
    for t in 0..steps {
        values.clear();
        values.extend(runs.iter().filter_map(|r| pick(r).get(t).copied()));
        let (m, h) = mean_ci(&values);
        s.mean.push(m);
        s.half_width.push(h);
        s.count.push(values.len());
    }
    s
}

/// Aggregates per-run summaries. Early-ended runs contribute to the steps
/// they reached and count as collisions if they had one.
pub fn aggregate(runs: &[RunSummary], steps: usize, dt: f64) -> AggregateStats {
    let n = runs.len().max(1) as f64;
    AggregateStats {
        n_runs: runs.len(),
        steps,
        dt,
        cum_cost: series(runs, steps, |r| &r.cum_cost),
        min_agent_dist: series(runs, steps, |r| &r.min_agent_dist),
        min_obs_dist: series(runs, steps, |r| &r.min_obs_dist),
        collision_rate: runs.iter().filter(|r| r.collision).count() as f64 / n,
        goal_rate: runs.iter().filter(|r| r.goal_reached).count() as f64 / n,
        mean_iteration_time_s: runs.iter().map(|r| r.mean_iteration_time_s).sum::<f64>() / n,
        failures: runs
            .iter()
            .filter_map(|r| r.failure.clone().map(|f| (r.seed, f)))
            .collect(),
        runs: runs.to_vec(),
    }
}

/// Runs seeds `seed0 .. seed0 + n_runs` and aggregates them. Results are
/// indexed by seed, so the outcome does not depend on scheduling.
pub fn run_monte_carlo(scenario: &Scenario, n_runs: usize, seed0: u64) -> Result<AggregateStats, SimError> {
    if n_runs < 1 {
        return Err(SimError::Invalid {
            field: "runs".into(),
            message: "must be at least 1".into(),
        });
    }
    scenario.validate()?;
    let logs: Vec<Result<EpisodeLog, SimError>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| simulate_episode(scenario, seed0 + i))
        .collect();
    let runs = logs
        .into_iter()
        .map(|l| l.map(|log| RunSummary::from(&log)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&runs, scenario.episode.steps, scenario.episode.dt))
}
