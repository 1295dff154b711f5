//! Stage costs: quadratic goal attraction plus barrier terms on the
//! lower confidence bound of predicted clearances.

use super::{Environment, PlannerConfig};
use crate::dynamics::{distance_to_agent, min_obstacle_distance, RobotState, Vec2};
use crate::sigma::SigmaPointSet;

/// `γ₁ ‖pos(x_r) - goal‖²`
#[inline]
pub fn stage_cost_convergence(x_r: &RobotState, goal: &Vec2, gain: f64) -> f64 {
    gain * (x_r.position - goal).norm_squared()
}

/// Weighted mean and standard deviation of the robot-agent clearance over a
/// sigma-point set. Negative weights can make the variance estimate negative;
/// it is clamped at zero.
pub fn clearance_stats(robot: &RobotState, set: &SigmaPointSet<2>, radii: f64) -> (f64, f64) {
    // moments about the first clearance
    let mut origin = None;
    let (mut first, mut second) = (0.0, 0.0);
    for (p, w) in set.iter() {
        let d = distance_to_agent(robot, p, radii);
        let c = *origin.get_or_insert(d);
        first += w * (d - c);
        second += w * (d - c) * (d - c);
    }
    let var = second - first * first;
    (origin.unwrap_or(0.0) + first, var.max(0.0).sqrt())
}

/// `γ₂ / max(r, floor) + γ₃ / max(h_obs, floor)` where `r` is the smallest
/// lower confidence bound over agents and `h_obs` the smallest obstacle
/// clearance, both reduced by the safety margin. Missing terms contribute zero.
pub fn risk_barrier(agent_bound: Option<f64>, obstacle_clearance: Option<f64>, cfg: &PlannerConfig) -> f64 {
    let floor = cfg.barrier_floor;
    let mut cost = 0.0;
    if let Some(r) = agent_bound {
        cost += cfg.agent_risk_gain / (r - cfg.safety_margin).max(floor);
    }
    if let Some(h) = obstacle_clearance {
        cost += cfg.obstacle_risk_gain / (h - cfg.safety_margin).max(floor);
    }
    cost
}

/// Risk stage cost from sigma-point predictions of every agent.
pub fn stage_cost_risk(
    robot: &RobotState,
    agent_sets: &[SigmaPointSet<2>],
    env: &Environment,
    cfg: &PlannerConfig,
) -> f64 {
    risk_over(robot, agent_sets.iter(), env, cfg)
}

pub(crate) fn risk_over<'a>(
    robot: &RobotState,
    agent_sets: impl Iterator<Item = &'a SigmaPointSet<2>>,
    env: &Environment,
    cfg: &PlannerConfig,
) -> f64 {
    let radii = env.radii();
    let bound = agent_sets
        .map(|s| {
            let (mu, sigma) = clearance_stats(robot, s, radii);
            mu - cfg.risk_alpha * sigma
        })
        .reduce(f64::min);
    let h_obs = min_obstacle_distance(robot, &env.obstacles, env.robot_radius);
    risk_barrier(bound, h_obs, cfg)
}
