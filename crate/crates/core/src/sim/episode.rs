use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{GroundTruth, Scenario, SimError};
use crate::dynamics::{distance_to_agent, min_obstacle_distance, AgentContext, RobotState, Vec2};
use crate::planner::{risk_barrier, stage_cost_convergence, MppiPlanner};

/// State after applying the control planned at `step`, i.e. at `(step + 1) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time_s: f64,
    pub robot: RobotState,
    pub control: Vec2,
    pub agents: Vec<Vec2>,
    /// Goal term of the stage cost.
    pub q_c: f64,
    /// Risk term with the true clearances (zero spread).
    pub q_h: f64,
    /// Running sum of `q_c + q_h`.
    pub cum_cost: f64,
    /// Running sum of `q_c`.
    pub cum_stability_cost: f64,
    /// `inf` without agents.
    pub min_agent_dist: f64,
    /// `inf` without obstacles.
    pub min_obs_dist: f64,
    pub iter_time_s: f64,
    pub beta: f64,
    pub effective_sample_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub seed: u64,
    pub dt: f64,
    pub has_heading: bool,
    pub initial_robot: RobotState,
    pub initial_agents: Vec<Vec2>,
    pub steps: Vec<StepRecord>,
    pub goal_reached: bool,
    pub collision: bool,
    /// Planner error that ended the episode early.
    pub failure: Option<String>,
}

impl EpisodeLog {
    pub fn final_cum_cost(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_cost)
    }

    pub fn min_agent_distance(&self) -> f64 {
        self.steps.iter().map(|s| s.min_agent_dist).fold(f64::INFINITY, f64::min)
    }

    pub fn min_obstacle_distance(&self) -> f64 {
        self.steps.iter().map(|s| s.min_obs_dist).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_iteration_time_s(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.iter_time_s).sum::<f64>() / self.steps.len() as f64
    }
}

fn min_agent_clearance(robot: &RobotState, agents: &[Vec2], radii: f64) -> f64 {
    agents
        .iter()
        .map(|p| distance_to_agent(robot, p, radii))
        .fold(f64::INFINITY, f64::min)
}

/// Closed-loop episode: plan, apply the first control, move the true agents
/// with the hybrid model evaluated on true states, refresh the beliefs.
///
/// The planner's perturbations use the stream seeded by `seed`; the true
/// agents' disturbances use stream 1 of the same seed.
pub fn simulate_episode(scenario: &Scenario, seed: u64) -> Result<EpisodeLog, SimError> {
    scenario.validate()?;
    let mut cfg = scenario.planner.clone();
    cfg.dt = scenario.episode.dt;
    cfg.seed = seed;
    let env = scenario.environment();
    let mut planner = MppiPlanner::new(cfg, env.clone())?;
    let mut truth_rng = ChaCha8Rng::seed_from_u64(seed);
    truth_rng.set_stream(1);

    let dt = scenario.episode.dt;
    let cfg = planner.config().clone();
    let radii = env.radii();
    let mut x = scenario.robot_start();
    let mut agents = scenario.agent_positions();
    let mut log = EpisodeLog {
        seed,
        dt,
        has_heading: env.robot_model.has_heading(),
        initial_robot: x,
        initial_agents: agents.clone(),
        steps: Vec::with_capacity(scenario.episode.steps),
        goal_reached: false,
        collision: false,
        failure: None,
    };
    let (mut cum, mut cum_c) = (0.0, 0.0);
    for k in 0..scenario.episode.steps {
        let beliefs = scenario.beliefs(&agents);
        let (u, diag) = match planner.step(&x, &beliefs) {
            Ok(r) => r,
            Err(e) => {
                log.failure = Some(format!("step {k}: {e}"));
                break;
            }
        };
        let mut next = Vec::with_capacity(agents.len());
        for (i, (model, p)) in env.agents.iter().zip(&agents).enumerate() {
            let ctx = AgentContext::new(x.position, &env.obstacles).with_agents(&agents, i);
            let z = match scenario.agents.ground_truth {
                GroundTruth::Sampled => Vec2::new(truth_rng.sample(StandardNormal), truth_rng.sample(StandardNormal)),
                GroundTruth::Mean => Vec2::zeros(),
            };
            next.push(model.sample_step(p, &ctx, dt, &z)?);
        }
        agents = next;
        x = env.robot_model.step(&x, &u, dt);

        let min_agent = min_agent_clearance(&x, &agents, radii);
        let min_obs = min_obstacle_distance(&x, &env.obstacles, env.robot_radius);
        let q_c = stage_cost_convergence(&x, &env.goal, cfg.goal_gain);
        let q_h = risk_barrier((!agents.is_empty()).then_some(min_agent), min_obs, &cfg);
        cum += q_c + q_h;
        cum_c += q_c;
        log.collision |= min_agent <= 0.0 || min_obs.is_some_and(|d| d <= 0.0);
        log.steps.push(StepRecord {
            step: k,
            time_s: (k + 1) as f64 * dt,
            robot: x,
            control: u,
            agents: agents.clone(),
            q_c,
            q_h,
            cum_cost: cum,
            cum_stability_cost: cum_c,
            min_agent_dist: min_agent,
            min_obs_dist: min_obs.unwrap_or(f64::INFINITY),
            iter_time_s: diag.wall_time_s,
            beta: diag.beta,
            effective_sample_size: diag.effective_sample_size,
        });
    }
    log.goal_reached = log.failure.is_none() && (x.position - env.goal).norm() <= scenario.robot.goal_tolerance;
    Ok(log)
}
