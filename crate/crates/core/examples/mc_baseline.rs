//! Sampled agent futures for a fixed robot path, and the risk each prediction
//! scheme assigns to it: K replicas against the five sigma points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecut_mppi::dynamics::{AgentParams, HybridAgentModel, RobotModel, RobotState, Vec2};
use ecut_mppi::mc::{mc_agent_rollout, mc_stage_cost_risk};
use ecut_mppi::planner::{
    advance_agent_sets, initial_sets, stage_cost_risk, AgentBelief, Environment, PlannerConfig,
};

fn main() {
    let env = Environment {
        robot_model: RobotModel::SingleIntegrator,
        robot_radius: 0.3,
        goal: Vec2::new(0.0, 3.0),
        obstacles: vec![],
        agents: vec![HybridAgentModel::attention(AgentParams::default()); 2],
        agent_radius: 0.3,
    };
    let beliefs = [
        AgentBelief::isotropic(Vec2::new(-3.0, 0.0), 0.0025),
        AgentBelief::isotropic(Vec2::new(-5.0, 0.8), 0.0025),
    ];
    let h = 30;
    // robot walks up the y axis at 1 m/s
    let robot: Vec<Vec2> = (0..h).map(|t| Vec2::new(0.0, -1.5 + 0.05 * t as f64)).collect();

    let cfg = PlannerConfig::default();
    let mut sets = initial_sets(&beliefs, cfg.ut_params()).unwrap();
    let mut ecut = Vec::with_capacity(h);
    for r in &robot {
        ecut.push(stage_cost_risk(&RobotState { position: *r, heading: 0.0 }, &sets, &env, &cfg));
        advance_agent_sets(&mut sets, r, &env, &cfg).unwrap();
    }

    for k in [20, 100, 1000] {
        let cfg = PlannerConfig {
            mc_replicas: k,
            horizon: h,
            ..PlannerConfig::default()
        };
        let bundle = mc_agent_rollout(&robot, &beliefs, &env, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let risk: Vec<f64> = (0..h)
            .map(|t| mc_stage_cost_risk(&RobotState { position: robot[t], heading: 0.0 }, &bundle, t, &env, &cfg).unwrap())
            .collect();
        let peak = risk.iter().copied().fold(0.0, f64::max);
        println!("K = {k:>4}: total risk {:>8.3}, peak {:>7.3}", risk.iter().sum::<f64>(), peak);
    }
    println!(
        "sigma points: total risk {:>8.3}, peak {:>7.3}",
        ecut.iter().sum::<f64>(),
        ecut.iter().copied().fold(0.0, f64::max)
    );
}
