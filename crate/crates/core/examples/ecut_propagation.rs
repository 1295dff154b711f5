//! Predicts one agent for 40 steps while a robot stands near its path. The
//! spread grows, and the points that come within the sensing radius switch to
//! the cooperative mode and bend away from the robot.

use ecut_mppi::dynamics::{AgentParams, HybridAgentModel, RobotModel, Vec2};
use ecut_mppi::planner::{advance_agent_sets, initial_sets, AgentBelief, Environment, PlannerConfig};
use ecut_mppi::sigma::empirical_moments;

fn main() {
    let env = Environment {
        robot_model: RobotModel::SingleIntegrator,
        robot_radius: 0.3,
        goal: Vec2::zeros(),
        obstacles: vec![],
        agents: vec![HybridAgentModel::attention(AgentParams::default())],
        agent_radius: 0.3,
    };
    let cfg = PlannerConfig::default();
    let robot = Vec2::new(3.0, 1.0);
    let mut sets = initial_sets(&[AgentBelief::isotropic(Vec2::new(-2.0, 0.0), 0.0025)], cfg.ut_params()).unwrap();
    println!("step  mean_x  mean_y  std_x  std_y  cooperative_points");
    for t in 1..=cfg.horizon {
        let modes = advance_agent_sets(&mut sets, &robot, &env, &cfg).unwrap();
        let cooperative = modes[0].iter().filter(|m| **m == HybridAgentModel::COOPERATIVE).count();
        if t % 5 == 0 || cooperative > 0 {
            let m = empirical_moments(&sets[0]);
            println!(
                "{t:>4}  {:>6.3}  {:>6.3}  {:>5.3}  {:>5.3}  {cooperative}",
                m.mean[0],
                m.mean[1],
                m.covariance[(0, 0)].sqrt(),
                m.covariance[(1, 1)].sqrt()
            );
        }
    }
}
