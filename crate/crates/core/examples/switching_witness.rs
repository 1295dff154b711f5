//! The robot is within the sensing radius of one sigma point but not of the
//! mean. Switching per point lets that point react; switching on the mean
//! does not, and the predictions differ. Far from the robot they coincide.

use ecut_mppi::dynamics::{AgentParams, HybridAgentModel, RobotModel, Vec2};
use ecut_mppi::planner::{advance_agent_sets, initial_sets, AgentBelief, Environment, PlannerConfig, SwitchingPolicy};
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
    let belief = [AgentBelief::isotropic(Vec2::zeros(), 0.25)];
    for robot in [Vec2::new(2.5, 0.0), Vec2::new(10.0, 0.0)] {
        println!("robot at ({}, {}), {:.2} m from the mean", robot[0], robot[1], robot.norm());
        for policy in [SwitchingPolicy::PerSigmaPoint, SwitchingPolicy::MeanBased] {
            let cfg = PlannerConfig {
                switching: policy,
                ..PlannerConfig::default()
            };
            let mut sets = initial_sets(&belief, cfg.ut_params()).unwrap();
            let modes = advance_agent_sets(&mut sets, &robot, &env, &cfg).unwrap();
            let m = empirical_moments(&sets[0]);
            let names: Vec<&str> = modes[0]
                .iter()
                .map(|id| if *id == HybridAgentModel::COOPERATIVE { "C" } else { "U" })
                .collect();
            println!(
                "  {policy:?}: modes {}  next mean ({:.6}, {:.6})",
                names.join(""),
                m.mean[0],
                m.mean[1]
            );
        }
    }
}
