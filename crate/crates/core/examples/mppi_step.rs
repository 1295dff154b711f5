//! A few receding-horizon iterations of the planner for a robot that must
//! pass an agent walking towards it, printing the applied controls and the
//! weight statistics.

use ecut_mppi::dynamics::{AgentContext, AgentParams, HybridAgentModel, Obstacle, RobotModel, RobotState, Vec2};
use ecut_mppi::planner::{AgentBelief, Environment, MppiPlanner, PlannerConfig};

fn main() {
    let params = AgentParams {
        nominal_velocity: [-1.0, 0.0],
        ..AgentParams::default()
    };
    let env = Environment {
        robot_model: RobotModel::SingleIntegrator,
        robot_radius: 0.3,
        goal: Vec2::new(5.0, 0.0),
        obstacles: vec![Obstacle::new(2.5, 1.2, 0.4)],
        agents: vec![HybridAgentModel::attention(params)],
        agent_radius: 0.3,
    };
    let cfg = PlannerConfig {
        temperature: 10.0,
        agent_risk_gain: 5.0,
        seed: 1,
        ..PlannerConfig::default()
    };
    let mut planner = MppiPlanner::new(cfg, env.clone()).unwrap();
    let mut x = RobotState::at(0.0, 0.0);
    let mut agent = Vec2::new(4.0, 0.0);
    for k in 0..20 {
        let beliefs = [AgentBelief::isotropic(agent, 0.0025)];
        let (u, d) = planner.step(&x, &beliefs).unwrap();
        x = env.robot_model.step(&x, &u, 0.05);
        let ctx = AgentContext::new(x.position, &env.obstacles);
        agent = env.agents[0].sample_step(&agent, &ctx, 0.05, &Vec2::zeros()).unwrap();
        println!(
            "{k:>2}  u ({:+.2}, {:+.2})  robot ({:.2}, {:.2})  agent ({:.2}, {:.2})  best cost {:.1}  ESS {:.1}",
            u[0], u[1], x.position[0], x.position[1], agent[0], agent[1], d.beta, d.effective_sample_size
        );
    }
}
