//! A unicycle robot on the shipped scenario: the planner samples linear and
//! angular velocity, and the heading is logged.

use ecut_mppi::dynamics::RobotModel;
use ecut_mppi::planner::ControlBounds;
use ecut_mppi::sim::{builtin_scenario_path, simulate_episode, Scenario};

fn main() {
    let mut s = Scenario::load(builtin_scenario_path()).unwrap();
    s.robot.model = RobotModel::Unicycle;
    s.robot.heading = std::f64::consts::FRAC_PI_2;
    s.planner.control_bounds = Some(ControlBounds {
        lower: [-1.0, -3.0],
        upper: [4.0, 3.0],
    });
    s.episode.steps = 40;
    let log = simulate_episode(&s, 0).unwrap();
    for r in log.steps.iter().step_by(5) {
        println!(
            "t {:>4.2} s  ({:+.2}, {:+.2})  heading {:+.2} rad  v {:+.2}  w {:+.2}",
            r.time_s, r.robot.position[0], r.robot.position[1], r.robot.heading, r.control[0], r.control[1]
        );
    }
    println!("collision {}, min agent clearance {:.2} m", log.collision, log.min_agent_distance());
}
