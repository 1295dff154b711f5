//! One closed-loop episode on the shipped crossing scenario, written to CSV.
//! Pass a step count to shorten it: `cargo run --release --example
//! closed_loop_episode -- 30`.

use ecut_mppi::sim::{builtin_scenario_path, simulate_episode, write_episode_csv, Scenario};

fn main() {
    let mut s = Scenario::load(builtin_scenario_path()).unwrap();
    if let Some(steps) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        s.episode.steps = steps;
    }
    let log = simulate_episode(&s, 0).unwrap();
    for r in log.steps.iter().step_by(10) {
        println!(
            "t {:>5.2} s  robot ({:+.2}, {:+.2})  cost {:>8.1}  agent clearance {:.2} m  obstacle clearance {:.2} m",
            r.time_s, r.robot.position[0], r.robot.position[1], r.cum_cost, r.min_agent_dist, r.min_obs_dist
        );
    }
    println!(
        "goal {}, collision {}, mean iteration {:.1} ms",
        log.goal_reached,
        log.collision,
        log.mean_iteration_time_s() * 1e3
    );
    let path = std::env::temp_dir().join("closed_loop_episode.csv");
    write_episode_csv(&log, &path, true).unwrap();
    println!("wrote {}", path.display());
}
