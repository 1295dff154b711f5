//! The planner variants side by side on a shortened copy of the shipped
//! scenario. Arguments: runs and steps (defaults 4 and 30).

use ecut_mppi::cli::{comparison_header, comparison_row};
use ecut_mppi::sim::{builtin_scenario_path, run_monte_carlo, Scenario, Variant};

fn main() {
    let mut args = std::env::args().skip(1).filter_map(|a| a.parse::<usize>().ok());
    let runs = args.next().unwrap_or(4);
    let mut base = Scenario::load(builtin_scenario_path()).unwrap();
    base.episode.steps = args.next().unwrap_or(30);
    println!("{}", comparison_header());
    for v in Variant::study(&[20]) {
        let stats = run_monte_carlo(&v.apply(&base), runs, 0).unwrap();
        println!("{}", comparison_row(&v.label(), &stats));
    }
}
