//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::sim::{
    run_monte_carlo, simulate_episode, write_aggregate_csv, write_aggregate_summary, write_episode_csv,
    write_episode_summary, AggregateStats, Scenario, SimError, Variant,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ECUT_MPPI_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ecut-mppi", version, about = "Risk-aware MPPI among agents with hybrid dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to $ECUT_MPPI_OUT_DIR, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rollout worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Record planner wall time in the outputs (makes them run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one episode.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate seeded episodes and aggregate them.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
    },
    /// Compare the aware, unaware, mean-based and Monte-Carlo planners.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        /// Replicas per control sample of the Monte-Carlo planner; a
        /// comma-separated list adds one Monte-Carlo row per value.
        #[arg(long, value_delimiter = ',', default_values_t = [20])]
        mc_replicas: Vec<usize>,
    },
    /// Check a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn create_dir(dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    match threads {
        None => Ok(f()),
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| e.to_string()),
    }
}

fn stem(scenario: &Path) -> String {
    scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

/// One line per variant: the columns of the comparison table.
pub fn comparison_row(label: &str, stats: &AggregateStats) -> String {
    let lower = |s: &crate::sim::Series| s.lower().into_iter().fold(f64::INFINITY, f64::min);
    format!(
        "{:<18} {:>6} {:>14.3} {:>10.3} {:>10.2} {:>10.2} {:>14.3} {:>14.3} {:>10.2}",
        label,
        stats.n_runs,
        stats.cum_cost.last_mean(),
        stats.cum_cost.half_width.last().copied().unwrap_or(f64::NAN),
        stats.collision_rate,
        stats.goal_rate,
        lower(&stats.min_agent_dist),
        lower(&stats.min_obs_dist),
        stats.mean_iteration_time_s * 1e3,
    )
}

pub fn comparison_header() -> String {
    format!(
        "{:<18} {:>6} {:>14} {:>10} {:>10} {:>10} {:>14} {:>14} {:>10}",
        "variant", "runs", "final_cost", "cost_ci", "collision", "goal", "agent_ci_low_m", "obs_ci_low_m", "iter_ms"
    )
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<(), String> {
    let e = |e: SimError| e.to_string();
    match cmd {
        Command::Validate { scenario } => {
            let s = Scenario::load(&scenario).map_err(e)?;
            writeln!(
                stdout,
                "{}: ok ({} agents, {} obstacles, {} steps)",
                scenario.display(),
                s.agents.positions.len(),
                s.obstacles.len(),
                s.episode.steps
            )
            .map_err(|e| e.to_string())
        }
        Command::Run { common, seed } => {
            let s = Scenario::load(&common.scenario).map_err(e)?;
            let dir = out_dir(common.out);
            create_dir(&dir).map_err(e)?;
            let log = with_threads(common.threads, || simulate_episode(&s, seed))?.map_err(e)?;
            let base = format!("{}_seed{seed}", stem(&common.scenario));
            let csv = dir.join(format!("{base}.csv"));
            write_episode_csv(&log, &csv, common.timing).map_err(e)?;
            write_episode_summary(&log, &s, dir.join(format!("{base}_summary.toml")), common.timing).map_err(e)?;
            writeln!(
                stdout,
                "seed {seed}: cost {:.3}, goal {}, collision {}, min agent clearance {:.3} m -> {}",
                log.final_cum_cost(),
                log.goal_reached,
                log.collision,
                log.min_agent_distance(),
                csv.display()
            )
            .map_err(|e| e.to_string())?;
            match log.failure {
                Some(f) => Err(format!("episode ended early: {f}")),
                None => Ok(()),
            }
        }
        Command::Mc { common, runs, seed0 } => {
            let s = Scenario::load(&common.scenario).map_err(e)?;
            let dir = out_dir(common.out);
            create_dir(&dir).map_err(e)?;
            let stats = with_threads(common.threads, || run_monte_carlo(&s, runs, seed0))?.map_err(e)?;
            let base = format!("{}_mc", stem(&common.scenario));
            write_aggregate_csv(&stats, dir.join(format!("{base}.csv"))).map_err(e)?;
            write_aggregate_summary(&stats, &s, seed0, dir.join(format!("{base}_summary.toml")), common.timing)
                .map_err(e)?;
            writeln!(stdout, "{}", comparison_header()).map_err(|e| e.to_string())?;
            writeln!(stdout, "{}", comparison_row("scenario", &stats)).map_err(|e| e.to_string())
        }
        Command::Compare { common, runs, seed0, mc_replicas } => {
            let s = Scenario::load(&common.scenario).map_err(e)?;
            let dir = out_dir(common.out);
            create_dir(&dir).map_err(e)?;
            writeln!(stdout, "{}", comparison_header()).map_err(|e| e.to_string())?;
            for v in Variant::study(&mc_replicas) {
                let scenario = v.apply(&s);
                scenario.validate().map_err(e)?;
                let stats = with_threads(common.threads, || run_monte_carlo(&scenario, runs, seed0))?.map_err(e)?;
                let base = format!("{}_{}", stem(&common.scenario), v.label());
                write_aggregate_csv(&stats, dir.join(format!("{base}.csv"))).map_err(e)?;
                write_aggregate_summary(&stats, &scenario, seed0, dir.join(format!("{base}_summary.toml")), common.timing)
                    .map_err(e)?;
                writeln!(stdout, "{}", comparison_row(&v.label(), &stats)).map_err(|e| e.to_string())?;
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns 0 on success, 2 on usage errors and 1 on any other failure.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
