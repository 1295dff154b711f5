//! Risk-aware MPPI with sigma-point agent prediction.

mod config;
mod cost;
mod mppi;
mod rollout;

use std::time::Instant;

use nalgebra::Matrix2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{
    Awareness, ControlBounds, ControlSequence, Environment, PlannerConfig, PlannerKind, ReplicaNoise,
    SwitchingPolicy,
};
pub use cost::{clearance_stats, risk_barrier, stage_cost_convergence, stage_cost_risk};
pub use mppi::{
    effective_sample_size, mppi_weights, noise_factor, noise_precision, sample_perturbations, update_control,
};
pub use rollout::{advance_agent_sets, initial_sets, rollout, AgentBelief, RolloutResult};

pub(crate) use rollout::check_inputs;

use crate::dynamics::{DynamicsError, RobotState, Vec2};
use crate::sigma::SigmaError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error("belief of agent {agent}: {source}")]
    Belief {
        agent: usize,
        #[source]
        source: SigmaError,
    },
    #[error("predicting agent {agent}: {source}")]
    Prediction {
        agent: usize,
        #[source]
        source: SigmaError,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<PlannerError>,
    },
    #[error("sample {sample}: cost is not finite")]
    NonFiniteCost { sample: usize },
}

impl PlannerError {
    pub(crate) fn in_sample(self, sample: usize) -> Self {
        match self {
            e @ (PlannerError::Sample { .. } | PlannerError::NonFiniteCost { .. }) => e,
            e => PlannerError::Sample {
                sample,
                source: Box::new(e),
            },
        }
    }
}

/// Per-iteration diagnostics for the episode log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationDiagnostics {
    /// `β = min S_m`.
    pub beta: f64,
    /// `Σ w / max w`.
    pub effective_sample_size: f64,
    pub wall_time_s: f64,
}

/// Receding-horizon MPPI state: the mean sequence and the random stream.
#[derive(Debug, Clone)]
pub struct MppiPlanner {
    config: PlannerConfig,
    env: Environment,
    mean: ControlSequence,
    rng: ChaCha8Rng,
    factor: Matrix2<f64>,
    precision: Matrix2<f64>,
}

impl MppiPlanner {
    /// Starts from the zero mean sequence with the random stream seeded by `config.seed`.
    pub fn new(config: PlannerConfig, env: Environment) -> Result<Self, PlannerError> {
        config.validate()?;
        let factor = noise_factor(&config)?;
        let precision = noise_precision(&config);
        Ok(Self {
            mean: ControlSequence::zeros(config.horizon),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            env,
            factor,
            precision,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn mean_sequence(&self) -> &ControlSequence {
        &self.mean
    }

    pub fn set_mean_sequence(&mut self, mean: ControlSequence) -> Result<(), PlannerError> {
        if mean.len() != self.config.horizon || !mean.is_finite() {
            return Err(PlannerError::Config(format!(
                "mean sequence must have {} finite entries",
                self.config.horizon
            )));
        }
        self.mean = mean;
        Ok(())
    }

    /// Draws the perturbed sequences `u^m = v + ε^m` of the next iteration.
    fn draw_samples(&mut self) -> Vec<ControlSequence> {
        let eps = mppi::draw_with_factor(&self.factor, self.config.samples, self.config.horizon, &mut self.rng);
        eps.iter().map(|e| &self.mean + e).collect()
    }

    /// Costs of every sample, evaluated in parallel and returned in sample order.
    fn evaluate(
        &mut self,
        x_r: &RobotState,
        beliefs: &[AgentBelief],
        samples: &[ControlSequence],
    ) -> Result<Vec<f64>, PlannerError> {
        let (env, cfg, mean, precision) = (&self.env, &self.config, &self.mean, &self.precision);
        let results: Vec<Result<f64, PlannerError>> = match cfg.kind {
            PlannerKind::Ecut => {
                let initial = initial_sets(beliefs, cfg.ut_params())?;
                let free = rollout::FreePrediction::new(&initial, env, cfg)?;
                samples
                    .par_iter()
                    .map(|u| rollout::rollout_cost(x_r, &initial, free.as_ref(), mean, u, env, cfg, precision))
                    .collect()
            }
            PlannerKind::McBaseline => {
                let iteration_seed = self.rng.next_u64();
                let world = crate::mc::McWorld::new(beliefs, env, cfg)?;
                match cfg.replica_noise {
                    ReplicaNoise::PerSample => samples
                        .par_iter()
                        .enumerate()
                        .map(|(m, u)| {
                            let mut rng = crate::mc::sample_stream(iteration_seed, m as u64);
                            world.rollout_cost(x_r, mean, u, precision, &mut rng)
                        })
                        .collect(),
                    ReplicaNoise::Shared => {
                        let shared = world.shared(&mut crate::mc::shared_stream(iteration_seed))?;
                        samples
                            .par_iter()
                            .map(|u| world.rollout_cost_shared(x_r, mean, u, precision, &shared))
                            .collect()
                    }
                }
            }
        };
        results
            .into_iter()
            .enumerate()
            .map(|(m, r)| match r {
                Ok(c) if c.is_finite() => Ok(c),
                Ok(_) => Err(PlannerError::NonFiniteCost { sample: m }),
                Err(e) => Err(e.in_sample(m)),
            })
            .collect()
    }

    /// One MPPI iteration: returns `v⁺` without changing the stored mean.
    pub fn optimize(
        &mut self,
        x_r: &RobotState,
        beliefs: &[AgentBelief],
    ) -> Result<(ControlSequence, IterationDiagnostics), PlannerError> {
        let start = Instant::now();
        check_inputs(beliefs, &self.mean, &self.mean, &self.env, &self.config)?;
        let samples = self.draw_samples();
        let costs = self.evaluate(x_r, beliefs, &samples)?;
        let weights = mppi_weights(&costs, self.config.temperature);
        let mut v = mppi::update_or_best(&weights, &costs, &samples);
        if let Some(b) = &self.config.control_bounds {
            v.0.iter_mut().for_each(|u| *u = b.clamp(u));
        }
        let diagnostics = IterationDiagnostics {
            beta: costs.iter().copied().fold(f64::INFINITY, f64::min),
            effective_sample_size: effective_sample_size(&weights),
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((v, diagnostics))
    }

    /// Runs one iteration, stores the shifted solution as the next mean and
    /// returns the control to apply now.
    pub fn step(
        &mut self,
        x_r: &RobotState,
        beliefs: &[AgentBelief],
    ) -> Result<(Vec2, IterationDiagnostics), PlannerError> {
        let (v, diag) = self.optimize(x_r, beliefs)?;
        let applied = v.first();
        self.mean = v.shifted();
        Ok((applied, diag))
    }
}

/// Free-function form of [`MppiPlanner::step`].
pub fn receding_horizon_step(
    planner: &mut MppiPlanner,
    x_r: &RobotState,
    beliefs: &[AgentBelief],
) -> Result<(Vec2, IterationDiagnostics), PlannerError> {
    planner.step(x_r, beliefs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AgentParams, HybridAgentModel, Obstacle, RobotModel};

    fn env(agents: usize) -> Environment {
        Environment {
            robot_model: RobotModel::SingleIntegrator,
            robot_radius: 0.3,
            goal: Vec2::new(4.0, 0.0),
            obstacles: vec![Obstacle::new(2.0, 1.5, 0.5)],
            agents: vec![HybridAgentModel::attention(AgentParams::default()); agents],
            agent_radius: 0.3,
        }
    }

    fn beliefs() -> Vec<AgentBelief> {
        vec![
            AgentBelief::isotropic(Vec2::new(-1.0, 1.0), 0.0025),
            AgentBelief::isotropic(Vec2::new(0.0, -1.5), 0.0025),
        ]
    }

    #[test]
    fn single_noiseless_sample_applies_the_mean() {
        let cfg = PlannerConfig {
            samples: 1,
            horizon: 5,
            noise_covariance: [[0.0, 0.0], [0.0, 0.0]],
            ..Default::default()
        };
        let mut p = MppiPlanner::new(cfg, env(2)).unwrap();
        let v = ControlSequence((0..5).map(|t| Vec2::new(t as f64, 1.0)).collect());
        p.set_mean_sequence(v.clone()).unwrap();
        let (u, _) = p.step(&RobotState::at(0.0, 0.0), &beliefs()).unwrap();
        assert_eq!(u, v.0[0]);
        assert_eq!(p.mean_sequence(), &v.shifted());
    }

    #[test]
    fn iterations_are_deterministic_for_a_seed() {
        let cfg = PlannerConfig { samples: 64, horizon: 10, seed: 9, ..Default::default() };
        let run = || {
            let mut p = MppiPlanner::new(cfg.clone(), env(2)).unwrap();
            (0..3).map(|_| p.step(&RobotState::at(0.0, 0.0), &beliefs()).unwrap().0).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn moves_toward_goal_in_free_space() {
        let cfg = PlannerConfig { samples: 200, horizon: 20, seed: 1, ..Default::default() };
        let mut p = MppiPlanner::new(cfg, env(0)).unwrap();
        let mut x = RobotState::at(0.0, 0.0);
        for _ in 0..30 {
            let (u, d) = p.step(&x, &[]).unwrap();
            assert!(d.effective_sample_size >= 1.0);
            x = RobotModel::SingleIntegrator.step(&x, &u, 0.05);
        }
        assert!((x.position - Vec2::new(4.0, 0.0)).norm() < 3.0, "{x:?}");
    }

    #[test]
    fn control_bounds_clamp_the_update() {
        let cfg = PlannerConfig {
            samples: 50,
            horizon: 5,
            control_bounds: Some(ControlBounds { lower: [-0.1, -0.1], upper: [0.1, 0.1] }),
            ..Default::default()
        };
        let mut p = MppiPlanner::new(cfg, env(0)).unwrap();
        let (v, _) = p.optimize(&RobotState::at(0.0, 0.0), &[]).unwrap();
        assert!(v.0.iter().all(|u| u.amax() <= 0.1));
    }

    #[test]
    fn belief_count_must_match() {
        let mut p = MppiPlanner::new(PlannerConfig { samples: 2, horizon: 2, ..Default::default() }, env(2)).unwrap();
        assert!(matches!(p.step(&RobotState::at(0.0, 0.0), &[]), Err(PlannerError::Config(_))));
    }
}
