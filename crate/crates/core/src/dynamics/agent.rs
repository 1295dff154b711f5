//! Agents as stochastic hybrid systems.
//!
//! An agent's dynamics switch between modes according to activation regions
//! over the joint (agent, robot) state. The shipped two-mode model switches on
//! an attention radius: outside it the agent ignores the robot, inside it the
//! robot becomes a repulsion source in the agent's potential field.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Disturbance, Obstacle, PotentialField, Vec2};
use crate::sigma::{GaussianMoments, SigmaError};

/// Agent state: planar position.
pub type AgentState = Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId(pub usize);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("mode partition violated: {active} modes active at agent {agent:?}, robot {robot:?}")]
    PartitionViolation {
        active: usize,
        agent: [f64; 2],
        robot: [f64; 2],
    },
    #[error("unknown mode {0:?}")]
    UnknownMode(ModeId),
    #[error("model has no robot-unaware mode")]
    NoUnawareMode,
    #[error(transparent)]
    Sigma(#[from] SigmaError),
}

/// One activation predicate `g(x_p, x_r)`; a mode is active when all of its
/// predicates hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `‖x_p - x_r‖ ≤ r`
    WithinRadius(f64),
    /// `‖x_p - x_r‖ > r`
    BeyondRadius(f64),
}

impl Activation {
    /// Value of `g`; non-positive inside the region (the boundary of
    /// `BeyondRadius` is excluded by [`Activation::holds`]).
    pub fn value(&self, x_p: &Vec2, x_r: &Vec2) -> f64 {
        let d = (x_p - x_r).norm();
        match *self {
            Activation::WithinRadius(r) => d - r,
            Activation::BeyondRadius(r) => r - d,
        }
    }

    #[inline]
    pub fn holds(&self, x_p: &Vec2, x_r: &Vec2) -> bool {
        let d2 = (x_p - x_r).norm_squared();
        match *self {
            Activation::WithinRadius(r) => d2 <= r * r,
            Activation::BeyondRadius(r) => d2 > r * r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub id: ModeId,
    pub name: String,
    pub activations: Vec<Activation>,
    /// Whether the robot acts as a repulsion source in this mode.
    pub robot_aware: bool,
}

impl ModeSpec {
    #[inline]
    pub fn is_active(&self, x_p: &Vec2, x_r: &Vec2) -> bool {
        self.activations.iter().all(|g| g.holds(x_p, x_r))
    }
}

/// How the per-step velocity noise enters the position covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// Zero-order-hold velocity noise: position covariance `σ² dt²`.
    #[default]
    Step,
    /// Diffusion scaling: position covariance `σ² dt`.
    SqrtStep,
}

impl NoiseScaling {
    pub fn factor(&self, dt: f64) -> f64 {
        match self {
            NoiseScaling::Step => dt * dt,
            NoiseScaling::SqrtStep => dt,
        }
    }
}

/// Parameters of the two-mode attention model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    pub sensing_radius: f64,
    pub nominal_velocity: [f64; 2],
    pub disturbance: Disturbance,
    #[serde(default)]
    pub potential_field: PotentialField,
    #[serde(default)]
    pub noise_scaling: NoiseScaling,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            sensing_radius: 2.0,
            nominal_velocity: [3.0, 0.0],
            disturbance: Disturbance {
                alpha: 4.0 / 0.05,
                beta: 1.0,
            },
            potential_field: PotentialField::default(),
            noise_scaling: NoiseScaling::Step,
        }
    }
}

/// Where everything else is while one agent takes a step.
#[derive(Debug, Clone, Copy)]
pub struct AgentContext<'a> {
    pub robot: Vec2,
    /// Positions of all agents; the entry at `self_index` is skipped.
    pub agents: &'a [Vec2],
    pub self_index: Option<usize>,
    pub obstacles: &'a [Obstacle],
}

impl<'a> AgentContext<'a> {
    pub fn new(robot: Vec2, obstacles: &'a [Obstacle]) -> Self {
        Self {
            robot,
            agents: &[],
            self_index: None,
            obstacles,
        }
    }

    pub fn with_agents(mut self, agents: &'a [Vec2], self_index: usize) -> Self {
        self.agents = agents;
        self.self_index = Some(self_index);
        self
    }

    /// Other agents' positions, none of which is the stepping agent.
    pub fn with_others(mut self, agents: &'a [Vec2]) -> Self {
        self.agents = agents;
        self.self_index = None;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridAgentModel {
    pub modes: Vec<ModeSpec>,
    pub params: AgentParams,
}

impl HybridAgentModel {
    pub const UNCOOPERATIVE: ModeId = ModeId(0);
    pub const COOPERATIVE: ModeId = ModeId(1);

    /// Uncooperative beyond the sensing radius, cooperative within it.
    /// The boundary belongs to the cooperative mode.
    pub fn attention(params: AgentParams) -> Self {
        let ds = params.sensing_radius;
        Self {
            modes: vec![
                ModeSpec {
                    id: Self::UNCOOPERATIVE,
                    name: "uncooperative".into(),
                    activations: vec![Activation::BeyondRadius(ds)],
                    robot_aware: false,
                },
                ModeSpec {
                    id: Self::COOPERATIVE,
                    name: "cooperative".into(),
                    activations: vec![Activation::WithinRadius(ds)],
                    robot_aware: true,
                },
            ],
            params,
        }
    }

    pub fn nominal_velocity(&self) -> Vec2 {
        Vec2::new(self.params.nominal_velocity[0], self.params.nominal_velocity[1])
    }

    pub fn mode(&self, id: ModeId) -> Result<&ModeSpec, DynamicsError> {
        self.modes
            .iter()
            .find(|m| m.id == id)
            .ok_or(DynamicsError::UnknownMode(id))
    }

    /// The unique mode whose activation region contains `(x_p, x_r)`.
    pub fn active_mode(&self, x_p: &Vec2, x_r: &Vec2) -> Result<ModeId, DynamicsError> {
        let mut found = None;
        let mut count = 0;
        for m in &self.modes {
            if m.is_active(x_p, x_r) {
                found = Some(m.id);
                count += 1;
            }
        }
        match (count, found) {
            (1, Some(id)) => Ok(id),
            _ => Err(DynamicsError::PartitionViolation {
                active: count,
                agent: [x_p[0], x_p[1]],
                robot: [x_r[0], x_r[1]],
            }),
        }
    }

    /// The mode that ignores the robot, used by robot-unaware prediction.
    pub fn unaware_mode(&self) -> Result<ModeId, DynamicsError> {
        self.modes
            .iter()
            .find(|m| !m.robot_aware)
            .map(|m| m.id)
            .ok_or(DynamicsError::NoUnawareMode)
    }

    /// Deterministic drift `u_nom + PF` in the given mode.
    pub fn drift(&self, mode: &ModeSpec, x_p: &Vec2, ctx: &AgentContext<'_>) -> Vec2 {
        self.nominal_velocity() + self.field(mode, x_p, ctx)
    }

    #[inline]
    fn field(&self, mode: &ModeSpec, x_p: &Vec2, ctx: &AgentContext<'_>) -> Vec2 {
        let robot = mode.robot_aware.then_some(&ctx.robot);
        self.params
            .potential_field
            .velocity_skipping(x_p, robot, ctx.agents, ctx.self_index, ctx.obstacles)
    }

    #[inline]
    fn step_variance(&self, u: &Vec2, dt: f64) -> f64 {
        self.params.disturbance.variance(u.norm()) * self.params.noise_scaling.factor(dt)
    }

    /// Step variance when no potential-field source is in reach.
    #[inline]
    pub(crate) fn nominal_step_variance(&self, dt: f64) -> f64 {
        self.step_variance(&self.nominal_velocity(), dt)
    }

    #[inline]
    fn moments_with(&self, mode: &ModeSpec, x_p: &Vec2, ctx: &AgentContext<'_>, dt: f64, nominal_var: f64) -> GaussianMoments<2> {
        let pf = self.field(mode, x_p, ctx);
        let u = self.nominal_velocity() + pf;
        let var = if pf == Vec2::zeros() { nominal_var } else { self.step_variance(&u, dt) };
        GaussianMoments {
            mean: x_p + u * dt,
            covariance: Matrix2::identity() * var,
        }
    }

    fn moments_for(&self, mode: &ModeSpec, x_p: &Vec2, ctx: &AgentContext<'_>, dt: f64) -> GaussianMoments<2> {
        self.moments_with(mode, x_p, ctx, dt, self.nominal_step_variance(dt))
    }

    /// Moments of the next position when `mode` governs one step of length `dt`.
    pub fn conditional_moments(
        &self,
        mode: ModeId,
        x_p: &Vec2,
        ctx: &AgentContext<'_>,
        dt: f64,
    ) -> Result<GaussianMoments<2>, DynamicsError> {
        Ok(self.moments_for(self.mode(mode)?, x_p, ctx, dt))
    }

    /// Like [`Self::conditional_moments`] but takes a mode index into `modes`
    /// and the precomputed [`Self::nominal_step_variance`].
    #[inline]
    pub(crate) fn moments_by_index(
        &self,
        index: usize,
        x_p: &Vec2,
        ctx: &AgentContext<'_>,
        dt: f64,
        nominal_var: f64,
    ) -> GaussianMoments<2> {
        self.moments_with(&self.modes[index], x_p, ctx, dt, nominal_var)
    }

    /// Index into `modes` of the active mode.
    #[inline]
    pub(crate) fn active_index(&self, x_p: &Vec2, x_r: &Vec2) -> Result<usize, DynamicsError> {
        let id = self.active_mode(x_p, x_r)?;
        Ok(self.modes.iter().position(|m| m.id == id).unwrap_or(0))
    }

    pub(crate) fn index_of(&self, id: ModeId) -> Result<usize, DynamicsError> {
        self.modes
            .iter()
            .position(|m| m.id == id)
            .ok_or(DynamicsError::UnknownMode(id))
    }

    /// One sampled step using the mode active at `(x_p, robot)`.
    /// `z` is a standard normal draw.
    pub fn sample_step(&self, x_p: &Vec2, ctx: &AgentContext<'_>, dt: f64, z: &Vec2) -> Result<Vec2, DynamicsError> {
        let mode = self.active_index(x_p, &ctx.robot)?;
        Ok(self.sample_step_by_index(mode, x_p, ctx, dt, self.nominal_step_variance(dt), z))
    }

    #[inline]
    pub(crate) fn sample_step_by_index(
        &self,
        index: usize,
        x_p: &Vec2,
        ctx: &AgentContext<'_>,
        dt: f64,
        nominal_var: f64,
        z: &Vec2,
    ) -> Vec2 {
        let m = self.moments_by_index(index, x_p, ctx, dt, nominal_var);
        // covariance is isotropic by construction
        m.mean + z * m.covariance[(0, 0)].max(0.0).sqrt()
    }
}

/// Free-function form of [`HybridAgentModel::active_mode`].
pub fn active_mode(model: &HybridAgentModel, x_p: &Vec2, x_r: &Vec2) -> Result<ModeId, DynamicsError> {
    model.active_mode(x_p, x_r)
}

/// Free-function form of [`HybridAgentModel::conditional_moments`].
pub fn agent_conditional_moments(
    model: &HybridAgentModel,
    mode: ModeId,
    x_p: &Vec2,
    ctx: &AgentContext<'_>,
    dt: f64,
) -> Result<GaussianMoments<2>, DynamicsError> {
    model.conditional_moments(mode, x_p, ctx, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn model(ds: f64) -> HybridAgentModel {
        HybridAgentModel::attention(AgentParams {
            sensing_radius: ds,
            ..AgentParams::default()
        })
    }

    #[test]
    fn mode_by_distance() {
        let m = model(2.0);
        let r = Vec2::zeros();
        assert_eq!(m.active_mode(&Vec2::new(3.0, 0.0), &r).unwrap(), HybridAgentModel::UNCOOPERATIVE);
        assert_eq!(m.active_mode(&Vec2::new(1.0, 0.0), &r).unwrap(), HybridAgentModel::COOPERATIVE);
        assert_eq!(m.active_mode(&Vec2::new(0.0, 2.0), &r).unwrap(), HybridAgentModel::COOPERATIVE);
    }

    #[test]
    fn partition_holds_on_random_pairs() {
        let m = model(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let p = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            let r = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            let active = m.modes.iter().filter(|s| s.is_active(&p, &r)).count();
            assert_eq!(active, 1);
            let a = m.active_mode(&p, &r).unwrap();
            assert_eq!(a, m.active_mode(&p, &r).unwrap());
        }
    }

    #[test]
    fn overlapping_modes_are_rejected() {
        let mut m = model(2.0);
        m.modes[0].activations = vec![Activation::BeyondRadius(1.0)];
        let err = m.active_mode(&Vec2::new(1.5, 0.0), &Vec2::zeros()).unwrap_err();
        assert!(matches!(err, DynamicsError::PartitionViolation { active: 2, .. }));
        m.modes[0].activations = vec![Activation::BeyondRadius(3.0)];
        let err = m.active_mode(&Vec2::new(2.5, 0.0), &Vec2::zeros()).unwrap_err();
        assert!(matches!(err, DynamicsError::PartitionViolation { active: 0, .. }));
    }

    #[test]
    fn activation_values() {
        let p = Vec2::new(3.0, 4.0);
        assert_eq!(Activation::WithinRadius(2.0).value(&p, &Vec2::zeros()), 3.0);
        assert_eq!(Activation::BeyondRadius(2.0).value(&p, &Vec2::zeros()), -3.0);
    }

    #[test]
    fn uncooperative_drift_is_nominal_in_free_space() {
        let m = model(2.0);
        let x = Vec2::new(1.0, 1.0);
        let ctx = AgentContext::new(Vec2::new(1.5, 1.0), &[]);
        let g = m.conditional_moments(HybridAgentModel::UNCOOPERATIVE, &x, &ctx, 0.05).unwrap();
        assert_relative_eq!(g.mean[0], 1.15, epsilon = 1e-14);
        assert_relative_eq!(g.mean[1], 1.0, epsilon = 1e-14);
        let var = 80.0 * (1.0f64 / 3.0).tanh() * 0.05 * 0.05;
        assert_relative_eq!(g.covariance[(0, 0)], var, epsilon = 1e-14);
        assert_eq!(g.covariance[(0, 1)], 0.0);
    }

    #[test]
    fn modes_agree_beyond_field_cutoff() {
        let m = model(5.0);
        let x = Vec2::zeros();
        let ctx = AgentContext::new(Vec2::new(0.0, 2.5), &[]);
        let a = m.conditional_moments(HybridAgentModel::UNCOOPERATIVE, &x, &ctx, 0.05).unwrap();
        let b = m.conditional_moments(HybridAgentModel::COOPERATIVE, &x, &ctx, 0.05).unwrap();
        assert_eq!(a, b);
        let near = AgentContext::new(Vec2::new(0.0, 1.0), &[]);
        let c = m.conditional_moments(HybridAgentModel::COOPERATIVE, &x, &near, 0.05).unwrap();
        assert!(c.mean[1] < 0.0);
    }

    #[test]
    fn other_agents_repel_but_self_is_skipped() {
        let m = model(2.0);
        let agents = [Vec2::zeros(), Vec2::new(0.0, 0.5)];
        let ctx = AgentContext::new(Vec2::new(50.0, 0.0), &[]).with_agents(&agents, 0);
        let g = m.conditional_moments(HybridAgentModel::UNCOOPERATIVE, &agents[0], &ctx, 0.05).unwrap();
        assert!(g.mean[1] < 0.0);
        assert!(g.mean[0].is_finite());
    }

    #[test]
    fn noise_scaling_policies() {
        assert_eq!(NoiseScaling::Step.factor(0.1), 0.1 * 0.1);
        assert_eq!(NoiseScaling::SqrtStep.factor(0.1), 0.1);
    }

    #[test]
    fn unknown_mode_is_an_error() {
        let m = model(2.0);
        let ctx = AgentContext::new(Vec2::zeros(), &[]);
        assert!(matches!(
            m.conditional_moments(ModeId(9), &Vec2::zeros(), &ctx, 0.05),
            Err(DynamicsError::UnknownMode(_))
        ));
    }

    #[test]
    fn sampled_step_matches_moments() {
        // Monte Carlo estimate of one step with an obstacle and the robot in range.
        let m = model(2.0);
        let obstacles = [Obstacle::new(1.0, 1.2, 0.5)];
        let x = Vec2::new(0.0, 0.0);
        let ctx = AgentContext::new(Vec2::new(0.5, -0.8), &obstacles);
        let mode = m.active_mode(&x, &ctx.robot).unwrap();
        assert_eq!(mode, HybridAgentModel::COOPERATIVE);
        let g = m.conditional_moments(mode, &x, &ctx, 0.05).unwrap();

        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut s1, mut s2) = (Vec2::zeros(), Vec2::zeros());
        for _ in 0..n {
            let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let y = m.sample_step(&x, &ctx, 0.05, &z).unwrap() - g.mean;
            s1 += y;
            s2 += y.component_mul(&y);
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean.component_mul(&mean);
        let se = (g.covariance[(0, 0)] / n as f64).sqrt();
        assert!(mean.norm() < 4.0 * se, "{mean:?} vs se {se}");
        for k in 0..2 {
            assert_relative_eq!(var[k], g.covariance[(k, k)], max_relative = 0.01);
        }
    }
}
