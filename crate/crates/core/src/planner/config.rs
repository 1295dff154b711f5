use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::dynamics::{HybridAgentModel, Obstacle, RobotModel, Vec2};
use crate::sigma::{psd_cholesky, UtParams};

/// How agent modes are decided along a predicted trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchingPolicy {
    /// Each sigma point (or Monte-Carlo replica) picks its own mode.
    #[default]
    PerSigmaPoint,
    /// One mode per agent, chosen from the predicted mean.
    MeanBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Awareness {
    /// Predict with the full hybrid agent model.
    #[default]
    Aware,
    /// Predict as if agents never attend to the robot.
    Unaware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Sigma-point prediction with expansion-compression.
    #[default]
    Ecut,
    /// `mc_replicas` random agent rollouts per control sample.
    McBaseline,
}

/// Where the Monte-Carlo baseline's replica noise comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicaNoise {
    /// Every control sample draws its own replicas.
    #[default]
    PerSample,
    /// All control samples of an iteration reuse the same `K` noise
    /// sequences; replicas still react to each sample's robot trajectory.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl ControlBounds {
    pub fn clamp(&self, u: &Vec2) -> Vec2 {
        Vec2::new(
            u[0].clamp(self.lower[0], self.upper[0]),
            u[1].clamp(self.lower[1], self.upper[1]),
        )
    }
}

/// MPPI and risk hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    /// Replicas per control sample for the Monte-Carlo baseline.
    pub mc_replicas: usize,
    pub replica_noise: ReplicaNoise,
    pub horizon: usize,
    pub samples: usize,
    /// Set from the episode time step when loaded from a scenario.
    #[serde(skip)]
    pub dt: f64,
    /// Control perturbation covariance Σ_ε.
    pub noise_covariance: [[f64; 2]; 2],
    /// Softmax temperature λ.
    pub temperature: f64,
    /// Weight γ of the control term `γ vᵀ Σ_ε⁻¹ u`; `None` means `0.1 λ`.
    pub control_cost_blend: Option<f64>,
    /// γ₁
    pub goal_gain: f64,
    /// γ₂
    pub agent_risk_gain: f64,
    /// γ₃
    pub obstacle_risk_gain: f64,
    /// Confidence multiplier α in `μ - α σ`.
    pub risk_alpha: f64,
    pub safety_margin: f64,
    /// Smallest denominator of the barrier terms.
    pub barrier_floor: f64,
    pub switching: SwitchingPolicy,
    pub awareness: Awareness,
    pub ut_kappa: Option<f64>,
    pub control_bounds: Option<ControlBounds>,
    /// Seed of the perturbation stream; episodes set it from their own seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::Ecut,
            mc_replicas: 20,
            replica_noise: ReplicaNoise::PerSample,
            horizon: 40,
            samples: 500,
            dt: 0.05,
            noise_covariance: [[4.0, 0.0], [0.0, 4.0]],
            temperature: 1.0,
            control_cost_blend: None,
            goal_gain: 1.0,
            agent_risk_gain: 1.0,
            obstacle_risk_gain: 1.0,
            risk_alpha: 1.96,
            safety_margin: 0.0,
            barrier_floor: 0.01,
            switching: SwitchingPolicy::PerSigmaPoint,
            awareness: Awareness::Aware,
            ut_kappa: None,
            control_bounds: None,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn noise_matrix(&self) -> Matrix2<f64> {
        let c = self.noise_covariance;
        Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1])
    }

    pub fn gamma(&self) -> f64 {
        self.control_cost_blend.unwrap_or(0.1 * self.temperature)
    }

    pub fn ut_params(&self) -> UtParams {
        UtParams { kappa: self.ut_kappa }
    }

    /// Fills in derived defaults so the configuration echoes completely.
    pub fn resolve(&mut self) {
        if self.control_cost_blend.is_none() {
            self.control_cost_blend = Some(self.gamma());
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |field: &str, why: &str| Err(PlannerError::Config(format!("{field}: {why}")));
        if self.horizon < 1 {
            return bad("horizon", "must be at least 1");
        }
        if self.samples < 1 {
            return bad("samples", "must be at least 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt", "must be positive");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature", "must be positive");
        }
        let g = self.gamma();
        if !(0.0..=self.temperature).contains(&g) {
            return bad("control_cost_blend", "must lie in [0, temperature]");
        }
        for (name, v) in [
            ("goal_gain", self.goal_gain),
            ("agent_risk_gain", self.agent_risk_gain),
            ("obstacle_risk_gain", self.obstacle_risk_gain),
            ("barrier_floor", self.barrier_floor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(name, "must be positive and finite");
            }
        }
        if !(self.risk_alpha >= 0.0) {
            return bad("risk_alpha", "must be non-negative");
        }
        if !self.safety_margin.is_finite() {
            return bad("safety_margin", "must be finite");
        }
        let sigma = self.noise_matrix();
        if (sigma - sigma.transpose()).amax() > 1e-12 || psd_cholesky(&sigma).is_err() {
            return bad("noise_covariance", "must be symmetric positive semi-definite");
        }
        if self.kind == PlannerKind::McBaseline && self.mc_replicas < 2 {
            return bad("mc_replicas", "must be at least 2 for a standard deviation");
        }
        if let Some(b) = &self.control_bounds {
            if b.lower.iter().zip(&b.upper).any(|(l, u)| !(l <= u)) {
                return bad("control_bounds", "lower must not exceed upper");
            }
        }
        if let Some(k) = self.ut_kappa {
            if !(2.0 + k > 0.0) {
                return bad("ut_kappa", "n + kappa must be positive");
            }
        }
        Ok(())
    }
}

/// Everything about the world that stays fixed while planning.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub robot_model: RobotModel,
    pub robot_radius: f64,
    pub goal: Vec2,
    pub obstacles: Vec<Obstacle>,
    /// One model per agent.
    pub agents: Vec<HybridAgentModel>,
    pub agent_radius: f64,
}

impl Environment {
    pub fn radii(&self) -> f64 {
        self.robot_radius + self.agent_radius
    }
}

/// A sequence of `H` controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence(pub Vec<Vec2>);

impl ControlSequence {
    pub fn zeros(horizon: usize) -> Self {
        Self(vec![Vec2::zeros(); horizon])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Vec2 {
        self.0.first().copied().unwrap_or_else(Vec2::zeros)
    }

    /// Drops the first control and repeats the last one.
    pub fn shifted(&self) -> Self {
        let mut v: Vec<Vec2> = self.0.iter().skip(1).copied().collect();
        if let Some(last) = self.0.last() {
            v.push(*last);
        }
        Self(v)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|u| u.iter().all(|c| c.is_finite()))
    }
}

impl std::ops::Add<&ControlSequence> for &ControlSequence {
    type Output = ControlSequence;

    fn add(self, rhs: &ControlSequence) -> ControlSequence {
        ControlSequence(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}
