use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::Vec2;

/// Robot pose. The heading is ignored by the single integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Vec2,
    pub heading: f64,
}

impl RobotState {
    pub fn at(x: f64, y: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading: 0.0,
        }
    }

    pub fn with_heading(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.heading.is_finite()
    }
}

/// Velocity command `(u₁, u₂)`: planar velocity for the single integrator,
/// linear and angular velocity for the unicycle.
pub type ControlInput = Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotModel {
    SingleIntegrator,
    Unicycle,
}

impl RobotModel {
    pub fn step(&self, x: &RobotState, u: &ControlInput, dt: f64) -> RobotState {
        match self {
            RobotModel::SingleIntegrator => single_integrator_step(x, u, dt),
            RobotModel::Unicycle => unicycle_step(x, u, dt),
        }
    }

    pub fn has_heading(&self) -> bool {
        matches!(self, RobotModel::Unicycle)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Euler step of `ṙ = u`.
pub fn single_integrator_step(x: &RobotState, u: &ControlInput, dt: f64) -> RobotState {
    RobotState {
        position: x.position + u * dt,
        heading: x.heading,
    }
}

/// Euler step of `ṙx = u₁ cos θ, ṙy = u₁ sin θ, θ̇ = u₂`.
pub fn unicycle_step(x: &RobotState, u: &ControlInput, dt: f64) -> RobotState {
    let (s, c) = x.heading.sin_cos();
    RobotState {
        position: x.position + Vec2::new(c, s) * (u[0] * dt),
        heading: normalize_angle(x.heading + u[1] * dt),
    }
}
