use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::{Obstacle, Vec2};

/// Repulsive potential field used by agents for collision avoidance.
///
/// Each source closer than `cutoff` pushes with `gain (1/d - 1/d₀) / d²` along
/// the direction from the source to the agent; the summed velocity is clipped
/// to `max_speed`. Obstacle distance is measured to the obstacle surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialField {
    pub gain: f64,
    pub cutoff: f64,
    pub max_speed: f64,
    pub min_distance: f64,
}

impl Default for PotentialField {
    fn default() -> Self {
        Self {
            gain: 0.5,
            cutoff: 2.0,
            max_speed: 2.0,
            min_distance: 1e-6,
        }
    }
}

impl PotentialField {
    #[inline]
    fn push(&self, offset: Vec2, distance: f64) -> Vec2 {
        if distance >= self.cutoff {
            return Vec2::zeros();
        }
        let n = offset.norm();
        if n == 0.0 {
            return Vec2::zeros();
        }
        let d = distance.max(self.min_distance);
        offset * (self.gain * (1.0 / d - 1.0 / self.cutoff) / (d * d) / n)
    }

    /// Whether a point source at `offset` from the agent contributes.
    #[inline]
    pub fn reaches(&self, offset: &Vec2) -> bool {
        offset.norm_squared() < self.cutoff * self.cutoff
    }

    #[inline]
    fn push_point(&self, offset: Vec2) -> Vec2 {
        if !self.reaches(&offset) {
            return Vec2::zeros();
        }
        let n = offset.norm();
        self.push(offset, n)
    }

    /// Avoidance velocity of an agent at `x_p`.
    ///
    /// `robot` is a source only when the agent is attending to it.
    pub fn velocity<'a>(
        &self,
        x_p: &Vec2,
        robot: Option<&Vec2>,
        others: impl IntoIterator<Item = &'a Vec2>,
        obstacles: &[Obstacle],
    ) -> Vec2 {
        let mut v = Vec2::zeros();
        if let Some(r) = robot {
            v += self.push_point(x_p - r);
        }
        for o in others {
            v += self.push_point(x_p - o);
        }
        self.finish(x_p, v, obstacles)
    }

    /// [`Self::velocity`] with the other agents given as a slice whose entry
    /// `skip` is ignored.
    #[inline]
    pub(crate) fn velocity_skipping(
        &self,
        x_p: &Vec2,
        robot: Option<&Vec2>,
        agents: &[Vec2],
        skip: Option<usize>,
        obstacles: &[Obstacle],
    ) -> Vec2 {
        let mut v = Vec2::zeros();
        if let Some(r) = robot {
            v += self.push_point(x_p - r);
        }
        let reach2 = self.cutoff * self.cutoff;
        for (j, o) in agents.iter().enumerate() {
            let off = x_p - o;
            if off.norm_squared() < reach2 && Some(j) != skip {
                v += self.push(off, off.norm());
            }
        }
        self.finish(x_p, v, obstacles)
    }

    #[inline]
    fn finish(&self, x_p: &Vec2, mut v: Vec2, obstacles: &[Obstacle]) -> Vec2 {
        for ob in obstacles {
            let off = x_p - ob.center();
            let reach = self.cutoff + ob.radius;
            if off.norm_squared() < reach * reach {
                v += self.push(off, off.norm() - ob.radius);
            }
        }
        let speed = v.norm();
        if speed > self.max_speed {
            v *= self.max_speed / speed;
        }
        v
    }
}

/// Velocity-dependent disturbance `N(0, α tanh(β / ‖v‖) I)`.
///
/// Agents change direction more readily when slow, so the variance falls
/// with speed. At rest the variance is `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub alpha: f64,
    pub beta: f64,
}

impl Disturbance {
    pub fn variance(&self, speed: f64) -> f64 {
        if speed == 0.0 {
            self.alpha
        } else {
            self.alpha * (self.beta / speed).tanh()
        }
    }

    pub fn covariance(&self, velocity: &Vec2) -> Matrix2<f64> {
        Matrix2::identity() * self.variance(velocity.norm())
    }
}

pub fn disturbance_covariance(velocity: &Vec2, alpha: f64, beta: f64) -> Matrix2<f64> {
    Disturbance { alpha, beta }.covariance(velocity)
}
