use serde::{Deserialize, Serialize};

use super::{RobotState, Vec2};

/// Static circular obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        Self {
            center: [x, y],
            radius,
        }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.center[0], self.center[1])
    }
}

/// Signed clearance between robot and agent bodies; positive means separated.
/// `radii` is the sum of both body radii.
#[inline]
pub fn distance_to_agent(x_r: &RobotState, x_p: &Vec2, radii: f64) -> f64 {
    (x_r.position - x_p).norm() - radii
}

/// Signed clearance between the robot body and an obstacle surface.
#[inline]
pub fn distance_to_obstacle(x_r: &RobotState, o: &Obstacle, robot_radius: f64) -> f64 {
    (x_r.position - o.center()).norm() - (o.radius + robot_radius)
}

/// Smallest clearance to any obstacle, `None` without obstacles.
pub fn min_obstacle_distance(x_r: &RobotState, obstacles: &[Obstacle], robot_radius: f64) -> Option<f64> {
    obstacles
        .iter()
        .map(|o| distance_to_obstacle(x_r, o, robot_radius))
        .reduce(f64::min)
}
