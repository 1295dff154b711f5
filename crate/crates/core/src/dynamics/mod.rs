//! Robot motion models, agent hybrid dynamics and safety distances.

mod agent;
mod field;
mod geometry;
mod robot;

pub use agent::{
    active_mode, agent_conditional_moments, Activation, AgentContext, AgentParams, AgentState,
    DynamicsError, HybridAgentModel, ModeId, ModeSpec, NoiseScaling,
};
pub use field::{disturbance_covariance, Disturbance, PotentialField};
pub use geometry::{distance_to_agent, distance_to_obstacle, min_obstacle_distance, Obstacle};
pub use robot::{
    normalize_angle, single_integrator_step, unicycle_step, ControlInput, RobotModel, RobotState,
};

pub type Vec2 = nalgebra::Vector2<f64>;
