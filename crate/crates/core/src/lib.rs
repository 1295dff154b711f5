//! Risk-aware model predictive path integral control for a robot moving among
//! agents whose dynamics switch with their attention to the robot.
//!
//! Agent futures are predicted with sigma points that are expanded through
//! each point's own mode and compressed back by moment matching, so mode
//! switching inherits the spread of the prediction.
//!
//! - [`sigma`]: unscented points, expansion and compression.
//! - [`dynamics`]: robot models, the two-mode agent model and clearances.
//! - [`planner`]: the MPPI controller with the confidence-bound risk cost.
//! - [`mc`]: the Monte-Carlo prediction baseline.
//! - [`sim`]: scenarios, closed-loop episodes, aggregation and outputs.
//! - [`cli`]: the `ecut-mppi` command.

pub mod cli;
pub mod dynamics;
pub mod mc;
pub mod planner;
pub mod sigma;
pub mod sim;
