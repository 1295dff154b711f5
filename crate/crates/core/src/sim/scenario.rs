use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::dynamics::{AgentParams, HybridAgentModel, Obstacle, RobotModel, RobotState, Vec2};
use crate::planner::{AgentBelief, Awareness, Environment, PlannerConfig, PlannerKind, SwitchingPolicy};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSection {
    pub model: RobotModel,
    pub start: [f64; 2],
    #[serde(default)]
    pub heading: f64,
    pub goal: [f64; 2],
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
}

/// How the true agents move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// Sample the disturbance at every step.
    #[default]
    Sampled,
    /// Follow the conditional mean; no disturbance.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Standard deviation of the planner's belief about each agent position.
    #[serde(default = "default_belief_std")]
    pub belief_std: f64,
    #[serde(default)]
    pub ground_truth: GroundTruth,
    #[serde(default)]
    pub positions: Vec<[f64; 2]>,
    #[serde(default)]
    pub model: AgentParams,
}

impl Default for AgentsSection {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            belief_std: default_belief_std(),
            ground_truth: GroundTruth::Sampled,
            positions: Vec::new(),
            model: AgentParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSection {
    pub steps: usize,
    pub dt: f64,
}

/// A navigation problem and the planner that solves it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub robot: RobotSection,
    #[serde(default)]
    pub agents: AgentsSection,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub episode: EpisodeSection,
    #[serde(default)]
    pub planner: PlannerConfig,
}

fn default_radius() -> f64 {
    0.3
}

fn default_goal_tolerance() -> f64 {
    0.3
}

fn default_belief_std() -> f64 {
    0.05
}

/// The shipped crossing scenario.
pub fn builtin_scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/scenario_sec5a.toml")
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn finite(field: &str, v: &[f64]) -> Result<(), SimError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<(), SimError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be positive and finite"))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), SimError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be non-negative and finite"))
    }
}

impl Scenario {
    /// Reads, validates and resolves a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            SimError::Parse(m) => SimError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        s.resolve();
        s.validate()?;
        Ok(s)
    }

    /// Copies derived values into place so that the echo is complete.
    pub fn resolve(&mut self) {
        self.planner.dt = self.episode.dt;
        self.planner.resolve();
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let r = &self.robot;
        finite("robot.start", &r.start)?;
        finite("robot.goal", &r.goal)?;
        finite("robot.heading", &[r.heading])?;
        non_negative("robot.radius", r.radius)?;
        positive("robot.goal_tolerance", r.goal_tolerance)?;

        let a = &self.agents;
        non_negative("agents.radius", a.radius)?;
        non_negative("agents.belief_std", a.belief_std)?;
        for (i, p) in a.positions.iter().enumerate() {
            finite(&format!("agents.positions[{i}]"), p)?;
            if *p == r.start {
                return Err(invalid(
                    format!("agents.positions[{i}]"),
                    "coincides with the robot start",
                ));
            }
        }
        let m = &a.model;
        positive("agents.model.sensing_radius", m.sensing_radius)?;
        finite("agents.model.nominal_velocity", &m.nominal_velocity)?;
        non_negative("agents.model.disturbance.alpha", m.disturbance.alpha)?;
        positive("agents.model.disturbance.beta", m.disturbance.beta)?;
        let pf = &m.potential_field;
        non_negative("agents.model.potential_field.gain", pf.gain)?;
        positive("agents.model.potential_field.cutoff", pf.cutoff)?;
        non_negative("agents.model.potential_field.max_speed", pf.max_speed)?;
        positive("agents.model.potential_field.min_distance", pf.min_distance)?;

        for (i, o) in self.obstacles.iter().enumerate() {
            finite(&format!("obstacles[{i}].center"), &o.center)?;
            positive(&format!("obstacles[{i}].radius"), o.radius)?;
        }

        if self.episode.steps < 1 {
            return Err(invalid("episode.steps", "must be at least 1"));
        }
        positive("episode.dt", self.episode.dt)?;
        let mut planner = self.planner.clone();
        planner.dt = self.episode.dt;
        planner.validate().map_err(|e| {
            let msg = e.to_string();
            let detail = msg.strip_prefix("invalid planner configuration: ").unwrap_or(&msg);
            match detail.split_once(": ") {
                Some((field, why)) => invalid(format!("planner.{field}"), why),
                None => invalid("planner", detail),
            }
        })?;
        Ok(())
    }

    pub fn robot_start(&self) -> RobotState {
        let [x, y] = self.robot.start;
        if self.robot.model.has_heading() {
            RobotState::with_heading(x, y, self.robot.heading)
        } else {
            RobotState::at(x, y)
        }
    }

    pub fn goal(&self) -> Vec2 {
        Vec2::new(self.robot.goal[0], self.robot.goal[1])
    }

    pub fn agent_positions(&self) -> Vec<Vec2> {
        self.agents.positions.iter().map(|p| Vec2::new(p[0], p[1])).collect()
    }

    pub fn agent_model(&self) -> HybridAgentModel {
        HybridAgentModel::attention(self.agents.model)
    }

    pub fn environment(&self) -> Environment {
        Environment {
            robot_model: self.robot.model,
            robot_radius: self.robot.radius,
            goal: self.goal(),
            obstacles: self.obstacles.clone(),
            agents: vec![self.agent_model(); self.agents.positions.len()],
            agent_radius: self.agents.radius,
        }
    }

    /// Beliefs centred on the given positions with the configured spread.
    pub fn beliefs(&self, positions: &[Vec2]) -> Vec<AgentBelief> {
        let var = self.agents.belief_std * self.agents.belief_std;
        positions.iter().map(|p| AgentBelief::isotropic(*p, var)).collect()
    }

    /// Resolved configuration as TOML.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

/// The planner variants compared in the study. Each differs from the
/// scenario file in a single planner field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Aware,
    Unaware,
    MeanBased,
    McBaseline { replicas: usize },
}

impl Variant {
    pub fn standard(replicas: usize) -> [Variant; 4] {
        [
            Variant::Aware,
            Variant::Unaware,
            Variant::MeanBased,
            Variant::McBaseline { replicas },
        ]
    }

    /// The three ECUT variants followed by one Monte-Carlo variant per entry.
    pub fn study(replicas: &[usize]) -> Vec<Variant> {
        let mut v = vec![Variant::Aware, Variant::Unaware, Variant::MeanBased];
        v.extend(replicas.iter().map(|&replicas| Variant::McBaseline { replicas }));
        v
    }

    pub fn label(&self) -> String {
        match self {
            Variant::Aware => "aware".into(),
            Variant::Unaware => "unaware".into(),
            Variant::MeanBased => "mean_based".into(),
            Variant::McBaseline { replicas } => format!("mc_baseline_k{replicas}"),
        }
    }

    /// The scenario with this variant's planner settings. The base scenario's
    /// planner is expected to be the aware ECUT planner.
    pub fn apply(&self, base: &Scenario) -> Scenario {
        let mut s = base.clone();
        let p = &mut s.planner;
        p.kind = PlannerKind::Ecut;
        p.awareness = Awareness::Aware;
        p.switching = SwitchingPolicy::PerSigmaPoint;
        match *self {
            Variant::Aware => {}
            Variant::Unaware => p.awareness = Awareness::Unaware,
            Variant::MeanBased => p.switching = SwitchingPolicy::MeanBased,
            Variant::McBaseline { replicas } => {
                p.kind = PlannerKind::McBaseline;
                p.mc_replicas = replicas;
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[robot]
model = "single_integrator"
start = [0.0, 0.0]
goal = [5.0, 0.0]
[episode]
steps = 10
dt = 0.05
"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert!(s.agents.positions.is_empty());
        assert_eq!(s.robot.goal_tolerance, 0.3);
        assert_eq!(s.agents.belief_std, 0.05);
        assert_eq!(s.planner.horizon, 40);
        assert_eq!(s.planner.dt, 0.05);
        assert_eq!(s.planner.control_cost_blend, Some(0.1));
        assert!(s.environment().agents.is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("dt = 0.05", "dt = 0.05\nfoo = 1");
        assert!(matches!(Scenario::from_toml_str(&text), Err(SimError::Parse(_))));
        let text = format!("{MINIMAL}\n[planner]\nhorizon = 4\nlambda = 2.0\n");
        assert!(matches!(Scenario::from_toml_str(&text), Err(SimError::Parse(_))));
    }

    #[test]
    fn invalid_values_name_their_field() {
        let text = MINIMAL.replace("dt = 0.05", "dt = -0.05");
        let e = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("episode.dt"), "{e}");
        let text = format!("{MINIMAL}\n[planner]\nsamples = 0\n");
        let e = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("planner.samples"), "{e}");
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 7");
        assert!(Scenario::from_toml_str(&text).unwrap_err().to_string().contains("schema_version"));
        let text = format!("{MINIMAL}\n[agents]\npositions = [[0.0, 0.0]]\n");
        assert!(Scenario::from_toml_str(&text).unwrap_err().to_string().contains("agents.positions[0]"));
    }

    #[test]
    fn echo_round_trips() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn variants_change_one_field() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let aware = Variant::Aware.apply(&s);
        assert_eq!(aware, s);
        let u = Variant::Unaware.apply(&s);
        assert_eq!(u.planner.awareness, Awareness::Unaware);
        assert_eq!(PlannerConfig { awareness: Awareness::Aware, ..u.planner.clone() }, s.planner);
        let m = Variant::McBaseline { replicas: 20 }.apply(&s);
        assert_eq!(m.planner.kind, PlannerKind::McBaseline);
        assert_eq!(Variant::McBaseline { replicas: 20 }.label(), "mc_baseline_k20");
    }
}
