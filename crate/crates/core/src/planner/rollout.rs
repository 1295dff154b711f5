//! Joint prediction of the robot and the agents' sigma-point sets along one
//! sampled control sequence.

use nalgebra::Matrix2;

use super::cost::{risk_over, stage_cost_convergence};
use super::{Awareness, ControlSequence, Environment, PlannerConfig, PlannerError, SwitchingPolicy};
use crate::dynamics::{AgentContext, HybridAgentModel, ModeId, PotentialField, RobotState, Vec2};
use crate::sigma::{ecut_step_in_place, generate_ut_points, GaussianMoments, SigmaPointSet, StochasticMap, UtParams};

/// Moments of one agent's position at planning time.
pub type AgentBelief = GaussianMoments<2>;

/// Everything one rollout produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub sample: usize,
    /// `H + 1` robot states.
    pub robot: Vec<RobotState>,
    /// `agents[i][t]` is agent `i`'s set at step `t`, for `t = 0..=H`.
    pub agents: Vec<Vec<SigmaPointSet<2>>>,
    pub cost: f64,
    /// `modes[t][i][j]` is the mode that moved point `j` of agent `i` at step `t`.
    pub modes: Vec<Vec<Vec<ModeId>>>,
}

/// Hooks for recording a rollout; the cost-only path ignores them.
pub(crate) trait RolloutObserver {
    fn state(&mut self, _robot: &RobotState, _sets: &mut dyn Iterator<Item = &SigmaPointSet<2>>) {}
    fn modes(&mut self, _env: &Environment, _modes: &[Vec<usize>]) {}
}

struct Silent;
impl RolloutObserver for Silent {}

#[derive(Default)]
struct Recorder {
    robot: Vec<RobotState>,
    agents: Vec<Vec<SigmaPointSet<2>>>,
    modes: Vec<Vec<Vec<ModeId>>>,
}

impl RolloutObserver for Recorder {
    fn state(&mut self, robot: &RobotState, sets: &mut dyn Iterator<Item = &SigmaPointSet<2>>) {
        self.robot.push(*robot);
        for (i, s) in sets.enumerate() {
            if self.agents.len() <= i {
                self.agents.push(Vec::new());
            }
            self.agents[i].push(s.clone());
        }
    }

    fn modes(&mut self, env: &Environment, modes: &[Vec<usize>]) {
        self.modes.push(
            modes
                .iter()
                .zip(&env.agents)
                .map(|(m, model)| m.iter().map(|&k| model.modes[k].id).collect())
                .collect(),
        );
    }
}

/// One agent's transition with a mode fixed in advance for every point.
struct AgentStepMap<'a> {
    model: &'a HybridAgentModel,
    ctx: AgentContext<'a>,
    modes: &'a [usize],
    dt: f64,
    nominal_var: f64,
}

impl StochasticMap<2> for AgentStepMap<'_> {
    #[inline]
    fn transition(&self, index: usize, state: &Vec2) -> GaussianMoments<2> {
        self.model.moments_by_index(self.modes[index], state, &self.ctx, self.dt, self.nominal_var)
    }
}

/// Chooses the mode index of every point of `set` under the configured policy.
fn select_modes(
    model: &HybridAgentModel,
    set: &SigmaPointSet<2>,
    robot: &Vec2,
    cfg: &PlannerConfig,
    out: &mut Vec<usize>,
) -> Result<(), PlannerError> {
    out.clear();
    match (cfg.awareness, cfg.switching) {
        (Awareness::Unaware, _) => {
            let id = model.unaware_mode()?;
            let k = model.index_of(id)?;
            out.resize(set.len(), k);
        }
        (Awareness::Aware, SwitchingPolicy::MeanBased) => {
            let k = model.active_index(&set.mean(), robot)?;
            out.resize(set.len(), k);
        }
        (Awareness::Aware, SwitchingPolicy::PerSigmaPoint) => {
            for p in set.points() {
                out.push(model.active_index(p, robot)?);
            }
        }
    }
    Ok(())
}

/// Initial sets from the beliefs.
pub fn initial_sets(beliefs: &[AgentBelief], params: UtParams) -> Result<Vec<SigmaPointSet<2>>, PlannerError> {
    beliefs
        .iter()
        .enumerate()
        .map(|(i, b)| generate_ut_points(b, params).map_err(|e| PlannerError::Belief { agent: i, source: e }))
        .collect()
}

/// Advances every agent's set by one step against the robot position `robot`.
///
/// Other agents enter each agent's potential field through their set means.
/// Returns the mode that moved every point.
pub fn advance_agent_sets(
    sets: &mut [SigmaPointSet<2>],
    robot: &Vec2,
    env: &Environment,
    cfg: &PlannerConfig,
) -> Result<Vec<Vec<ModeId>>, PlannerError> {
    let mut means = Vec::new();
    let mut modes = vec![Vec::new(); sets.len()];
    advance_with(sets, robot, env, cfg, &mut means, &mut modes)?;
    Ok(modes
        .iter()
        .zip(&env.agents)
        .map(|(m, model)| m.iter().map(|&k| model.modes[k].id).collect())
        .collect())
}

/// Collects into `out` the means, other than agent `i`'s, that lie within
/// potential-field reach of some point of `set`. The rest contribute exactly
/// zero to every point's drift.
fn neighbours(pf: &PotentialField, set: &SigmaPointSet<2>, means: &[Vec2], i: usize, out: &mut Vec<Vec2>) {
    out.clear();
    let c = means[i];
    let spread = set.points().iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    let reach = (pf.cutoff + spread) * (1.0 + 1e-9) + 1e-12;
    let reach2 = reach * reach;
    for (k, m) in means.iter().enumerate() {
        if k != i && (m - c).norm_squared() < reach2 {
            out.push(*m);
        }
    }
}

fn advance_with(
    sets: &mut [SigmaPointSet<2>],
    robot: &Vec2,
    env: &Environment,
    cfg: &PlannerConfig,
    means: &mut Vec<Vec2>,
    modes: &mut [Vec<usize>],
) -> Result<(), PlannerError> {
    means.clear();
    means.extend(sets.iter().map(SigmaPointSet::mean));
    for (i, (model, set)) in env.agents.iter().zip(sets.iter()).enumerate() {
        select_modes(model, set, robot, cfg, &mut modes[i])?;
    }
    let params = cfg.ut_params();
    let mut near = Vec::with_capacity(means.len());
    for (i, (model, set)) in env.agents.iter().zip(sets.iter_mut()).enumerate() {
        neighbours(&model.params.potential_field, set, means, i, &mut near);
        let map = AgentStepMap {
            model,
            ctx: AgentContext::new(*robot, &env.obstacles).with_others(&near),
            modes: &modes[i],
            dt: cfg.dt,
            nominal_var: model.nominal_step_variance(cfg.dt),
        };
        ecut_step_in_place(&map, set, params).map_err(|e| PlannerError::Prediction { agent: i, source: e })?;
    }
    Ok(())
}

/// Agent prediction with every agent ignoring the robot. It is shared by all
/// samples of an iteration: a sample reuses an agent's entry until the robot
/// or an agent that already departed from it can influence that agent.
pub(crate) struct FreePrediction {
    /// `[t][i]`, `t = 0..=H`.
    sets: Vec<Vec<SigmaPointSet<2>>>,
    /// Means the step from `t` saw, `t = 0..H`.
    means: Vec<Vec<Vec2>>,
    /// Mode index used for each agent.
    modes: Vec<usize>,
}

impl FreePrediction {
    /// `None` when some agent model has no robot-unaware mode.
    pub(crate) fn new(
        initial: &[SigmaPointSet<2>],
        env: &Environment,
        cfg: &PlannerConfig,
    ) -> Result<Option<Self>, PlannerError> {
        let modes: Option<Vec<usize>> = env
            .agents
            .iter()
            .map(|m| m.unaware_mode().ok().and_then(|id| m.index_of(id).ok()))
            .collect();
        let Some(modes) = modes else {
            return Ok(None);
        };
        let unaware = PlannerConfig {
            awareness: Awareness::Unaware,
            ..cfg.clone()
        };
        let mut current = initial.to_vec();
        let mut sets = Vec::with_capacity(cfg.horizon + 1);
        let mut means = Vec::with_capacity(cfg.horizon);
        let mut step_means = Vec::new();
        let mut step_modes = vec![Vec::new(); initial.len()];
        sets.push(current.clone());
        for _ in 0..cfg.horizon {
            advance_with(&mut current, &Vec2::zeros(), env, &unaware, &mut step_means, &mut step_modes)?;
            means.push(step_means.clone());
            sets.push(current.clone());
        }
        Ok(Some(Self { sets, means, modes }))
    }
}

#[inline]
fn set_at<'a>(
    own: &'a [Option<SigmaPointSet<2>>],
    free: Option<&'a FreePrediction>,
    t: usize,
    i: usize,
) -> &'a SigmaPointSet<2> {
    match (&own[i], free) {
        (Some(s), _) => s,
        (None, Some(f)) => &f.sets[t][i],
        (None, None) => unreachable!("agent without a set"),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate<O: RolloutObserver>(
    x_r0: &RobotState,
    initial: &[SigmaPointSet<2>],
    free: Option<&FreePrediction>,
    mean: &ControlSequence,
    controls: &ControlSequence,
    env: &Environment,
    cfg: &PlannerConfig,
    precision: &Matrix2<f64>,
    observer: &mut O,
) -> Result<f64, PlannerError> {
    let n = initial.len();
    let gamma = cfg.gamma();
    let params = cfg.ut_params();
    let mut own: Vec<Option<SigmaPointSet<2>>> = match free {
        Some(_) => vec![None; n],
        None => initial.iter().cloned().map(Some).collect(),
    };
    let mut means = Vec::with_capacity(n);
    let mut modes = vec![Vec::with_capacity(5); n];
    let mut departing = vec![false; n];
    let mut near = Vec::with_capacity(n);
    let nominal: Vec<f64> = env.agents.iter().map(|m| m.nominal_step_variance(cfg.dt)).collect();
    let mut x = *x_r0;
    let mut cost = 0.0;
    for (t, (v, u)) in mean.0.iter().zip(&controls.0).enumerate() {
        observer.state(&x, &mut (0..n).map(|i| set_at(&own, free, t, i)));
        cost += stage_cost_convergence(&x, &env.goal, cfg.goal_gain)
            + risk_over(&x, (0..n).map(|i| set_at(&own, free, t, i)), env, cfg)
            + gamma * v.dot(&(precision * u));

        means.clear();
        for i in 0..n {
            means.push(match (&own[i], free) {
                (Some(s), _) => s.mean(),
                (None, Some(f)) => f.means[t][i],
                (None, None) => unreachable!("agent without a set"),
            });
        }
        for (i, model) in env.agents.iter().enumerate() {
            select_modes(model, set_at(&own, free, t, i), &x.position, cfg, &mut modes[i])?;
        }
        if let Some(f) = free {
            for (i, model) in env.agents.iter().enumerate() {
                departing[i] = false;
                if own[i].is_some() {
                    continue;
                }
                let pf = &model.params.potential_field;
                let points = f.sets[t][i].points();
                let same_modes = modes[i].iter().all(|&k| k == f.modes[i]);
                departing[i] = !same_modes
                    || (0..n).any(|k| {
                        k != i
                            && own[k].is_some()
                            && points
                                .iter()
                                .any(|p| pf.reaches(&(p - means[k])) || pf.reaches(&(p - f.means[t][k])))
                    });
            }
            for i in 0..n {
                if departing[i] {
                    own[i] = Some(f.sets[t][i].clone());
                }
            }
        }
        for (i, (model, slot)) in env.agents.iter().zip(own.iter_mut()).enumerate() {
            if let Some(set) = slot {
                neighbours(&model.params.potential_field, set, &means, i, &mut near);
                let map = AgentStepMap {
                    model,
                    ctx: AgentContext::new(x.position, &env.obstacles).with_others(&near),
                    modes: &modes[i],
                    dt: cfg.dt,
                    nominal_var: nominal[i],
                };
                ecut_step_in_place(&map, set, params).map_err(|e| PlannerError::Prediction { agent: i, source: e })?;
            }
        }
        observer.modes(env, &modes);
        x = env.robot_model.step(&x, u, cfg.dt);
    }
    let h = controls.len();
    observer.state(&x, &mut (0..n).map(|i| set_at(&own, free, h, i)));
    cost += stage_cost_convergence(&x, &env.goal, cfg.goal_gain);
    Ok(cost)
}

/// Cost `S_m` of one sample without recording the prediction.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rollout_cost(
    x_r0: &RobotState,
    initial: &[SigmaPointSet<2>],
    free: Option<&FreePrediction>,
    mean: &ControlSequence,
    controls: &ControlSequence,
    env: &Environment,
    cfg: &PlannerConfig,
    precision: &Matrix2<f64>,
) -> Result<f64, PlannerError> {
    simulate(x_r0, initial, free, mean, controls, env, cfg, precision, &mut Silent)
}

/// Like [`rollout_cost`] but predicts every agent step explicitly.
#[allow(clippy::too_many_arguments)]
#[cfg(test)]
pub(crate) fn rollout_cost_uncached(
    x_r0: &RobotState,
    initial: &[SigmaPointSet<2>],
    mean: &ControlSequence,
    controls: &ControlSequence,
    env: &Environment,
    cfg: &PlannerConfig,
    precision: &Matrix2<f64>,
) -> Result<f64, PlannerError> {
    simulate(x_r0, initial, None, mean, controls, env, cfg, precision, &mut Silent)
}

/// Rolls the robot and every agent forward along `controls = mean + ε`.
///
/// The stage cost at each step is the goal term, the risk term on the current
/// sets and the control term `γ vᵀ Σ_ε⁻¹ u`; the goal term is added again at
/// the final state.
pub fn rollout(
    m: usize,
    x_r0: &RobotState,
    beliefs: &[AgentBelief],
    mean: &ControlSequence,
    controls: &ControlSequence,
    env: &Environment,
    cfg: &PlannerConfig,
) -> Result<RolloutResult, PlannerError> {
    check_inputs(beliefs, mean, controls, env, cfg)?;
    let initial = initial_sets(beliefs, cfg.ut_params())?;
    let precision = super::mppi::noise_precision(cfg);
    let mut rec = Recorder::default();
    let cost = simulate(x_r0, &initial, None, mean, controls, env, cfg, &precision, &mut rec)
        .map_err(|e| e.in_sample(m))?;
    if !cost.is_finite() {
        return Err(PlannerError::NonFiniteCost { sample: m });
    }
    Ok(RolloutResult {
        sample: m,
        robot: rec.robot,
        agents: rec.agents,
        cost,
        modes: rec.modes,
    })
}

pub(crate) fn check_inputs(
    beliefs: &[AgentBelief],
    mean: &ControlSequence,
    controls: &ControlSequence,
    env: &Environment,
    cfg: &PlannerConfig,
) -> Result<(), PlannerError> {
    if beliefs.len() != env.agents.len() {
        return Err(PlannerError::Config(format!(
            "{} beliefs for {} agents",
            beliefs.len(),
            env.agents.len()
        )));
    }
    if mean.len() != cfg.horizon || controls.len() != cfg.horizon {
        return Err(PlannerError::Config(format!(
            "control sequences must have length {}",
            cfg.horizon
        )));
    }
    if !mean.is_finite() || !controls.is_finite() {
        return Err(PlannerError::Config("control sequence has non-finite entries".into()));
    }
    Ok(())
}
