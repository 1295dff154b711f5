//! Monte-Carlo comparison planner: agent futures are predicted by `K` sampled
//! rollouts of the hybrid dynamics per control sample, and the risk uses the
//! empirical mean and standard deviation of the clearances.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{distance_to_agent, min_obstacle_distance, AgentContext, RobotState, Vec2};
use crate::planner::{
    risk_barrier, stage_cost_convergence, AgentBelief, Awareness, ControlSequence, Environment, PlannerConfig,
    PlannerError,
};
use crate::sigma::psd_cholesky;

/// Random stream of control sample `m` within one planning iteration.
pub fn sample_stream(iteration_seed: u64, m: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(iteration_seed);
    rng.set_stream(m);
    rng
}

/// Random stream of the replicas every control sample of one iteration shares.
pub fn shared_stream(iteration_seed: u64) -> ChaCha8Rng {
    sample_stream(iteration_seed, u64::MAX)
}

/// `K` sampled futures of every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct McPredictionBundle {
    pub replicas: usize,
    pub agents: usize,
    pub horizon: usize,
    /// Row-major `[t][k][a]`, `t = 0..H`; `t = 0` holds the initial draws.
    positions: Vec<Vec2>,
}

impl McPredictionBundle {
    pub fn at(&self, t: usize, k: usize, a: usize) -> Vec2 {
        self.positions[(t * self.replicas + k) * self.agents + a]
    }

    /// All replicas at step `t`, `K × A` positions.
    pub fn step(&self, t: usize) -> &[Vec2] {
        let n = self.replicas * self.agents;
        &self.positions[t * n..(t + 1) * n]
    }

    /// Trajectory of agent `a` in replica `k`.
    pub fn trajectory(&self, k: usize, a: usize) -> Vec<Vec2> {
        (0..self.horizon).map(|t| self.at(t, k, a)).collect()
    }
}

/// Standard normal draws behind one bundle.
pub(crate) struct ReplicaDraws {
    /// Initial positions, `[k][a]`.
    initial: Vec<Vec2>,
    /// Step noise `[t][k][a]` for `t = 1..H`.
    steps: Vec<Vec2>,
    per_step: usize,
}

impl ReplicaDraws {
    #[inline]
    fn step(&self, t: usize, k: usize, a: usize, agents: usize) -> &Vec2 {
        &self.steps[(t - 1) * self.per_step + k * agents + a]
    }
}

/// Replicas shared by every control sample of an iteration, with the
/// prediction in which no agent attends to the robot.
pub(crate) struct SharedReplicas {
    draws: ReplicaDraws,
    free: Option<(McPredictionBundle, Vec<usize>)>,
}

/// Beliefs, models and the configuration of one planning iteration.
pub(crate) struct McWorld<'a> {
    env: &'a Environment,
    cfg: &'a PlannerConfig,
    means: Vec<Vec2>,
    factors: Vec<Matrix2<f64>>,
    forced_mode: Vec<Option<usize>>,
    nominal_var: Vec<f64>,
    cutoff2: Vec<f64>,
}

impl<'a> McWorld<'a> {
    pub(crate) fn new(
        beliefs: &[AgentBelief],
        env: &'a Environment,
        cfg: &'a PlannerConfig,
    ) -> Result<Self, PlannerError> {
        if cfg.mc_replicas < 1 {
            return Err(PlannerError::Config("mc_replicas: must be at least 1".into()));
        }
        if beliefs.len() != env.agents.len() {
            return Err(PlannerError::Config(format!(
                "{} beliefs for {} agents",
                beliefs.len(),
                env.agents.len()
            )));
        }
        let factors = beliefs
            .iter()
            .enumerate()
            .map(|(i, b)| psd_cholesky(&b.covariance).map_err(|e| PlannerError::Config(format!("belief {i}: {e}"))))
            .collect::<Result<_, _>>()?;
        let forced_mode = env
            .agents
            .iter()
            .map(|m| match cfg.awareness {
                Awareness::Aware => Ok(None),
                Awareness::Unaware => Ok(Some(m.index_of(m.unaware_mode()?)?)),
            })
            .collect::<Result<_, PlannerError>>()?;
        Ok(Self {
            env,
            cfg,
            means: beliefs.iter().map(|b| b.mean).collect(),
            factors,
            forced_mode,
            nominal_var: env.agents.iter().map(|m| m.nominal_step_variance(cfg.dt)).collect(),
            cutoff2: env.agents.iter().map(|m| m.params.potential_field.cutoff.powi(2)).collect(),
        })
    }

    fn agents(&self) -> usize {
        self.env.agents.len()
    }

    /// Draw order: initial states replica by replica, agent by agent; then for
    /// each step, replica and agent one standard normal pair.
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ReplicaDraws {
        let (k_n, a_n, h) = (self.cfg.mc_replicas, self.agents(), self.cfg.horizon);
        let n = k_n * a_n;
        let mut initial = Vec::with_capacity(n);
        for _ in 0..k_n {
            for a in 0..a_n {
                initial.push(self.means[a] + self.factors[a] * normal_pair(rng));
            }
        }
        let steps = (0..n * h.saturating_sub(1)).map(|_| normal_pair(rng)).collect();
        ReplicaDraws { initial, steps, per_step: n }
    }

    fn propagate(
        &self,
        robot: &[Vec2],
        draws: &ReplicaDraws,
        forced: &[Option<usize>],
    ) -> Result<McPredictionBundle, PlannerError> {
        let (k_n, a_n, h) = (self.cfg.mc_replicas, self.agents(), self.cfg.horizon);
        let n = k_n * a_n;
        let mut positions = Vec::with_capacity(n * h);
        positions.extend_from_slice(&draws.initial);
        let mut world = Vec::with_capacity(a_n);
        let mut masks = vec![0u64; a_n];
        let mut near = Vec::with_capacity(a_n);
        for t in 1..h {
            let x_r = robot[t - 1];
            let prev = (t - 1) * n;
            for k in 0..k_n {
                let start = prev + k * a_n;
                world.clear();
                world.extend_from_slice(&positions[start..start + a_n]);
                if a_n <= 64 {
                    masks.fill(0);
                    for a in 0..a_n {
                        for b in a + 1..a_n {
                            let d2 = (world[a] - world[b]).norm_squared();
                            if d2 < self.cutoff2[a] {
                                masks[a] |= 1 << b;
                            }
                            if d2 < self.cutoff2[b] {
                                masks[b] |= 1 << a;
                            }
                        }
                    }
                }
                for a in 0..a_n {
                    let base = AgentContext::new(x_r, &self.env.obstacles);
                    let ctx = if a_n <= 64 {
                        near.clear();
                        let mut m = masks[a];
                        while m != 0 {
                            near.push(world[m.trailing_zeros() as usize]);
                            m &= m - 1;
                        }
                        base.with_others(&near)
                    } else {
                        base.with_agents(&world, a)
                    };
                    let model = &self.env.agents[a];
                    let mode = match forced[a] {
                        Some(m) => m,
                        None => model.active_index(&world[a], &x_r)?,
                    };
                    let z = draws.step(t, k, a, a_n);
                    positions.push(model.sample_step_by_index(mode, &world[a], &ctx, self.cfg.dt, self.nominal_var[a], z));
                }
            }
        }
        Ok(McPredictionBundle {
            replicas: k_n,
            agents: a_n,
            horizon: h,
            positions,
        })
    }

    /// Samples a bundle against a robot trajectory of at least `H` states.
    pub(crate) fn sample<R: Rng + ?Sized>(
        &self,
        robot: &[Vec2],
        rng: &mut R,
    ) -> Result<McPredictionBundle, PlannerError> {
        self.propagate(robot, &self.draw(rng), &self.forced_mode)
    }

    /// Draws the replicas all control samples of this iteration share.
    pub(crate) fn shared<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SharedReplicas, PlannerError> {
        let draws = self.draw(rng);
        let unaware: Option<Vec<usize>> = self
            .env
            .agents
            .iter()
            .map(|m| m.unaware_mode().ok().and_then(|id| m.index_of(id).ok()))
            .collect();
        let free = match unaware {
            Some(modes) => {
                let forced: Vec<Option<usize>> = modes.iter().copied().map(Some).collect();
                let robot = vec![Vec2::zeros(); self.cfg.horizon];
                Some((self.propagate(&robot, &draws, &forced)?, modes))
            }
            None => None,
        };
        Ok(SharedReplicas { draws, free })
    }

    fn robot_path(&self, x_r0: &RobotState, controls: &ControlSequence) -> Vec<RobotState> {
        let mut robot = Vec::with_capacity(controls.len() + 1);
        robot.push(*x_r0);
        for u in &controls.0 {
            let x = robot[robot.len() - 1];
            robot.push(self.env.robot_model.step(&x, u, self.cfg.dt));
        }
        robot
    }

    fn path_cost(
        &self,
        robot: &[RobotState],
        mean: &ControlSequence,
        controls: &ControlSequence,
        precision: &Matrix2<f64>,
        mut risk: impl FnMut(usize, &RobotState) -> Result<f64, PlannerError>,
    ) -> Result<f64, PlannerError> {
        let (env, cfg) = (self.env, self.cfg);
        let gamma = cfg.gamma();
        let mut cost = 0.0;
        for (t, (v, u)) in mean.0.iter().zip(&controls.0).enumerate() {
            let x = &robot[t];
            cost += stage_cost_convergence(x, &env.goal, cfg.goal_gain) + risk(t, x)? + gamma * v.dot(&(precision * u));
        }
        cost += stage_cost_convergence(&robot[controls.len()], &env.goal, cfg.goal_gain);
        Ok(cost)
    }

    /// `S_m` of one control sample with its own replicas drawn from `rng`.
    pub(crate) fn rollout_cost<R: Rng + ?Sized>(
        &self,
        x_r0: &RobotState,
        mean: &ControlSequence,
        controls: &ControlSequence,
        precision: &Matrix2<f64>,
        rng: &mut R,
    ) -> Result<f64, PlannerError> {
        let robot = self.robot_path(x_r0, controls);
        let positions: Vec<Vec2> = robot.iter().map(|x| x.position).collect();
        let bundle = self.sample(&positions, rng)?;
        let mut buf = Vec::new();
        self.path_cost(&robot, mean, controls, precision, |t, x| {
            replica_risk(x, bundle.replicas, bundle.agents, |k, a| bundle.at(t, k, a), self.env, self.cfg, &mut buf)
        })
    }

    /// `S_m` of one control sample against the shared replicas.
    pub(crate) fn rollout_cost_shared(
        &self,
        x_r0: &RobotState,
        mean: &ControlSequence,
        controls: &ControlSequence,
        precision: &Matrix2<f64>,
        shared: &SharedReplicas,
    ) -> Result<f64, PlannerError> {
        let robot = self.robot_path(x_r0, controls);
        let (k_n, a_n) = (self.cfg.mc_replicas, self.agents());
        let mut buf = Vec::new();
        match &shared.free {
            Some((free, unaware)) => {
                let mut state = Departures::new(self, &shared.draws, free, unaware);
                self.path_cost(&robot, mean, controls, precision, |t, x| {
                    if t > 0 {
                        state.advance(&robot[t - 1].position)?;
                    }
                    replica_risk(x, k_n, a_n, |k, a| state.position(k, a), self.env, self.cfg, &mut buf)
                })
            }
            None => {
                let positions: Vec<Vec2> = robot.iter().map(|x| x.position).collect();
                let bundle = self.propagate(&positions, &shared.draws, &self.forced_mode)?;
                self.path_cost(&robot, mean, controls, precision, |t, x| {
                    replica_risk(x, k_n, a_n, |k, a| bundle.at(t, k, a), self.env, self.cfg, &mut buf)
                })
            }
        }
    }
}

/// Replica agents of one control sample that no longer follow the shared
/// robot-free prediction, stepped one time step at a time.
struct Departures<'w> {
    world: &'w McWorld<'w>,
    draws: &'w ReplicaDraws,
    free: &'w McPredictionBundle,
    unaware: &'w [usize],
    t: usize,
    departed: Vec<bool>,
    /// Departed agents of each replica.
    members: Vec<Vec<usize>>,
    own: Vec<Vec2>,
    next: Vec<Vec2>,
    scratch: Vec<Vec2>,
    newly: Vec<bool>,
}

impl<'w> Departures<'w> {
    fn new(world: &'w McWorld<'w>, draws: &'w ReplicaDraws, free: &'w McPredictionBundle, unaware: &'w [usize]) -> Self {
        let n = free.replicas * free.agents;
        Self {
            world,
            draws,
            free,
            unaware,
            t: 0,
            departed: vec![false; n],
            members: vec![Vec::new(); free.replicas],
            own: vec![Vec2::zeros(); n],
            next: vec![Vec2::zeros(); n],
            scratch: Vec::with_capacity(free.agents),
            newly: vec![false; free.agents],
        }
    }

    #[inline]
    fn position(&self, k: usize, a: usize) -> Vec2 {
        let i = k * self.free.agents + a;
        if self.departed[i] {
            self.own[i]
        } else {
            self.free.at(self.t, k, a)
        }
    }

    /// Steps every replica from `t` to `t + 1` with the robot at `x_r`.
    fn advance(&mut self, x_r: &Vec2) -> Result<(), PlannerError> {
        let (env, cfg) = (self.world.env, self.world.cfg);
        let (k_n, a_n, t) = (self.free.replicas, self.free.agents, self.t);
        for k in 0..k_n {
            let base = k * a_n;
            let mut any = !self.members[k].is_empty();
            for a in 0..a_n {
                self.newly[a] = false;
                if self.departed[base + a] {
                    continue;
                }
                let p = self.free.at(t, k, a);
                let model = &env.agents[a];
                let switched = match self.world.forced_mode[a] {
                    Some(_) => false,
                    None => model.active_index(&p, x_r)? != self.unaware[a],
                };
                let pf = &model.params.potential_field;
                let pushed = !switched
                    && self.members[k].iter().any(|&b| {
                        pf.reaches(&(p - self.own[base + b])) || pf.reaches(&(p - self.free.at(t, k, b)))
                    });
                self.newly[a] = switched || pushed;
                any |= self.newly[a];
            }
            if !any {
                continue;
            }
            self.scratch.clear();
            for a in 0..a_n {
                let p = self.position(k, a);
                self.scratch.push(p);
            }
            for a in 0..a_n {
                if self.newly[a] {
                    self.departed[base + a] = true;
                    self.members[k].push(a);
                }
            }
            for &a in &self.members[k] {
                let model = &env.agents[a];
                let x_p = &self.scratch[a];
                let mode = match self.world.forced_mode[a] {
                    Some(m) => m,
                    None => model.active_index(x_p, x_r)?,
                };
                let ctx = AgentContext::new(*x_r, &env.obstacles).with_agents(&self.scratch, a);
                self.next[base + a] = model.sample_step_by_index(
                    mode,
                    x_p,
                    &ctx,
                    cfg.dt,
                    self.world.nominal_var[a],
                    self.draws.step(t + 1, k, a, a_n),
                );
            }
        }
        std::mem::swap(&mut self.own, &mut self.next);
        self.t += 1;
        Ok(())
    }
}

fn normal_pair<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Risk barrier from the empirical clearance statistics of `K` replicas, the
/// standard deviation with the `K - 1` denominator.
fn replica_risk(
    robot: &RobotState,
    k_n: usize,
    a_n: usize,
    position: impl Fn(usize, usize) -> Vec2,
    env: &Environment,
    cfg: &PlannerConfig,
    buf: &mut Vec<f64>,
) -> Result<f64, PlannerError> {
    let bound = if a_n == 0 {
        None
    } else {
        if k_n < 2 {
            return Err(PlannerError::Config(
                "mc_replicas: must be at least 2 for a standard deviation".into(),
            ));
        }
        let radii = env.radii();
        let mut r = f64::INFINITY;
        for a in 0..a_n {
            buf.clear();
            buf.extend((0..k_n).map(|k| distance_to_agent(robot, &position(k, a), radii)));
            let mean = buf.iter().sum::<f64>() / k_n as f64;
            let ss: f64 = buf.iter().map(|d| (d - mean) * (d - mean)).sum();
            let sd = (ss / (k_n - 1) as f64).sqrt();
            r = r.min(mean - cfg.risk_alpha * sd);
        }
        Some(r)
    };
    let h_obs = min_obstacle_distance(robot, &env.obstacles, env.robot_radius);
    Ok(risk_barrier(bound, h_obs, cfg))
}

/// Samples `K = cfg.mc_replicas` joint futures of all agents.
///
/// Each replica draws initial states from the beliefs and then samples the
/// conditional Gaussian of the mode active for its own position against the
/// robot trajectory. Other agents of the same replica act as potential-field
/// sources. `robot` must hold at least `H` positions.
pub fn mc_agent_rollout<R: Rng + ?Sized>(
    robot: &[Vec2],
    beliefs: &[AgentBelief],
    env: &Environment,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<McPredictionBundle, PlannerError> {
    if robot.len() < cfg.horizon {
        return Err(PlannerError::Config(format!(
            "robot trajectory has {} states, horizon is {}",
            robot.len(),
            cfg.horizon
        )));
    }
    McWorld::new(beliefs, env, cfg)?.sample(robot, rng)
}

/// Risk stage cost at step `t` from the empirical clearance statistics over
/// the replicas; the standard deviation uses the `K - 1` denominator.
pub fn mc_stage_cost_risk(
    robot: &RobotState,
    bundle: &McPredictionBundle,
    t: usize,
    env: &Environment,
    cfg: &PlannerConfig,
) -> Result<f64, PlannerError> {
    replica_risk(robot, bundle.replicas, bundle.agents, |k, a| bundle.at(t, k, a), env, cfg, &mut Vec::new())
}

/// Number of sampled agent steps one planning iteration performs.
pub fn agent_steps_per_iteration(cfg: &PlannerConfig, agents: usize) -> usize {
    cfg.samples * cfg.mc_replicas * agents * cfg.horizon.saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AgentParams, Disturbance, HybridAgentModel, RobotModel};
    use approx::assert_relative_eq;

    fn env(agents: usize, params: AgentParams) -> Environment {
        Environment {
            robot_model: RobotModel::SingleIntegrator,
            robot_radius: 0.3,
            goal: Vec2::zeros(),
            obstacles: vec![],
            agents: vec![HybridAgentModel::attention(params); agents],
            agent_radius: 0.3,
        }
    }

    fn silent() -> AgentParams {
        AgentParams {
            disturbance: Disturbance { alpha: 0.0, beta: 1.0 },
            ..AgentParams::default()
        }
    }

    #[test]
    fn noiseless_replicas_coincide_with_the_deterministic_rollout() {
        let e = env(2, silent());
        let cfg = PlannerConfig { mc_replicas: 4, horizon: 6, ..Default::default() };
        let beliefs = [AgentBelief::point_mass(Vec2::new(-1.0, 0.5)), AgentBelief::point_mass(Vec2::new(-1.0, -0.5))];
        let robot = vec![Vec2::new(1.0, 0.0); 6];
        let b = mc_agent_rollout(&robot, &beliefs, &e, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut det = vec![beliefs[0].mean, beliefs[1].mean];
        for t in 0..6 {
            for k in 0..4 {
                assert_eq!(b.at(t, k, 0), det[0]);
                assert_eq!(b.at(t, k, 1), det[1]);
            }
            let prev = det.clone();
            for a in 0..2 {
                let ctx = AgentContext::new(robot[t], &[]).with_agents(&prev, a);
                let mode = e.agents[a].active_mode(&prev[a], &robot[t]).unwrap();
                det[a] = e.agents[a].conditional_moments(mode, &prev[a], &ctx, cfg.dt).unwrap().mean;
            }
        }
        assert_eq!(b.trajectory(2, 1).len(), 6);
    }

    #[test]
    fn equal_distances_give_zero_spread() {
        let e = env(1, silent());
        let cfg = PlannerConfig { mc_replicas: 3, horizon: 1, risk_alpha: 1.96, ..Default::default() };
        let b = mc_agent_rollout(&[Vec2::zeros()], &[AgentBelief::point_mass(Vec2::new(2.6, 0.0))], &e, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let c = mc_stage_cost_risk(&RobotState::at(0.0, 0.0), &b, 0, &e, &cfg).unwrap();
        assert_relative_eq!(c, 1.0 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn one_replica_has_no_standard_deviation() {
        let e = env(1, silent());
        let cfg = PlannerConfig { mc_replicas: 1, horizon: 1, ..Default::default() };
        let b = mc_agent_rollout(&[Vec2::zeros()], &[AgentBelief::point_mass(Vec2::new(2.0, 0.0))], &e, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(b.replicas, 1);
        assert!(mc_stage_cost_risk(&RobotState::at(0.0, 0.0), &b, 0, &e, &cfg).is_err());
    }

    #[test]
    fn unaware_replicas_ignore_the_robot() {
        let e = env(1, silent());
        let beliefs = [AgentBelief::point_mass(Vec2::new(0.0, 0.5))];
        let robot = vec![Vec2::zeros(); 3];
        let aware = PlannerConfig { mc_replicas: 2, horizon: 3, ..Default::default() };
        let unaware = PlannerConfig { awareness: Awareness::Unaware, ..aware.clone() };
        let a = mc_agent_rollout(&robot, &beliefs, &e, &aware, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let u = mc_agent_rollout(&robot, &beliefs, &e, &unaware, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(a.at(1, 0, 0)[1] > 0.5);
        assert_relative_eq!(u.at(1, 0, 0), Vec2::new(0.15, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn streams_are_independent_of_evaluation_order() {
        let mut a = sample_stream(5, 2);
        let mut b = sample_stream(5, 2);
        let mut c = sample_stream(5, 3);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn shared_replicas_follow_the_full_propagation_exactly() {
        let mut e = env(5, AgentParams::default());
        e.obstacles = vec![crate::dynamics::Obstacle::new(0.5, 0.0, 0.3)];
        let beliefs: Vec<AgentBelief> = [(-3.0, 0.0), (-2.0, 1.2), (-4.5, -0.8), (-1.0, -1.5), (-6.0, 0.4)]
            .iter()
            .map(|&(x, y)| AgentBelief::isotropic(Vec2::new(x, y), 0.0025))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut departed = 0;
        for awareness in [Awareness::Aware, Awareness::Unaware] {
            let cfg = PlannerConfig { mc_replicas: 6, horizon: 30, awareness, ..Default::default() };
            let world = McWorld::new(&beliefs, &e, &cfg).unwrap();
            let shared = world.shared(&mut rng).unwrap();
            let (free, unaware) = shared.free.as_ref().unwrap();
            for _ in 0..10 {
                let mut p = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-3.0..-1.0));
                let robot: Vec<Vec2> = (0..30)
                    .map(|_| {
                        p += Vec2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.05..0.25));
                        p
                    })
                    .collect();
                let full = world.propagate(&robot, &shared.draws, &world.forced_mode).unwrap();
                let mut state = Departures::new(&world, &shared.draws, free, unaware);
                for t in 0..30 {
                    if t > 0 {
                        state.advance(&robot[t - 1]).unwrap();
                    }
                    for k in 0..6 {
                        for a in 0..5 {
                            assert_eq!(state.position(k, a), full.at(t, k, a));
                        }
                    }
                }
                departed += state.departed.iter().filter(|d| **d).count();
            }
        }
        assert!(departed > 0);
    }
}
