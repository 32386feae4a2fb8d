//! Two-agent environment: the red team is controlled through [`CombatEnv::step`],
//! the blue team by a rule-based bot or an external policy.
//!
//! One environment step lasts 20 physics ticks of 0.02 s. Learning agents
//! pick a candidate point of one enemy and that enemy as their target; the
//! planner drives them there while the turret tracks the target.

use crate::arena::Arena;
use crate::bots::bot_goals;
use crate::dynamics::{physics_tick, resolve_collisions, DynamicsContext, Level, RobotBody, Twist, TICK_DT};
use crate::geometry::{Point, Pose};
use crate::planning::{
    aim_rate, candidate_points_around, follow_path, plan_path, snap_to_free, CandidateSet, PlannedPath,
    PlannerConfig,
};
use crate::referee::{
    in_firing_window, judge, resolve_volley, team_reward, CombatRules, RewardWeights, ShotOutcome, StepEvents,
    Verdict,
};
use crate::world::{Team, WorldState, N_ROBOTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

pub const OBS_DIM: usize = 37;
pub const N_ACTIONS: usize = 8;
pub const N_AGENTS: usize = 2;
pub const GOALS_PER_ENEMY: usize = 4;
pub const DEFAULT_MAX_STEPS: u32 = 50;
pub const DEFAULT_TICKS_PER_STEP: u32 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("unknown context key {0:?}")]
    UnknownContext(String),
    #[error("context {key} = {value} outside {range}")]
    ContextRange { key: String, value: f64, range: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
    #[error("action index {0} out of range")]
    BadAction(usize),
    #[error("candidate generation failed: {0}")]
    Planning(String),
}

/// Named parameter overrides applied at reset.
pub type ContextMap = BTreeMap<String, f64>;

type Setter = fn(&mut DynamicsContext, &mut CombatRules, f64);

/// Context registry entry: name, inclusive lower bound (exclusive when the
/// flag is set), upper bound, integral flag and setter.
struct ContextKey {
    name: &'static str,
    lo: f64,
    lo_open: bool,
    hi: f64,
    integral: bool,
    set: Setter,
}

const fn key(name: &'static str, lo: f64, lo_open: bool, hi: f64, integral: bool, set: Setter) -> ContextKey {
    ContextKey { name, lo, lo_open, hi, integral, set }
}

const CONTEXT_KEYS: &[ContextKey] = &[
    key("VK1", 0.0, true, 2.0, false, |d, _, v| d.mu_slide = v),
    key("mu_slide", 0.0, true, 2.0, false, |d, _, v| d.mu_slide = v),
    key("mu_roll", 0.0, true, 2.0, false, |d, _, v| d.mu_roll = v),
    key("tau_max", 0.0, true, 100.0, false, |d, _, v| d.tau_max = v),
    key("kp", 0.0, false, 1000.0, false, |d, _, v| d.kp = v),
    key("ki", 0.0, false, 1000.0, false, |d, _, v| d.ki = v),
    key("kd", 0.0, false, 10.0, false, |d, _, v| d.kd = v),
    key("mass", 0.0, true, 1000.0, false, |d, _, v| d.mass = v),
    key("wheel_inertia", 0.0, true, 1.0, false, |d, _, v| d.wheel_inertia = v),
    key("p_max", 0.0, true, 1.0, false, |d, _, v| d.hit.p_max = v),
    key("d0", 0.0, true, 20.0, false, |d, _, v| d.hit.d0 = v),
    key("kappa", 0.0, true, 100.0, false, |d, _, v| d.hit.kappa = v),
    key("hp0", 1.0, false, 1e6, true, |_, c, v| c.hp0 = v as u32),
    key("bullets0", 0.0, false, 1e6, true, |_, c, v| c.bullets0 = v as u32),
    key("level", 1.0, false, 3.0, true, |d, _, v| {
        d.level = Level::from_code(v as u8).expect("range checked")
    }),
];

/// Names accepted in a [`ContextMap`].
pub fn context_keys() -> Vec<&'static str> {
    CONTEXT_KEYS.iter().map(|k| k.name).collect()
}

/// Applies `contexts` on top of the given parameters. Keys are applied in
/// sorted order, so an explicit `mu_slide` wins over the `VK1` alias.
pub fn apply_contexts(
    contexts: &ContextMap,
    dynamics: &mut DynamicsContext,
    rules: &mut CombatRules,
) -> Result<(), EnvError> {
    for (name, &value) in contexts {
        let k = CONTEXT_KEYS
            .iter()
            .find(|k| k.name == name)
            .ok_or_else(|| EnvError::UnknownContext(name.clone()))?;
        let lo_ok = if k.lo_open { value > k.lo } else { value >= k.lo };
        if !(value.is_finite() && lo_ok && value <= k.hi && (!k.integral || value.fract() == 0.0)) {
            let open = if k.lo_open { "(" } else { "[" };
            let kind = if k.integral { " integer" } else { "" };
            return Err(EnvError::ContextRange {
                key: name.clone(),
                value,
                range: format!("{open}{}, {}]{kind}", k.lo, k.hi),
            });
        }
        (k.set)(dynamics, rules, value);
    }
    dynamics.validate().map_err(EnvError::InvalidParams)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    #[default]
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub seed: u64,
    /// Label for logs; plays the role of a port number.
    pub instance_id: u32,
    /// Accepted for parity with rendered simulators; has no effect.
    pub time_scale: f64,
    pub max_steps: u32,
    pub ticks_per_step: u32,
    pub rules: CombatRules,
    pub weights: RewardWeights,
    pub planner: PlannerConfig,
    pub dynamics: DynamicsContext,
    /// Half-width of the uniform spawn jitter around birth-area centers.
    pub spawn_jitter: f64,
    pub action_mode: ActionMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instance_id: 0,
            time_scale: 1.0,
            max_steps: DEFAULT_MAX_STEPS,
            ticks_per_step: DEFAULT_TICKS_PER_STEP,
            rules: CombatRules::default(),
            weights: RewardWeights::default(),
            planner: PlannerConfig::default(),
            dynamics: DynamicsContext::default(),
            spawn_jitter: 0.15,
            action_mode: ActionMode::Discrete,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidParams(m.to_string()));
        if self.max_steps == 0 || self.ticks_per_step == 0 {
            return bad("max_steps and ticks_per_step must be positive");
        }
        if self.planner.k != GOALS_PER_ENEMY {
            return bad("the observation layout needs exactly 4 candidates per enemy");
        }
        if !(self.spawn_jitter >= 0.0 && self.spawn_jitter < 0.5) {
            return bad("spawn_jitter must lie in [0, 0.5)");
        }
        if !(self.rules.range_max > 0.0 && self.rules.angle_gate > 0.0) {
            return bad("range_max and angle_gate must be positive");
        }
        self.dynamics.validate().map_err(EnvError::InvalidParams)
    }
}

/// Per-agent action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Joint index `2 * goal + target`.
    Discrete(usize),
    /// Direct body-frame command, bypassing the planner.
    Continuous { vx: f64, vy: f64, omega: f64, target: usize },
    Noop,
}

/// `index -> (goal point, target enemy)`.
pub fn decode_action(index: usize) -> Result<(usize, usize), EnvError> {
    if index >= N_ACTIONS {
        return Err(EnvError::BadAction(index));
    }
    Ok((index / 2, index % 2))
}

pub fn encode_action(goal: usize, target: usize) -> Result<usize, EnvError> {
    if goal >= GOALS_PER_ENEMY || target >= 2 {
        return Err(EnvError::BadAction(2 * goal + target));
    }
    Ok(2 * goal + target)
}

/// Per-robot controller state inside a step.
#[derive(Debug, Clone, Default)]
struct Control {
    path: Option<PlannedPath>,
    direct: Option<Twist>,
    target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetInfo {
    pub seed: u64,
    pub instance_id: u32,
    pub level: Level,
    pub dynamics: DynamicsContext,
    pub rules: CombatRules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: u32,
    pub verdict: Verdict,
    /// Team rewards (red, blue).
    pub rewards: [f64; 2],
    pub events: StepEvents,
    pub damage_dealt: [u32; 2],
    pub shots: Vec<ShotOutcome>,
    /// Opponent decisions: (robot, target, goal).
    pub bot_goals: Vec<(usize, usize, Point)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: [Vec<f64>; N_AGENTS],
    /// Shared red-team reward.
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

pub struct CombatEnv {
    arena: Arc<Arena>,
    config: EnvConfig,
    dynamics: DynamicsContext,
    rules: CombatRules,
    world: WorldState,
    candidates: Vec<Option<CandidateSet>>,
    controls: Vec<Control>,
    rng: ChaCha8Rng,
    seed: u64,
    step_count: u32,
    done: bool,
    reset_called: bool,
    verdict: Verdict,
}

/// Deterministic per-use seed derived from the episode seed.
fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CombatEnv {
    pub fn new(arena: Arc<Arena>, config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let mut rules = config.rules;
        rules.tick_limit = config.max_steps * config.ticks_per_step;
        let world = WorldState::new([Pose::new(0.0, 0.0, 0.0); N_ROBOTS], &rules);
        Ok(Self {
            arena,
            dynamics: config.dynamics,
            rules,
            world,
            candidates: vec![None; N_ROBOTS],
            controls: vec![Control::default(); N_ROBOTS],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            seed: config.seed,
            step_count: 0,
            done: true,
            reset_called: false,
            verdict: Verdict::Ongoing,
            config,
        })
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn dynamics(&self) -> &DynamicsContext {
        &self.dynamics
    }

    pub fn rules(&self) -> &CombatRules {
        &self.rules
    }

    pub fn level(&self) -> Level {
        self.dynamics.level
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn candidates(&self) -> &[Option<CandidateSet>] {
        &self.candidates
    }

    /// Starts an episode. Contexts are applied on top of the configured
    /// parameters, never on top of a previous episode's contexts.
    pub fn reset(&mut self, contexts: &ContextMap, seed: u64) -> Result<([Vec<f64>; N_AGENTS], ResetInfo), EnvError> {
        let mut dynamics = self.config.dynamics;
        let mut rules = self.config.rules;
        apply_contexts(contexts, &mut dynamics, &mut rules)?;
        rules.tick_limit = self.config.max_steps * self.config.ticks_per_step;
        self.dynamics = dynamics;
        self.rules = rules;
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);

        let poses = std::array::from_fn(|i| self.spawn_pose(i));
        self.world = WorldState::new(poses, &self.rules);
        self.controls = vec![Control::default(); N_ROBOTS];
        self.step_count = 0;
        self.done = false;
        self.reset_called = true;
        self.verdict = Verdict::Ongoing;
        self.refresh_candidates()?;
        let info = ResetInfo {
            seed,
            instance_id: self.config.instance_id,
            level: self.dynamics.level,
            dynamics: self.dynamics,
            rules: self.rules,
        };
        Ok((self.red_observations(), info))
    }

    fn spawn_pose(&mut self, robot: usize) -> Pose {
        let birth = self.arena.birth_areas[robot % self.arena.birth_areas.len()];
        let c = Point::new(birth.center[0], birth.center[1]);
        let heading = if Team::of(robot) == Team::Red { 0.0 } else { PI };
        let j = self.config.spawn_jitter;
        for _ in 0..16 {
            let p = Point::new(c.x + self.rng.random_range(-j..=j), c.y + self.rng.random_range(-j..=j));
            if birth.contains(p) && self.arena.is_free(p, self.arena.inflation) {
                return Pose::new(p.x, p.y, heading);
            }
        }
        Pose::new(c.x, c.y, heading)
    }

    fn refresh_candidates(&mut self) -> Result<(), EnvError> {
        for i in 0..N_ROBOTS {
            let r = &self.world.robots[i];
            if !r.alive() && self.candidates[i].is_some() {
                // keep the set computed around the wreck's last pose
                continue;
            }
            let seed = mix_seed(self.seed, self.step_count as u64, i as u64);
            let set = candidate_points_around(&self.arena, i, r.position(), &self.config.planner, seed)
                .map_err(|e| EnvError::Planning(e.to_string()))?;
            self.candidates[i] = Some(set);
        }
        Ok(())
    }

    /// The two living-or-dead enemies of `robot` in id order.
    fn enemies_of(robot: usize) -> [usize; 2] {
        Team::of(robot).opponent().members()
    }

    /// 37-value observation from the viewpoint of any robot.
    pub fn observe(&self, robot: usize) -> Vec<f64> {
        build_observation(
            &self.world,
            &self.candidates,
            robot,
            &self.arena,
            &self.rules,
            self.config.max_steps - self.step_count.min(self.config.max_steps),
            self.config.max_steps,
        )
    }

    pub fn red_observations(&self) -> [Vec<f64>; N_AGENTS] {
        [self.observe(0), self.observe(1)]
    }

    pub fn blue_observations(&self) -> [Vec<f64>; N_AGENTS] {
        [self.observe(2), self.observe(3)]
    }

    /// The state fed to centralized mixers: agent 0's observation.
    pub fn global_state(&self) -> Vec<f64> {
        self.observe(0)
    }

    /// The rule-based bot's decisions for `team`, expressed as discrete
    /// actions. Dead robots get [`Action::Noop`].
    pub fn bot_policy_actions(&self, team: Team, level: Level) -> [Action; N_AGENTS] {
        let mut out = [Action::Noop; N_AGENTS];
        let goals = bot_goals(level, &self.world, &self.arena, &self.candidates, team, &self.config.planner);
        let members = team.members();
        for (robot, target, goal) in goals {
            let slot = members.iter().position(|&m| m == robot).expect("bot of this team");
            let t = Self::enemies_of(robot).iter().position(|&e| e == target).expect("enemy target");
            let set = self.candidates[target].as_ref().expect("target has candidates");
            let g = set.points.iter().position(|p| *p == goal).expect("goal is a candidate");
            out[slot] = Action::Discrete(2 * g + t);
        }
        out
    }

    fn set_control(&mut self, robot: usize, action: Action) -> Result<(), EnvError> {
        if !self.world.robots[robot].alive() {
            self.controls[robot] = Control::default();
            return Ok(());
        }
        let enemies = Self::enemies_of(robot);
        self.controls[robot] = match action {
            Action::Noop => Control::default(),
            Action::Discrete(index) => {
                let (goal, t) = decode_action(index)?;
                let target = enemies[t];
                let point = self.candidates[target].as_ref().expect("candidates refreshed").points[goal];
                self.control_to(robot, target, point)
            }
            Action::Continuous { vx, vy, omega, target } => {
                if target >= 2 {
                    return Err(EnvError::BadAction(target));
                }
                Control {
                    path: None,
                    direct: Some(Twist::new(vx, vy, omega).clamped()),
                    target: Some(enemies[target]),
                }
            }
        };
        Ok(())
    }

    fn control_to(&self, robot: usize, target: usize, goal: Point) -> Control {
        let here = self.world.robots[robot].position();
        let grid = &self.arena.grid;
        let start = snap_to_free(grid, here);
        let path = start
            .and_then(|s| plan_path(s, goal, grid).ok())
            .filter(|wp| !wp.is_empty())
            .map(|wp| PlannedPath::new(wp, self.config.planner.v_max, self.config.planner.a_max));
        Control { path, direct: None, target: Some(target) }
    }

    fn command(&self, robot: usize) -> Twist {
        let r = &self.world.robots[robot];
        let c = &self.controls[robot];
        let pose = r.pose();
        let mut twist = if let Some(t) = c.direct {
            t
        } else if let Some(path) = &c.path {
            let p = &self.config.planner;
            follow_path(pose, path, p.v_max, p.a_max)
        } else {
            Twist::ZERO
        };
        if c.direct.is_none() {
            twist.omega = match c.target {
                Some(t) if self.world.robots[t].alive() => {
                    aim_rate(pose, self.world.robots[t].position(), self.config.planner.aim_gain)
                }
                _ => 0.0,
            };
        }
        twist
    }

    /// Steps with the configured bot controlling blue.
    pub fn step(&mut self, actions: [Action; N_AGENTS]) -> Result<StepResult, EnvError> {
        self.step_joint(actions, None)
    }

    /// Steps with explicit blue actions, or the bot when `blue` is `None`.
    pub fn step_joint(
        &mut self,
        red: [Action; N_AGENTS],
        blue: Option<[Action; N_AGENTS]>,
    ) -> Result<StepResult, EnvError> {
        if !self.reset_called {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        for a in red.iter().chain(blue.iter().flatten()) {
            if let Action::Discrete(i) = a {
                decode_action(*i)?;
            }
        }
        for (k, a) in red.into_iter().enumerate() {
            self.set_control(Team::Red.members()[k], a)?;
        }
        let mut decisions = Vec::new();
        match blue {
            Some(acts) => {
                for (k, a) in acts.into_iter().enumerate() {
                    self.set_control(Team::Blue.members()[k], a)?;
                }
            }
            None => {
                for m in Team::Blue.members() {
                    self.controls[m] = Control::default();
                }
                decisions = bot_goals(
                    self.dynamics.level,
                    &self.world,
                    &self.arena,
                    &self.candidates,
                    Team::Blue,
                    &self.config.planner,
                );
                for &(robot, target, goal) in &decisions {
                    self.controls[robot] = self.control_to(robot, target, goal);
                }
            }
        }

        let hp_before: [u32; N_ROBOTS] = std::array::from_fn(|i| self.world.robots[i].hp);
        let damage_before = self.world.damage_dealt;
        let mut attempted = [false; N_ROBOTS];
        let mut shots = Vec::new();
        let mut verdict = Verdict::Ongoing;

        for _ in 0..self.config.ticks_per_step {
            self.physics_tick();
            // each robot gets one shot attempt per step, taken at the first
            // tick its target is inside the firing window
            let mut volley = Vec::new();
            for i in 0..N_ROBOTS {
                let Some(t) = self.controls[i].target else { continue };
                if attempted[i] || !self.world.robots[i].alive() {
                    continue;
                }
                if in_firing_window(&self.world, i, t, &self.rules, &self.arena) {
                    attempted[i] = true;
                    volley.push((i, t));
                }
            }
            if !volley.is_empty() {
                let out = resolve_volley(
                    &mut self.world,
                    &volley,
                    &self.rules,
                    &self.dynamics.hit,
                    &self.arena,
                    &mut self.rng,
                )
                .expect("volley pairs are valid enemy pairs");
                shots.extend(out);
            }
            verdict = judge(&self.world, self.world.tick, &self.rules);
            if verdict.is_over() {
                break;
            }
        }
        self.world.events.clear();
        self.step_count += 1;
        if !verdict.is_over() && self.step_count >= self.config.max_steps {
            // the tick budget and the step budget agree unless a step was cut short
            verdict = judge(&self.world, self.rules.tick_limit, &self.rules);
        }

        let mut events = StepEvents::default();
        for team in [Team::Red, Team::Blue] {
            let i = team.index();
            events.damage[i] = self.world.damage_dealt[i] - damage_before[i];
            events.kills[i] = team
                .opponent()
                .members()
                .iter()
                .filter(|&&r| hp_before[r] > 0 && self.world.robots[r].hp == 0)
                .count() as u32;
        }
        let rewards = team_reward(&events, &self.config.weights, verdict);
        self.verdict = verdict;
        self.done = verdict.is_over();
        if !self.done {
            self.refresh_candidates()?;
        }
        Ok(StepResult {
            obs: self.red_observations(),
            reward: rewards[0],
            done: self.done,
            info: StepInfo {
                step: self.step_count,
                verdict,
                rewards,
                events,
                damage_dealt: self.world.damage_dealt,
                shots,
                bot_goals: decisions,
            },
        })
    }

    fn physics_tick(&mut self) {
        let commands: [Twist; N_ROBOTS] = std::array::from_fn(|i| self.command(i));
        let mut live = Vec::with_capacity(N_ROBOTS);
        let mut bodies: Vec<RobotBody> = Vec::with_capacity(N_ROBOTS);
        for (i, cmd) in commands.iter().enumerate() {
            let r = &self.world.robots[i];
            if r.alive() {
                live.push(i);
                bodies.push(physics_tick(&r.body, *cmd, &self.dynamics, TICK_DT));
            }
        }
        resolve_collisions(&mut bodies, &self.arena);
        for (i, b) in live.into_iter().zip(bodies) {
            self.world.robots[i].body = b;
        }
        for r in self.world.robots.iter_mut().filter(|r| !r.alive()) {
            r.body.twist = Twist::ZERO;
            r.body.wheel_speeds = [0.0; 4];
        }
        self.world.tick += 1;
    }
}

/// Observation layout: poses of self, ally, enemy 1, enemy 2 (x, y, theta);
/// the 4 candidates of enemy 1 then enemy 2 (x, y); HP and bullets in the
/// same robot order; remaining steps. Positions are divided by the field
/// size, angles by pi, HP and bullets by their initial values.
pub fn build_observation(
    world: &WorldState,
    candidates: &[Option<CandidateSet>],
    robot: usize,
    arena: &Arena,
    rules: &CombatRules,
    steps_remaining: u32,
    max_steps: u32,
) -> Vec<f64> {
    let team = Team::of(robot);
    let ally = team.members().into_iter().find(|&m| m != robot).expect("two per team");
    let enemies = team.opponent().members();
    let order = [robot, ally, enemies[0], enemies[1]];
    let mut obs = Vec::with_capacity(OBS_DIM);
    for &i in &order {
        let p = world.robots[i].pose();
        obs.extend([p.x / arena.length, p.y / arena.width, p.theta / PI]);
    }
    for &e in &enemies {
        match candidates.get(e).and_then(Option::as_ref) {
            Some(set) => {
                for p in set.points.iter().take(GOALS_PER_ENEMY) {
                    obs.extend([p.x / arena.length, p.y / arena.width]);
                }
            }
            None => obs.extend([0.0; 2 * GOALS_PER_ENEMY]),
        }
    }
    let frac = |v: u32, of: u32| if of == 0 { 0.0 } else { v as f64 / of as f64 };
    for &i in &order {
        obs.push(frac(world.robots[i].hp, rules.hp0));
    }
    for &i in &order {
        obs.push(frac(world.robots[i].bullets, rules.bullets0));
    }
    obs.push(frac(steps_remaining, max_steps));
    debug_assert_eq!(obs.len(), OBS_DIM);
    obs
}
