//! Experience collection and evaluation over independent environment
//! instances on scoped worker threads.
//!
//! Every episode's environment seed and action rng depend only on its
//! global index, so merging worker results in episode order reproduces the
//! serial run regardless of the worker count.

use crate::arena::Arena;
use crate::dynamics::Level;
use crate::env::{Action, CombatEnv, ContextMap, EnvConfig, EnvError, N_AGENTS};
use crate::geometry::Pose;
use crate::marl::{Policy, Transition};
use crate::referee::{ShotOutcome, Verdict};
use crate::world::Team;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("worker {worker} failed on episode {episode}: {message}")]
    Worker { worker: usize, episode: u64, message: String },
    #[error("worker {0} panicked")]
    Panic(usize),
    #[error("invalid worker plan: {0}")]
    Plan(String),
}

/// splitmix64 finalizer over a base seed and a salt.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base.wrapping_add(salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TRAIN_SALT: u64 = 0x7472_6169_6e00_0000;
const EVAL_SALT: u64 = 0x6576_616c_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerPlan {
    pub n_workers: usize,
    pub episodes_per_round: usize,
    pub base_seed: u64,
    /// Overlap collection with training, acting with the snapshot from one
    /// round earlier.
    pub async_mode: bool,
}

impl WorkerPlan {
    pub fn new(n_workers: usize, base_seed: u64) -> Self {
        Self { n_workers, episodes_per_round: n_workers, base_seed, async_mode: false }
    }

    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.n_workers == 0 || self.episodes_per_round == 0 {
            return Err(RolloutError::Plan("workers and episodes per round must be positive".into()));
        }
        Ok(())
    }

    /// Seed label of a worker; distinct across workers of one plan.
    pub fn worker_seed(&self, worker: usize) -> u64 {
        derive_seed(self.base_seed, worker as u64)
    }

    /// Seed of training episode `index`.
    pub fn episode_seed(&self, index: u64) -> u64 {
        derive_seed(self.base_seed ^ TRAIN_SALT, index)
    }

    /// Contiguous blocks of `n` episodes, one per worker (some may be empty).
    pub fn blocks(&self, n: usize) -> Vec<Range<usize>> {
        let w = self.n_workers.max(1);
        let (q, r) = (n / w, n % w);
        let mut start = 0;
        (0..w)
            .map(|i| {
                let len = q + usize::from(i < r);
                let block = start..start + len;
                start += len;
                block
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: u64,
    pub seed: u64,
    /// Undiscounted red-team return.
    pub episode_return: f64,
    pub length: u32,
    pub verdict: Verdict,
    pub won: bool,
    pub damage_dealt: [u32; 2],
}

/// One environment step as logged for offline analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: u32,
    pub tick: u32,
    pub actions: [usize; N_AGENTS],
    pub poses: Vec<Pose>,
    pub hp: Vec<u32>,
    pub bullets: Vec<u32>,
    pub shots: Vec<ShotOutcome>,
    pub rewards: [f64; 2],
    pub verdict: Verdict,
}

pub struct EpisodeOutput {
    pub transitions: Vec<Transition>,
    pub stats: EpisodeStats,
    pub trajectory: Vec<TrajectoryStep>,
}

/// Plays one episode of `policy` (red) against the env's configured bot.
pub fn run_episode(
    env: &mut CombatEnv,
    policy: &dyn Policy,
    contexts: &ContextMap,
    episode: u64,
    seed: u64,
    eps: f64,
    record: bool,
) -> Result<EpisodeOutput, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let (mut obs, _) = env.reset(contexts, seed)?;
    let mut transitions = Vec::new();
    let mut trajectory = Vec::new();
    let mut ret = 0.0;
    loop {
        let actions = policy.act(env, &obs, eps, &mut rng);
        let r = env.step(actions.map(Action::Discrete))?;
        ret += r.reward;
        if record {
            let w = env.world();
            trajectory.push(TrajectoryStep {
                step: r.info.step,
                tick: w.tick,
                actions,
                poses: w.robots.iter().map(|x| x.pose()).collect(),
                hp: w.robots.iter().map(|x| x.hp).collect(),
                bullets: w.robots.iter().map(|x| x.bullets).collect(),
                shots: r.info.shots.clone(),
                rewards: r.info.rewards,
                verdict: r.info.verdict,
            });
        }
        transitions.push(Transition {
            obs: obs.to_vec(),
            actions: actions.to_vec(),
            reward: r.reward,
            next_obs: r.obs.to_vec(),
            done: r.done,
        });
        obs = r.obs;
        if r.done {
            let verdict = r.info.verdict;
            let stats = EpisodeStats {
                episode,
                seed,
                episode_return: ret,
                length: r.info.step,
                verdict,
                won: verdict.winner() == Some(Team::Red),
                damage_dealt: r.info.damage_dealt,
            };
            return Ok(EpisodeOutput { transitions, stats, trajectory });
        }
    }
}

/// Shared inputs of a collection or evaluation round.
#[derive(Clone)]
pub struct RolloutSetup {
    pub arena: Arc<Arena>,
    pub env: EnvConfig,
    pub contexts: ContextMap,
}

#[derive(Debug, Clone, Default)]
pub struct Collection {
    pub transitions: Vec<Transition>,
    pub stats: Vec<EpisodeStats>,
}

/// Runs episodes `first_episode .. first_episode + n` split over the plan's
/// workers; results come back in episode order.
pub fn run_episodes(
    policy: &dyn Policy,
    setup: &RolloutSetup,
    plan: &WorkerPlan,
    seeds: &[(u64, u64)],
    eps: f64,
) -> Result<Collection, RolloutError> {
    plan.validate()?;
    let blocks = plan.blocks(seeds.len());
    let results: Vec<Result<Collection, RolloutError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = blocks
            .iter()
            .enumerate()
            .map(|(w, block)| {
                let block = block.clone();
                scope.spawn(move || -> Result<Collection, RolloutError> {
                    let mut out = Collection::default();
                    if block.is_empty() {
                        return Ok(out);
                    }
                    let mut cfg = setup.env.clone();
                    cfg.instance_id = w as u32;
                    let fail = |episode: u64, e: EnvError| RolloutError::Worker { worker: w, episode, message: e.to_string() };
                    let mut env = CombatEnv::new(setup.arena.clone(), cfg).map_err(|e| fail(seeds[block.start].0, e))?;
                    for &(episode, seed) in &seeds[block] {
                        let ep = run_episode(&mut env, policy, &setup.contexts, episode, seed, eps, false)
                            .map_err(|e| fail(episode, e))?;
                        out.transitions.extend(ep.transitions);
                        out.stats.push(ep.stats);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(w, h)| h.join().unwrap_or(Err(RolloutError::Panic(w))))
            .collect()
    });
    let mut merged = Collection::default();
    for r in results {
        let c = r?;
        merged.transitions.extend(c.transitions);
        merged.stats.extend(c.stats);
    }
    Ok(merged)
}

/// Collects `plan.episodes_per_round` training episodes starting at global
/// index `first_episode`.
pub fn collect(
    policy: &dyn Policy,
    setup: &RolloutSetup,
    plan: &WorkerPlan,
    first_episode: u64,
    eps: f64,
) -> Result<Collection, RolloutError> {
    let seeds: Vec<(u64, u64)> = (first_episode..first_episode + plan.episodes_per_round as u64)
        .map(|e| (e, plan.episode_seed(e)))
        .collect();
    run_episodes(policy, setup, plan, &seeds, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub episodes: usize,
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    /// Wins over all episodes; draws count as non-wins.
    pub win_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
}

impl EvalResult {
    pub fn from_stats(stats: &[EpisodeStats]) -> Self {
        let n = stats.len();
        let wins = stats.iter().filter(|s| s.won).count();
        let draws = stats.iter().filter(|s| s.verdict == Verdict::Draw).count();
        let denom = n.max(1) as f64;
        Self {
            episodes: n,
            wins,
            draws,
            losses: n - wins - draws,
            win_rate: wins as f64 / denom,
            mean_return: stats.iter().map(|s| s.episode_return).sum::<f64>() / denom,
            mean_length: stats.iter().map(|s| s.length as f64).sum::<f64>() / denom,
        }
    }
}

/// Greedy evaluation against the bot of `level` over `n_episodes`
/// distinct seeds.
pub fn evaluate(
    policy: &dyn Policy,
    setup: &RolloutSetup,
    n_episodes: usize,
    level: Level,
    seed: u64,
    n_workers: usize,
) -> Result<EvalResult, RolloutError> {
    if n_episodes == 0 {
        return Err(RolloutError::Plan("evaluation needs at least one episode".into()));
    }
    let mut s = setup.clone();
    s.contexts.insert("level".into(), level.code() as f64);
    let plan = WorkerPlan::new(n_workers, seed);
    let seeds: Vec<(u64, u64)> = (0..n_episodes as u64)
        .map(|e| (e, derive_seed(seed ^ EVAL_SALT, e)))
        .collect();
    let c = run_episodes(policy, &s, &plan, &seeds, 0.0)?;
    Ok(EvalResult::from_stats(&c.stats))
}
