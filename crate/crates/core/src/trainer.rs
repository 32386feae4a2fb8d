//! Training loop: collect rounds, replay, updates, periodic evaluation,
//! metrics and checkpoints.

use crate::arena::Arena;
use crate::dynamics::Level;
use crate::env::{ContextMap, EnvConfig, N_ACTIONS, N_AGENTS, OBS_DIM};
use crate::marl::checkpoint::{save_checkpoint, Checkpoint, CheckpointMeta, META_SCHEMA_VERSION};
use crate::marl::{Algo, HyperParams, Learner, MarlError, QPolicy, ReplayBuffer};
use crate::rollout::{collect, derive_seed, evaluate, Collection, EpisodeStats, EvalResult, RolloutError, RolloutSetup, WorkerPlan};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use thiserror::Error;

pub const EPISODE_SCHEMA_VERSION: u32 = 1;
pub const METRICS_HEADER: &str = "step,loss,eps,train_win_rate,eval_win_rate";
/// Episodes in the rolling training win rate.
const TRAIN_WINDOW: usize = 100;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Learn(#[from] MarlError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algo: Algo,
    pub level: Level,
    pub seed: u64,
    /// Environment-step budget.
    pub total_steps: u64,
    pub n_workers: usize,
    pub episodes_per_round: usize,
    pub async_mode: bool,
    /// Evaluate every this many environment steps (0: only at the end).
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Metrics row every this many environment steps.
    pub log_interval: u64,
    /// Checkpoint every this many environment steps (0: only at the end).
    pub checkpoint_interval: u64,
    pub hyper: HyperParams,
    pub env: EnvConfig,
    pub contexts: ContextMap,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Vdn,
            level: Level::Easy,
            seed: 0,
            total_steps: 200_000,
            n_workers: 1,
            episodes_per_round: 1,
            async_mode: false,
            eval_interval: 20_000,
            eval_episodes: 100,
            log_interval: 1_000,
            checkpoint_interval: 0,
            hyper: HyperParams::default(),
            env: EnvConfig::default(),
            contexts: ContextMap::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.total_steps == 0 {
            return bad("total_steps must be positive".into());
        }
        if self.n_workers == 0 || self.episodes_per_round == 0 {
            return bad("n_workers and episodes_per_round must be positive".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        if self.log_interval == 0 {
            return bad("log_interval must be positive".into());
        }
        if self.contexts.contains_key("level") {
            return bad("set the level with the level field, not a context".into());
        }
        self.hyper.validate().map_err(TrainError::Config)?;
        self.env.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        let mut d = self.env.dynamics;
        let mut r = self.env.rules;
        crate::env::apply_contexts(&self.contexts, &mut d, &mut r).map_err(|e| TrainError::Config(e.to_string()))
    }

    fn contexts_with_level(&self) -> ContextMap {
        let mut c = self.contexts.clone();
        c.insert("level".into(), self.level.code() as f64);
        c
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub env_steps: u64,
    pub train_steps: u64,
    pub episodes: u64,
    pub final_eval: Option<EvalResult>,
    pub interrupted: bool,
    pub learner: Learner,
}

#[derive(Serialize)]
struct EpisodeLine<'a> {
    schema_version: u32,
    #[serde(flatten)]
    stats: &'a EpisodeStats,
    env_steps: u64,
}

struct Outputs {
    dir: PathBuf,
    metrics: BufWriter<File>,
    episodes: BufWriter<File>,
}

/// Format a float for CSV with the shortest round-trip representation.
fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn checkpoint_of(learner: &Learner) -> Checkpoint {
    Checkpoint { algo: learner.algo, agents: learner.agents.clone(), mixer: learner.mixer.clone() }
}

/// Trains until the step budget is spent or `stop` is raised. With an
/// output directory, writes `metrics.csv`, `episodes.jsonl` and
/// `checkpoint.bin` (+ `checkpoint.json`) there.
pub fn train(
    cfg: &TrainConfig,
    arena: Arc<Arena>,
    out_dir: Option<&Path>,
    stop: &AtomicBool,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mut outputs = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
            writeln!(metrics, "{METRICS_HEADER}")?;
            let episodes = BufWriter::new(File::create(dir.join("episodes.jsonl"))?);
            Some(Outputs { dir: dir.to_path_buf(), metrics, episodes })
        }
        None => None,
    };

    let setup = RolloutSetup { arena, env: cfg.env.clone(), contexts: cfg.contexts_with_level() };
    let plan = WorkerPlan {
        n_workers: cfg.n_workers,
        episodes_per_round: cfg.episodes_per_round,
        base_seed: cfg.seed,
        async_mode: cfg.async_mode,
    };
    let mut learner = Learner::new(cfg.algo, OBS_DIM, N_ACTIONS, N_AGENTS, cfg.hyper.clone(), derive_seed(cfg.seed, 0x6e6e));
    let mut replay = ReplayBuffer::new(cfg.hyper.buffer_capacity);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x7270));

    let mut env_steps = 0u64;
    let mut episodes = 0u64;
    let mut recent: VecDeque<bool> = VecDeque::new();
    let mut loss_sum = 0.0;
    let mut loss_n = 0u64;
    let mut next_log = cfg.log_interval;
    let mut next_eval = if cfg.eval_interval > 0 { cfg.eval_interval } else { u64::MAX };
    let mut next_ckpt = if cfg.checkpoint_interval > 0 { cfg.checkpoint_interval } else { u64::MAX };
    let mut final_eval = None;
    let mut interrupted = false;

    let eval_of = |learner: &Learner| -> Result<EvalResult, TrainError> {
        let policy = QPolicy { algo: learner.algo, agents: learner.agents.clone() };
        Ok(evaluate(&policy, &setup, cfg.eval_episodes, cfg.level, derive_seed(cfg.seed, 0xe7a1), cfg.n_workers)?)
    };

    // In async mode the round in flight was started with the previous
    // snapshot; `pending` holds its result.
    let mut pending: Option<Collection> = None;
    while env_steps < cfg.total_steps {
        if stop.load(Ordering::SeqCst) {
            interrupted = true;
            break;
        }
        let eps = cfg.hyper.epsilon(env_steps);
        let snapshot = QPolicy { algo: learner.algo, agents: learner.agents.clone() };
        let round = if cfg.async_mode {
            let first = match &pending {
                Some(c) => c,
                None => {
                    pending = Some(collect(&snapshot, &setup, &plan, episodes, eps)?);
                    pending.as_ref().expect("just set")
                }
            };
            let next_first = episodes + first.stats.len() as u64;
            let lookahead_eps = cfg.hyper.epsilon(env_steps + first.transitions.len() as u64);
            let (current, next) = std::thread::scope(|s| {
                let h = s.spawn(|| collect(&snapshot, &setup, &plan, next_first, lookahead_eps));
                let current = pending.take().expect("pending round");
                (current, h.join())
            });
            pending = Some(next.map_err(|_| RolloutError::Panic(0))??);
            current
        } else {
            collect(&snapshot, &setup, &plan, episodes, eps)?
        };

        for st in &round.stats {
            episodes += 1;
            recent.push_back(st.won);
            if recent.len() > TRAIN_WINDOW {
                recent.pop_front();
            }
            if let Some(o) = outputs.as_mut() {
                let line = EpisodeLine { schema_version: EPISODE_SCHEMA_VERSION, stats: st, env_steps };
                serde_json::to_writer(&mut o.episodes, &line).map_err(std::io::Error::other)?;
                o.episodes.write_all(b"\n")?;
            }
        }
        for t in round.transitions {
            replay.push(t);
            env_steps += 1;
            if env_steps > cfg.hyper.warmup_steps && replay.len() >= cfg.hyper.batch_size {
                let batch = replay.sample(cfg.hyper.batch_size, &mut sample_rng)?;
                loss_sum += learner.train_step(&batch)?;
                loss_n += 1;
            }
        }

        let mut eval_rate = None;
        let finished = env_steps >= cfg.total_steps;
        if env_steps >= next_eval || finished {
            let r = eval_of(&learner)?;
            eval_rate = Some(r.win_rate);
            final_eval = Some(r);
            while next_eval <= env_steps {
                next_eval = next_eval.saturating_add(cfg.eval_interval);
            }
        }
        if env_steps >= next_log || eval_rate.is_some() {
            let train_rate = recent.iter().filter(|&&w| w).count() as f64 / recent.len().max(1) as f64;
            let loss = (loss_n > 0).then(|| loss_sum / loss_n as f64);
            if let Some(o) = outputs.as_mut() {
                writeln!(
                    o.metrics,
                    "{env_steps},{},{},{},{}",
                    fmt_opt(loss),
                    cfg.hyper.epsilon(env_steps),
                    train_rate,
                    fmt_opt(eval_rate)
                )?;
            }
            loss_sum = 0.0;
            loss_n = 0;
            while next_log <= env_steps {
                next_log += cfg.log_interval;
            }
        }
        if env_steps >= next_ckpt {
            if let Some(o) = outputs.as_ref() {
                write_checkpoint(&o.dir, cfg, &learner, env_steps)?;
            }
            while next_ckpt <= env_steps {
                next_ckpt = next_ckpt.saturating_add(cfg.checkpoint_interval);
            }
        }
    }

    if let Some(mut o) = outputs {
        o.metrics.flush()?;
        o.episodes.flush()?;
        write_checkpoint(&o.dir, cfg, &learner, env_steps)?;
    }
    Ok(TrainOutcome {
        env_steps,
        train_steps: learner.train_steps(),
        episodes,
        final_eval,
        interrupted,
        learner,
    })
}

pub fn write_checkpoint(dir: &Path, cfg: &TrainConfig, learner: &Learner, env_steps: u64) -> Result<(), TrainError> {
    let meta = CheckpointMeta {
        schema_version: META_SCHEMA_VERSION,
        algo: learner.algo,
        env_steps,
        train_steps: learner.train_steps(),
        seed: cfg.seed,
        hyper: cfg.hyper.clone(),
        contexts: cfg.contexts_with_level(),
    };
    save_checkpoint(&dir.join("checkpoint.bin"), &checkpoint_of(learner), &meta)?;
    Ok(())
}
