//! Run configuration: TOML file, flag overrides, validation and echo.

use clap::{Parser, ValueEnum};
use combat_arena::dynamics::Level;
use combat_arena::env::{apply_contexts, ContextMap, EnvConfig};
use combat_arena::marl::{Algo, HyperParams};
use combat_arena::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// File name of the resolved-config echo inside the output directory.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime fault: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    #[default]
    Train,
    Eval,
    Play,
    Bench,
    /// Line-delimited JSON environment server on localhost.
    Serve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Play => "play",
            Command::Bench => "bench",
            Command::Serve => "serve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub algo: Algo,
    /// Blue bot difficulty.
    pub level: Level,
    /// One training run (or evaluation) per seed.
    pub seeds: Vec<u64>,
    /// Environment-step budget for training.
    pub steps: u64,
    pub workers: usize,
    pub episodes_per_round: usize,
    pub async_mode: bool,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub log_interval: u64,
    pub checkpoint_interval: u64,
    /// Episodes for eval and play; filled per command when absent.
    pub episodes: Option<usize>,
    /// Red bot difficulty for play when no checkpoint is given.
    pub red_level: Level,
    pub bench_ticks: u64,
    pub port: u16,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Arena spec file; the standard arena when absent.
    pub arena: Option<PathBuf>,
    pub hyper: HyperParams,
    pub env: EnvConfig,
    pub contexts: ContextMap,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            command: Command::Train,
            algo: t.algo,
            level: t.level,
            seeds: vec![0],
            steps: t.total_steps,
            workers: t.n_workers,
            episodes_per_round: t.episodes_per_round,
            async_mode: t.async_mode,
            eval_interval: t.eval_interval,
            eval_episodes: t.eval_episodes,
            log_interval: t.log_interval,
            checkpoint_interval: t.checkpoint_interval,
            episodes: None,
            red_level: Level::Easy,
            bench_ticks: 20_000,
            port: 5555,
            out: None,
            checkpoint: None,
            arena: None,
            hyper: t.hyper,
            env: t.env,
            contexts: ContextMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Parser)]
#[command(name = "combat-arena", version, about = "Train, evaluate and play in the 2-vs-2 combat arena")]
pub struct Cli {
    /// What to run; taken from the config file when omitted.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub algo: Option<Algo>,
    #[arg(long)]
    pub level: Option<Level>,
    /// Replaces the seed list with this single seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Context override, KEY=VALUE; repeatable.
    #[arg(long = "context", value_name = "KEY=VALUE")]
    pub contexts: Vec<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Red bot difficulty for play.
    #[arg(long = "red")]
    pub red_level: Option<Level>,
    /// World ticks for bench.
    #[arg(long)]
    pub ticks: Option<u64>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub arena: Option<PathBuf>,
}

fn parse_context(s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| config_err(format!("context {s:?} is not KEY=VALUE")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| config_err(format!("context {k}: {v:?} is not a number")))?;
    Ok((k.trim().to_string(), v))
}

/// Merges the file (if any) with flag overrides, normalizes contexts and
/// validates the result. Touches neither the filesystem nor any
/// environment, so it is safe to call before deciding to run.
pub fn parse_config(file_text: Option<&str>, cli: &Cli) -> Result<RunConfig, CliError> {
    let mut file_has_command = false;
    let mut cfg = match file_text {
        Some(text) => {
            let table: toml::Table = toml::from_str(text).map_err(config_err)?;
            file_has_command = table.contains_key("command");
            toml::from_str::<RunConfig>(text).map_err(config_err)?
        }
        None => RunConfig::default(),
    };
    match cli.command {
        Some(c) => cfg.command = c,
        None if file_has_command => {}
        None => return Err(config_err("no command given on the command line or in the config file")),
    }
    if let Some(a) = cli.algo {
        cfg.algo = a;
    }
    if let Some(l) = cli.level {
        cfg.level = l;
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.steps {
        cfg.steps = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(c) = &cli.checkpoint {
        cfg.checkpoint = Some(c.clone());
    }
    if let Some(e) = cli.episodes {
        cfg.episodes = Some(e);
    }
    if let Some(r) = cli.red_level {
        cfg.red_level = r;
    }
    if let Some(t) = cli.ticks {
        cfg.bench_ticks = t;
    }
    if let Some(p) = cli.port {
        cfg.port = p;
    }
    if let Some(a) = &cli.arena {
        cfg.arena = Some(a.clone());
    }
    for c in &cli.contexts {
        let (k, v) = parse_context(c)?;
        cfg.contexts.insert(k, v);
    }
    normalize_contexts(&mut cfg)?;
    if cfg.episodes.is_none() {
        cfg.episodes = Some(if cfg.command == Command::Play { 10 } else { cfg.eval_episodes });
    }
    if cfg.out.is_none() {
        cfg.out = Some(PathBuf::from("runs").join(cfg.command.name()));
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// Renames the `VK1` alias to `mu_slide` and moves a `level` context into
/// the level field.
fn normalize_contexts(cfg: &mut RunConfig) -> Result<(), CliError> {
    if let Some(v) = cfg.contexts.remove("VK1") {
        cfg.contexts.entry("mu_slide".into()).or_insert(v);
    }
    if let Some(v) = cfg.contexts.remove("level") {
        cfg.level = (v.fract() == 0.0 && (1.0..=3.0).contains(&v))
            .then(|| Level::from_code(v as u8))
            .flatten()
            .ok_or_else(|| config_err(format!("context level = {v} is not 1, 2 or 3")))?;
    }
    Ok(())
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.seeds.is_empty() {
        return Err(config_err("seeds must not be empty"));
    }
    if cfg.episodes == Some(0) {
        return Err(config_err("episodes must be positive"));
    }
    if cfg.bench_ticks == 0 {
        return Err(config_err("bench_ticks must be positive"));
    }
    let mut d = cfg.env.dynamics;
    let mut r = cfg.env.rules;
    apply_contexts(&cfg.contexts, &mut d, &mut r).map_err(config_err)?;
    train_config(cfg, cfg.seeds[0]).validate().map_err(config_err)?;
    if let Some(a) = &cfg.arena {
        if !a.is_file() {
            return Err(config_err(format!("arena file {} not found", a.display())));
        }
    }
    match (&cfg.checkpoint, cfg.command) {
        (None, Command::Eval) => Err(config_err("eval needs --checkpoint")),
        (Some(p), Command::Eval | Command::Play) if !p.is_file() => {
            Err(config_err(format!("checkpoint {} not found", p.display())))
        }
        _ => Ok(()),
    }
}

/// The trainer's view of a run for one seed.
pub fn train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        algo: cfg.algo,
        level: cfg.level,
        seed,
        total_steps: cfg.steps,
        n_workers: cfg.workers,
        episodes_per_round: cfg.episodes_per_round,
        async_mode: cfg.async_mode,
        eval_interval: cfg.eval_interval,
        eval_episodes: cfg.eval_episodes,
        log_interval: cfg.log_interval,
        checkpoint_interval: cfg.checkpoint_interval,
        hyper: cfg.hyper.clone(),
        env: cfg.env.clone(),
        contexts: cfg.contexts.clone(),
    }
}

pub fn to_toml(cfg: &RunConfig) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
}

/// Creates the output directory and writes the resolved config into it.
pub fn echo_config(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg.out.as_deref().unwrap_or(Path::new("."));
    let runtime = |e: std::io::Error| CliError::Runtime(format!("output directory {}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(runtime)?;
    let path = out.join(RESOLVED_CONFIG);
    std::fs::write(&path, to_toml(cfg)?).map_err(runtime)?;
    Ok(path)
}
