//! Command execution.

use crate::config::{echo_config, train_config, CliError, Command, RunConfig};
use combat_arena::arena::{load_arena, Arena};
use combat_arena::bench::physics_throughput;
use combat_arena::dynamics::TICK_DT;
use combat_arena::env::{apply_contexts, CombatEnv, N_ACTIONS, N_AGENTS, OBS_DIM};
use combat_arena::marl::checkpoint::{load_checkpoint, Checkpoint};
use combat_arena::marl::{BotPolicy, Policy};
use combat_arena::rollout::{derive_seed, evaluate, run_episode, RolloutSetup, TrajectoryStep};
use combat_arena::server::serve_tcp;
use combat_arena::trainer::{train, EPISODE_SCHEMA_VERSION};
use serde::Serialize;
use serde_json::json;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// One structured log line on stderr.
pub fn log_event(event: &str, fields: serde_json::Value) {
    let mut obj = json!({ "event": event });
    if let (Some(o), serde_json::Value::Object(f)) = (obj.as_object_mut(), fields) {
        o.extend(f);
    }
    eprintln!("{obj}");
}

fn load_arena_for(cfg: &RunConfig) -> Result<Arc<Arena>, CliError> {
    match &cfg.arena {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(runtime)?;
            Ok(Arc::new(load_arena(&text).map_err(|e| CliError::Config(e.to_string()))?))
        }
        None => Ok(Arc::new(Arena::standard())),
    }
}

fn load_policy(path: &Path) -> Result<Checkpoint, CliError> {
    let (ckpt, _) = load_checkpoint(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let shapes_ok = ckpt.agents.len() == N_AGENTS
        && ckpt.agents.iter().all(|a| a.input_dim() == OBS_DIM && a.output_dim() == N_ACTIONS);
    if !shapes_ok {
        return Err(CliError::Config(format!(
            "{}: networks do not match the {OBS_DIM}-input, {N_ACTIONS}-action, {N_AGENTS}-agent environment",
            path.display()
        )));
    }
    Ok(ckpt)
}

/// Executes a validated config. The output directory is created and the
/// resolved config written there before anything else happens.
pub fn run(cfg: &RunConfig, stop: &AtomicBool) -> Result<(), CliError> {
    let echoed = echo_config(cfg)?;
    log_event("config", json!({ "command": cfg.command.name(), "resolved": echoed }));
    match cfg.command {
        Command::Train => run_train(cfg, stop),
        Command::Eval => run_eval(cfg),
        Command::Play => run_play(cfg),
        Command::Bench => run_bench(cfg),
        Command::Serve => run_serve(cfg),
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn run_train(cfg: &RunConfig, stop: &AtomicBool) -> Result<(), CliError> {
    let arena = load_arena_for(cfg)?;
    let out = out_dir(cfg);
    if cfg.workers > cfg.episodes_per_round {
        log_event(
            "warning",
            json!({ "message": "workers beyond episodes_per_round stay idle", "workers": cfg.workers, "episodes_per_round": cfg.episodes_per_round }),
        );
    }
    for &seed in &cfg.seeds {
        let dir = if cfg.seeds.len() > 1 { out.join(format!("seed-{seed}")) } else { out.clone() };
        let tc = train_config(cfg, seed);
        log_event("train_start", json!({ "seed": seed, "algo": tc.algo, "level": tc.level, "steps": tc.total_steps, "out": dir }));
        let outcome = train(&tc, arena.clone(), Some(&dir), stop).map_err(runtime)?;
        let summary = json!({
            "command": "train",
            "seed": seed,
            "env_steps": outcome.env_steps,
            "train_steps": outcome.train_steps,
            "episodes": outcome.episodes,
            "interrupted": outcome.interrupted,
            "eval_win_rate": outcome.final_eval.as_ref().map(|e| e.win_rate),
            "checkpoint": dir.join("checkpoint.bin"),
        });
        println!("{summary}");
        if outcome.interrupted {
            log_event("interrupted", json!({ "seed": seed, "checkpoint": dir.join("checkpoint.bin") }));
            break;
        }
    }
    Ok(())
}

fn setup(cfg: &RunConfig) -> Result<RolloutSetup, CliError> {
    Ok(RolloutSetup { arena: load_arena_for(cfg)?, env: cfg.env.clone(), contexts: cfg.contexts.clone() })
}

fn run_eval(cfg: &RunConfig) -> Result<(), CliError> {
    let path = cfg.checkpoint.as_deref().ok_or_else(|| CliError::Config("eval needs --checkpoint".into()))?;
    let ckpt = load_policy(path)?;
    let policy = ckpt.policy();
    let setup = setup(cfg)?;
    let episodes = cfg.episodes.unwrap_or(cfg.eval_episodes);
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let r = evaluate(&policy, &setup, episodes, cfg.level, seed, cfg.workers).map_err(runtime)?;
        println!(
            "{}",
            json!({ "command": "eval", "algo": ckpt.algo, "level": cfg.level, "seed": seed, "win_rate": r.win_rate, "result": r })
        );
        results.push(json!({ "seed": seed, "result": r }));
    }
    let text = serde_json::to_string_pretty(&results).map_err(runtime)?;
    std::fs::write(out_dir(cfg).join("eval.json"), text).map_err(runtime)
}

#[derive(Serialize)]
struct StepLine<'a> {
    schema_version: u32,
    kind: &'static str,
    episode: u64,
    #[serde(flatten)]
    step: &'a TrajectoryStep,
}

fn run_play(cfg: &RunConfig) -> Result<(), CliError> {
    let setup = setup(cfg)?;
    let (policy, red): (Box<dyn Policy>, String) = match &cfg.checkpoint {
        Some(p) => {
            let ckpt = load_policy(p)?;
            (Box::new(ckpt.policy()), format!("checkpoint:{}", p.display()))
        }
        None => (Box::new(BotPolicy(cfg.red_level)), format!("bot:{}", cfg.red_level.name())),
    };
    let mut contexts = setup.contexts.clone();
    contexts.insert("level".into(), cfg.level.code() as f64);
    let dir = out_dir(cfg).join("trajectories");
    std::fs::create_dir_all(&dir).map_err(runtime)?;
    let mut env = CombatEnv::new(setup.arena.clone(), setup.env.clone()).map_err(runtime)?;
    let base = cfg.seeds[0];
    let episodes = cfg.episodes.unwrap_or(10) as u64;
    let mut wins = 0;
    for e in 0..episodes {
        let seed = derive_seed(base, e);
        let ep = run_episode(&mut env, policy.as_ref(), &contexts, e, seed, 0.0, true).map_err(runtime)?;
        let path = dir.join(format!("episode_{e:04}.jsonl"));
        let mut w = BufWriter::new(File::create(&path).map_err(runtime)?);
        let header = json!({
            "schema_version": EPISODE_SCHEMA_VERSION,
            "kind": "header",
            "episode": e,
            "seed": seed,
            "red": red,
            "blue_level": cfg.level,
            "dynamics": env.dynamics(),
            "rules": env.rules(),
            "arena": { "length": env.arena().length, "width": env.arena().width },
        });
        writeln!(w, "{header}").map_err(runtime)?;
        for step in &ep.trajectory {
            let line = StepLine { schema_version: EPISODE_SCHEMA_VERSION, kind: "step", episode: e, step };
            serde_json::to_writer(&mut w, &line).map_err(runtime)?;
            writeln!(w).map_err(runtime)?;
        }
        let summary = json!({ "schema_version": EPISODE_SCHEMA_VERSION, "kind": "summary", "stats": ep.stats });
        writeln!(w, "{summary}").map_err(runtime)?;
        w.flush().map_err(runtime)?;
        wins += ep.stats.won as u64;
        log_event("episode", json!({ "episode": e, "length": ep.stats.length, "verdict": ep.stats.verdict, "file": path }));
    }
    println!(
        "{}",
        json!({ "command": "play", "episodes": episodes, "red": red, "blue_level": cfg.level, "red_wins": wins, "dir": dir })
    );
    Ok(())
}

fn run_bench(cfg: &RunConfig) -> Result<(), CliError> {
    let arena = match &cfg.arena {
        Some(_) => load_arena_for(cfg)?,
        None => Arc::new(Arena::empty(8.1, 5.1)),
    };
    let mut dynamics = cfg.env.dynamics;
    let mut rules = cfg.env.rules;
    apply_contexts(&cfg.contexts, &mut dynamics, &mut rules).map_err(|e| CliError::Config(e.to_string()))?;
    let r = physics_throughput(&arena, &dynamics, cfg.bench_ticks);
    let line = json!({
        "command": "bench",
        "ticks": r.ticks,
        "seconds": r.seconds,
        "ticks_per_sec": r.ticks_per_sec,
        "real_time_factor": r.ticks_per_sec * TICK_DT,
    });
    println!("{line}");
    std::fs::write(out_dir(cfg).join("bench.json"), line.to_string()).map_err(runtime)
}

fn run_serve(cfg: &RunConfig) -> Result<(), CliError> {
    let arena = load_arena_for(cfg)?;
    let listener = TcpListener::bind(("127.0.0.1", cfg.port)).map_err(runtime)?;
    let addr = listener.local_addr().map_err(runtime)?;
    println!("{}", json!({ "command": "serve", "listening": addr.to_string() }));
    serve_tcp(listener, arena, cfg.env.clone(), None).map_err(runtime)
}
