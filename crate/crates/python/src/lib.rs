//! Python bindings: the arena, the two-agent environment, greedy policies
//! from checkpoints, and one-call training and evaluation.
//!
//! ```python
//! import combat_arena_py as ca
//! env = ca.CombatEnv()
//! obs, info = env.reset({"level": 2, "VK1": 0.3}, seed=1)
//! while not env.done:
//!     obs, reward, done, info = env.step([0, 5])
//! ```

use combat_arena::arena::{load_arena, Arena};
use combat_arena::dynamics::Level;
use combat_arena::env::{context_keys, Action, CombatEnv, ContextMap, EnvConfig, N_ACTIONS, N_AGENTS, OBS_DIM};
use combat_arena::marl::checkpoint::load_checkpoint;
use combat_arena::marl::net::argmax;
use combat_arena::marl::{Algo, QPolicy};
use combat_arena::referee::{hit_probability as hit_p, HitParams};
use combat_arena::rollout::{evaluate as eval_policy, RolloutSetup};
use combat_arena::trainer::{train as run_training, TrainConfig};
use combat_arena::world::Team;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Serializable value -> plain Python objects (dicts, lists, numbers).
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_level(s: &str) -> PyResult<Level> {
    s.parse().map_err(value_err)
}

fn parse_team(s: &str) -> PyResult<Team> {
    match s.to_ascii_lowercase().as_str() {
        "red" => Ok(Team::Red),
        "blue" => Ok(Team::Blue),
        other => Err(PyValueError::new_err(format!("unknown team {other:?}, expected red or blue"))),
    }
}

#[pyclass(name = "Arena", frozen)]
struct PyArena {
    inner: Arc<Arena>,
}

#[pymethods]
impl PyArena {
    /// The standard 8.1 m x 5.1 m field with nine obstacles.
    #[staticmethod]
    fn standard() -> Self {
        Self { inner: Arc::new(Arena::standard()) }
    }

    /// Parses an arena spec file's text.
    #[staticmethod]
    fn from_spec(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(load_arena(text).map_err(value_err)?) })
    }

    #[staticmethod]
    fn empty(length: f64, width: f64) -> Self {
        Self { inner: Arc::new(Arena::empty(length, width)) }
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn width(&self) -> f64 {
        self.inner.width
    }

    #[getter]
    fn obstacle_count(&self) -> usize {
        self.inner.obstacles.len()
    }

    fn spec_text(&self) -> String {
        self.inner.to_spec_text()
    }

    /// True when a robot centered at (x, y) clears walls and obstacles.
    fn is_free(&self, x: f64, y: f64) -> bool {
        self.inner.is_free(combat_arena::geometry::Point::new(x, y), self.inner.inflation)
    }
}

#[pyclass(name = "CombatEnv")]
struct PyEnv {
    inner: CombatEnv,
}

#[pymethods]
impl PyEnv {
    /// `config_json` takes the environment config as JSON; omitted fields
    /// keep their defaults.
    #[new]
    #[pyo3(signature = (arena=None, config_json=None))]
    fn new(arena: Option<&PyArena>, config_json: Option<&str>) -> PyResult<Self> {
        let arena = arena.map(|a| a.inner.clone()).unwrap_or_else(|| Arc::new(Arena::standard()));
        let config: EnvConfig = match config_json {
            Some(t) => serde_json::from_str(t).map_err(value_err)?,
            None => EnvConfig::default(),
        };
        Ok(Self { inner: CombatEnv::new(arena, config).map_err(value_err)? })
    }

    /// Returns `(observations, info)`; observations hold one 37-vector per
    /// red agent.
    #[pyo3(signature = (contexts=None, seed=0))]
    fn reset(&mut self, py: Python<'_>, contexts: Option<ContextMap>, seed: u64) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
        let (obs, info) = self.inner.reset(&contexts.unwrap_or_default(), seed).map_err(value_err)?;
        Ok((obs.to_vec(), to_py(py, &info)?))
    }

    /// One step for both red agents. Each action is an index in
    /// `0..n_actions`, or None to stand still.
    fn step(&mut self, py: Python<'_>, actions: Vec<Option<usize>>) -> PyResult<(Vec<Vec<f64>>, f64, bool, Py<PyAny>)> {
        if actions.len() != N_AGENTS {
            return Err(PyValueError::new_err(format!("expected {N_AGENTS} actions, got {}", actions.len())));
        }
        let joint = [0, 1].map(|i| actions[i].map_or(Action::Noop, Action::Discrete));
        let r = self.inner.step(joint).map_err(value_err)?;
        Ok((r.obs.to_vec(), r.reward, r.done, to_py(py, &r.info)?))
    }

    /// What the rule-based bot of `level` would do for `team` now.
    fn bot_actions(&self, team: &str, level: &str) -> PyResult<Vec<Option<usize>>> {
        let acts = self.inner.bot_policy_actions(parse_team(team)?, parse_level(level)?);
        Ok(acts
            .iter()
            .map(|a| match a {
                Action::Discrete(i) => Some(*i),
                _ => None,
            })
            .collect())
    }

    fn observe(&self, robot: usize) -> PyResult<Vec<f64>> {
        if robot >= 4 {
            return Err(PyValueError::new_err("robot index must be 0..4"));
        }
        Ok(self.inner.observe(robot))
    }

    fn global_state(&self) -> Vec<f64> {
        self.inner.global_state()
    }

    /// Poses as `(x, y, theta)` for robots 0..4 (red first).
    fn poses(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .world()
            .robots
            .iter()
            .map(|r| {
                let p = r.pose();
                (p.x, p.y, p.theta)
            })
            .collect()
    }

    fn hp(&self) -> Vec<u32> {
        self.inner.world().robots.iter().map(|r| r.hp).collect()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn step_count(&self) -> u32 {
        self.inner.step_count()
    }

    #[getter]
    fn verdict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.verdict())
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    #[getter]
    fn n_actions(&self) -> usize {
        N_ACTIONS
    }
}

/// Greedy decentralized policy read from a checkpoint file.
#[pyclass(name = "Policy", frozen)]
struct PyPolicy {
    inner: QPolicy,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (ckpt, _) = load_checkpoint(Path::new(path)).map_err(value_err)?;
        Ok(Self { inner: ckpt.policy() })
    }

    #[getter]
    fn algo(&self) -> String {
        self.inner.algo.to_string()
    }

    fn q_values(&self, agent: usize, obs: Vec<f64>) -> PyResult<Vec<f64>> {
        let net = self.inner.agents.get(agent).ok_or_else(|| PyValueError::new_err("no such agent"))?;
        if obs.len() != net.input_dim() {
            return Err(PyValueError::new_err(format!("expected {} inputs, got {}", net.input_dim(), obs.len())));
        }
        Ok(self.inner.q_values(agent, &obs))
    }

    /// Greedy action per agent.
    fn act(&self, obs: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        obs.into_iter()
            .enumerate()
            .map(|(i, o)| self.q_values(i, o).map(|q| argmax(&q)))
            .collect()
    }
}

/// Trains against a bot and returns a summary dict. Writes metrics,
/// episode log and checkpoint when `out_dir` is given. The GIL is released
/// while training runs.
#[pyfunction]
#[pyo3(signature = (algo="vdn", level="easy", steps=200_000, seed=0, eval_episodes=100, out_dir=None))]
fn train(
    py: Python<'_>,
    algo: &str,
    level: &str,
    steps: u64,
    seed: u64,
    eval_episodes: usize,
    out_dir: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let cfg = TrainConfig {
        algo: algo.parse::<Algo>().map_err(value_err)?,
        level: parse_level(level)?,
        seed,
        total_steps: steps,
        eval_interval: 0,
        eval_episodes,
        ..TrainConfig::default()
    };
    let out = out_dir.map(Path::new);
    let stop = AtomicBool::new(false);
    let outcome = py
        .detach(|| run_training(&cfg, Arc::new(Arena::standard()), out, &stop))
        .map_err(runtime_err)?;
    let summary = serde_json::json!({
        "env_steps": outcome.env_steps,
        "train_steps": outcome.train_steps,
        "episodes": outcome.episodes,
        "eval": outcome.final_eval,
    });
    to_py(py, &summary)
}

/// Greedy evaluation of a checkpoint against the bot of `level`.
#[pyfunction]
#[pyo3(signature = (checkpoint, level="easy", episodes=100, seed=0, workers=1))]
fn evaluate(py: Python<'_>, checkpoint: &str, level: &str, episodes: usize, seed: u64, workers: usize) -> PyResult<Py<PyAny>> {
    let policy = PyPolicy::load(checkpoint)?.inner;
    let level = parse_level(level)?;
    let setup = RolloutSetup { arena: Arc::new(Arena::standard()), env: EnvConfig::default(), contexts: ContextMap::new() };
    let r = py
        .detach(|| eval_policy(&policy, &setup, episodes, level, seed, workers))
        .map_err(runtime_err)?;
    to_py(py, &r)
}

/// Hit probability at distance `d` under the default hit parameters.
#[pyfunction]
fn hit_probability(d: f64) -> PyResult<f64> {
    if !(d >= 0.0) {
        return Err(PyValueError::new_err("distance must be non-negative"));
    }
    Ok(hit_p(d, &HitParams::default()))
}

/// Names accepted in `CombatEnv.reset(contexts=...)`.
#[pyfunction(name = "context_keys")]
fn py_context_keys() -> Vec<&'static str> {
    context_keys()
}

#[pymodule]
pub fn combat_arena_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArena>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(hit_probability, m)?)?;
    m.add_function(wrap_pyfunction!(py_context_keys, m)?)?;
    m.add("OBS_DIM", OBS_DIM)?;
    m.add("N_ACTIONS", N_ACTIONS)?;
    m.add("N_AGENTS", N_AGENTS)?;
    Ok(())
}
