//! Line-delimited JSON access to an environment for external policies.
//!
//! Each request is one JSON object per line and gets one JSON reply line:
//!
//! ```text
//! {"cmd":"reset","seed":3,"contexts":{"level":2}}
//! {"cmd":"step","actions":[5,2]}
//! {"cmd":"close"}
//! ```
//!
//! Replies carry `"ok": true` plus the observations (and reward, done and
//! info after a step), or `"ok": false` with an `"error"` message.

use crate::arena::Arena;
use crate::env::{Action, CombatEnv, ContextMap, EnvConfig, N_AGENTS};
use serde::Deserialize;
use serde_json::{json, Value};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::sync::Arc;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WireAction {
    Index(usize),
    Full(Action),
}

impl From<WireAction> for Action {
    fn from(w: WireAction) -> Action {
        match w {
            WireAction::Index(i) => Action::Discrete(i),
            WireAction::Full(a) => a,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase", deny_unknown_fields)]
enum Request {
    Reset {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        contexts: ContextMap,
    },
    Step {
        actions: [WireAction; N_AGENTS],
    },
    Close,
}

fn handle(env: &mut CombatEnv, line: &str) -> (Value, bool) {
    let req: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return (json!({"ok": false, "error": format!("bad request: {e}")}), false),
    };
    match req {
        Request::Reset { seed, contexts } => match env.reset(&contexts, seed) {
            Ok((obs, info)) => (json!({"ok": true, "obs": obs, "info": info}), false),
            Err(e) => (json!({"ok": false, "error": e.to_string()}), false),
        },
        Request::Step { actions } => match env.step(actions.map(Action::from)) {
            Ok(r) => (
                json!({"ok": true, "obs": r.obs, "reward": r.reward, "done": r.done, "info": r.info}),
                false,
            ),
            Err(e) => (json!({"ok": false, "error": e.to_string()}), false),
        },
        Request::Close => (json!({"ok": true}), true),
    }
}

/// Serves requests from `reader` until end of input or a close request.
pub fn serve_stream<R: BufRead, W: Write>(env: &mut CombatEnv, reader: R, mut writer: W) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (reply, close) = handle(env, &line);
        serde_json::to_writer(&mut writer, &reply)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if close {
            break;
        }
    }
    Ok(())
}

/// Accepts connections one after another, each with a fresh environment.
/// Stops after `max_connections` when given.
pub fn serve_tcp(
    listener: TcpListener,
    arena: Arc<Arena>,
    config: EnvConfig,
    max_connections: Option<usize>,
) -> io::Result<()> {
    let mut served = 0;
    for stream in listener.incoming() {
        let stream = stream?;
        let mut env = CombatEnv::new(arena.clone(), config.clone())
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        let reader = BufReader::new(stream.try_clone()?);
        serve_stream(&mut env, reader, BufWriter::new(stream))?;
        served += 1;
        if max_connections.is_some_and(|m| served >= m) {
            break;
        }
    }
    Ok(())
}
