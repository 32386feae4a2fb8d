//! Acting policies for the red team.

use super::learner::Algo;
use super::net::{argmax, Mlp};
use crate::dynamics::Level;
use crate::env::{Action, CombatEnv, N_ACTIONS, N_AGENTS};
use crate::world::Team;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Uniform action with probability `eps`, otherwise the greedy action.
/// The rng is untouched when `eps` is 0.
pub fn epsilon_greedy<R: Rng>(q: &[f64], eps: f64, rng: &mut R) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Chooses discrete action indices for both red agents.
pub trait Policy: Send + Sync {
    fn act(&self, env: &CombatEnv, obs: &[Vec<f64>; N_AGENTS], eps: f64, rng: &mut ChaCha8Rng) -> [usize; N_AGENTS];

    fn name(&self) -> String;
}

/// Decentralized greedy policy over per-agent Q-networks. Immutable, so a
/// copy can be handed to every rollout worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolicy {
    pub algo: Algo,
    pub agents: Vec<Mlp>,
}

impl QPolicy {
    pub fn q_values(&self, agent: usize, obs: &[f64]) -> Vec<f64> {
        self.agents[agent].forward(obs)
    }
}

impl Policy for QPolicy {
    fn act(&self, _env: &CombatEnv, obs: &[Vec<f64>; N_AGENTS], eps: f64, rng: &mut ChaCha8Rng) -> [usize; N_AGENTS] {
        std::array::from_fn(|i| epsilon_greedy(&self.agents[i].forward(&obs[i]), eps, rng))
    }

    fn name(&self) -> String {
        self.algo.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, _env: &CombatEnv, _obs: &[Vec<f64>; N_AGENTS], _eps: f64, rng: &mut ChaCha8Rng) -> [usize; N_AGENTS] {
        std::array::from_fn(|_| rng.random_range(0..N_ACTIONS))
    }

    fn name(&self) -> String {
        "random".into()
    }
}

/// A rule-based bot playing the red side. Exploration is ignored.
#[derive(Debug, Clone, Copy)]
pub struct BotPolicy(pub Level);

impl Policy for BotPolicy {
    fn act(&self, env: &CombatEnv, _obs: &[Vec<f64>; N_AGENTS], _eps: f64, _rng: &mut ChaCha8Rng) -> [usize; N_AGENTS] {
        env.bot_policy_actions(Team::Red, self.0).map(|a| match a {
            Action::Discrete(i) => i,
            _ => 0,
        })
    }

    fn name(&self) -> String {
        format!("bot-{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn greedy_picks_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = [1.0, 5.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(epsilon_greedy(&q, 0.0, &mut rng), 1);
        let shifted: Vec<f64> = q.iter().map(|v| v + 100.0).collect();
        assert_eq!(epsilon_greedy(&shifted, 0.0, &mut rng), 1);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            counts[epsilon_greedy(&[0.0; 8], 1.0, &mut rng)] += 1;
        }
        let p = 1.0 / 8.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }
}
