//! Q-learning updates for independent learners (IQL) and for the
//! value-decomposition learners VDN and QMIX.

use super::adam::{clip_grad_norm, Adam};
use super::mixer::{vdn_mix, MixCache, QmixMixer};
use super::net::{Mlp, MlpCache};
use super::replay::Transition;
use super::MarlError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Iql,
    Vdn,
    Qmix,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Iql, Algo::Vdn, Algo::Qmix];

    pub fn tag(self) -> u8 {
        match self {
            Algo::Iql => 0,
            Algo::Vdn => 1,
            Algo::Qmix => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Algo> {
        Algo::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Iql => "iql",
            Algo::Vdn => "vdn",
            Algo::Qmix => "qmix",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iql" => Ok(Algo::Iql),
            "vdn" => Ok(Algo::Vdn),
            "qmix" => Ok(Algo::Qmix),
            other => Err(format!("unknown algorithm {other:?} (expected iql, vdn or qmix)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Environment steps over which epsilon decays linearly.
    pub eps_anneal_steps: u64,
    /// Train steps between hard target copies.
    pub target_update_interval: u64,
    /// Environment steps collected before the first update.
    pub warmup_steps: u64,
    pub hidden: Vec<usize>,
    pub mixer_embed: usize,
    /// Max L2 norm per parameter group (one group per agent network, one
    /// for the mixer).
    pub grad_clip: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 5e-4,
            batch_size: 64,
            buffer_capacity: 50_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_anneal_steps: 50_000,
            target_update_interval: 200,
            warmup_steps: 1_000,
            hidden: vec![64, 64],
            mixer_embed: 32,
            grad_clip: 10.0,
        }
    }
}

impl HyperParams {
    pub fn epsilon(&self, env_steps: u64) -> f64 {
        if env_steps >= self.eps_anneal_steps {
            return self.eps_end;
        }
        let frac = env_steps as f64 / self.eps_anneal_steps as f64;
        self.eps_start + frac * (self.eps_end - self.eps_start)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err("need 0 < batch_size <= buffer_capacity".into());
        }
        for (n, e) in [("eps_start", self.eps_start), ("eps_end", self.eps_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(format!("{n} must lie in [0, 1], got {e}"));
            }
        }
        if self.target_update_interval == 0 {
            return Err("target_update_interval must be positive".into());
        }
        if self.hidden.contains(&0) || self.mixer_embed == 0 {
            return Err("layer widths must be positive".into());
        }
        if !(self.grad_clip > 0.0) {
            return Err("grad_clip must be positive".into());
        }
        Ok(())
    }
}

/// Gradients shaped like the learner's trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub agents: Vec<Vec<f64>>,
    /// Hypernetwork gradients in [`QmixMixer::nets`] order (QMIX only).
    pub mixer: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.agents.iter().chain(&self.mixer).flatten().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub algo: Algo,
    pub hyper: HyperParams,
    pub agents: Vec<Mlp>,
    pub target_agents: Vec<Mlp>,
    pub mixer: Option<QmixMixer>,
    pub target_mixer: Option<QmixMixer>,
    opt_agents: Vec<Adam>,
    opt_mixer: Vec<Adam>,
    train_steps: u64,
}

impl Learner {
    pub fn new(algo: Algo, obs_dim: usize, n_actions: usize, n_agents: usize, hyper: HyperParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![obs_dim];
        sizes.extend(&hyper.hidden);
        sizes.push(n_actions);
        let agents: Vec<Mlp> = (0..n_agents).map(|_| Mlp::new(&sizes, &mut rng)).collect();
        let mixer = (algo == Algo::Qmix).then(|| QmixMixer::new(n_agents, obs_dim, hyper.mixer_embed, &mut rng));
        Self::from_parts(algo, hyper, agents, mixer)
    }

    /// Builds a learner around existing networks; targets start as copies
    /// and the optimizer state starts fresh.
    pub fn from_parts(algo: Algo, hyper: HyperParams, agents: Vec<Mlp>, mixer: Option<QmixMixer>) -> Self {
        let opt_agents = agents.iter().map(|a| Adam::new(a.params.len(), hyper.lr)).collect();
        let opt_mixer = mixer
            .iter()
            .flat_map(|m| m.nets().map(|n| Adam::new(n.params.len(), hyper.lr)))
            .collect();
        Self {
            algo,
            target_agents: agents.clone(),
            target_mixer: mixer.clone(),
            agents,
            mixer,
            opt_agents,
            opt_mixer,
            hyper,
            train_steps: 0,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn sync_targets(&mut self) {
        self.target_agents.clone_from(&self.agents);
        self.target_mixer.clone_from(&self.mixer);
    }

    /// Trainable parameter vectors: agent networks, then mixer networks.
    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = self.agents.iter_mut().map(|a| &mut a.params).collect();
        if let Some(m) = self.mixer.as_mut() {
            out.extend(m.nets_mut().into_iter().map(|n| &mut n.params));
        }
        out
    }

    /// Row-wise max of the target network's values for agent `i` over the
    /// batch's next observations.
    fn target_maxes(&self, agent: usize, batch: &[&Transition]) -> Vec<f64> {
        let x: Vec<f64> = batch.iter().flat_map(|t| t.next_obs[agent].iter().copied()).collect();
        let net = &self.target_agents[agent];
        net.forward_batch(&x, batch.len())
            .chunks_exact(net.output_dim())
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// TD targets from the target networks, `batch x n_agents`: one per
    /// agent for IQL, one per transition repeated across agents for VDN and
    /// QMIX.
    pub fn td_targets(&self, batch: &[&Transition]) -> Vec<Vec<f64>> {
        let g = self.hyper.gamma;
        let n = self.n_agents();
        let maxes: Vec<Vec<f64>> = (0..n).map(|i| self.target_maxes(i, batch)).collect();
        let mixed: Option<Vec<f64>> = (self.algo == Algo::Qmix).then(|| {
            let m = self.target_mixer.as_ref().expect("qmix has a mixer");
            let q: Vec<f64> = (0..batch.len()).flat_map(|r| (0..n).map(|i| maxes[i][r]).collect::<Vec<_>>()).collect();
            let s: Vec<f64> = batch.iter().flat_map(|t| t.next_state().iter().copied()).collect();
            m.mix_batch(&q, &s, batch.len())
        });
        batch
            .iter()
            .enumerate()
            .map(|(r, t)| {
                if t.done {
                    return vec![t.reward; n];
                }
                match self.algo {
                    Algo::Iql => (0..n).map(|i| t.reward + g * maxes[i][r]).collect(),
                    Algo::Vdn => vec![t.reward + g * (0..n).map(|i| maxes[i][r]).sum::<f64>(); n],
                    Algo::Qmix => vec![t.reward + g * mixed.as_ref().expect("computed above")[r]; n],
                }
            })
            .collect()
    }

    /// Mean squared TD error and its exact gradient with respect to the
    /// online parameters. For IQL the loss is the mean over agents of each
    /// agent's own mean squared error.
    pub fn loss_and_gradients(&self, batch: &[&Transition]) -> (f64, Gradients) {
        assert!(!batch.is_empty(), "empty batch");
        let n = self.n_agents();
        let rows = batch.len();
        let b = rows as f64;
        let targets = self.td_targets(batch);
        let mut grads = Gradients {
            agents: self.agents.iter().map(|a| vec![0.0; a.params.len()]).collect(),
            mixer: self
                .mixer
                .iter()
                .flat_map(|m| m.nets().map(|net| vec![0.0; net.params.len()]))
                .collect(),
        };
        let mut caches = vec![MlpCache::default(); n];
        let outs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let x: Vec<f64> = batch.iter().flat_map(|t| t.obs[i].iter().copied()).collect();
                self.agents[i].forward_cached(&x, rows, &mut caches[i])
            })
            .collect();
        let n_act: Vec<usize> = self.agents.iter().map(|a| a.output_dim()).collect();
        // chosen values, batch x n_agents
        let q: Vec<f64> = (0..rows)
            .flat_map(|r| (0..n).map(|i| outs[i][r * n_act[i] + batch[r].actions[i]]).collect::<Vec<_>>())
            .collect();
        let mut loss = 0.0;
        let dq: Vec<f64> = match self.algo {
            Algo::Iql => {
                let scale = b * n as f64;
                (0..rows * n)
                    .map(|k| {
                        let e = q[k] - targets[k / n][k % n];
                        loss += e * e / scale;
                        2.0 * e / scale
                    })
                    .collect()
            }
            Algo::Vdn => (0..rows)
                .flat_map(|r| {
                    let e = vdn_mix(&q[r * n..(r + 1) * n]) - targets[r][0];
                    loss += e * e / b;
                    vec![2.0 * e / b; n]
                })
                .collect(),
            Algo::Qmix => {
                let m = self.mixer.as_ref().expect("qmix has a mixer");
                let s: Vec<f64> = batch.iter().flat_map(|t| t.state().iter().copied()).collect();
                let mut mc = MixCache::default();
                let tot = m.mix_cached(&q, &s, rows, &mut mc);
                let d_out: Vec<f64> = (0..rows)
                    .map(|r| {
                        let e = tot[r] - targets[r][0];
                        loss += e * e / b;
                        2.0 * e / b
                    })
                    .collect();
                m.backward(&mc, &d_out, &mut grads.mixer)
            }
        };
        for i in 0..n {
            let mut dout = vec![0.0; rows * n_act[i]];
            for r in 0..rows {
                dout[r * n_act[i] + batch[r].actions[i]] = dq[r * n + i];
            }
            self.agents[i].backward(&caches[i], &dout, &mut grads.agents[i]);
        }
        (loss, grads)
    }

    pub fn loss(&self, batch: &[&Transition]) -> f64 {
        self.loss_and_gradients(batch).0
    }

    /// One optimizer update. Gradients are clipped per group, so under IQL
    /// each agent's update depends only on its own network and data.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64, MarlError> {
        let (loss, mut grads) = self.loss_and_gradients(batch);
        if !loss.is_finite() {
            return Err(MarlError::NonFiniteLoss(loss));
        }
        let clip = self.hyper.grad_clip;
        for (i, g) in grads.agents.iter_mut().enumerate() {
            clip_grad_norm(&mut [g], clip);
            self.opt_agents[i].step(&mut self.agents[i].params, g);
        }
        if let Some(m) = self.mixer.as_mut() {
            let mut refs: Vec<&mut Vec<f64>> = grads.mixer.iter_mut().collect();
            clip_grad_norm(&mut refs, clip);
            for ((net, opt), g) in m.nets_mut().into_iter().zip(&mut self.opt_mixer).zip(&grads.mixer) {
                opt.step(&mut net.params, g);
            }
        }
        self.train_steps += 1;
        if self.train_steps % self.hyper.target_update_interval == 0 {
            self.sync_targets();
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marl::net::argmax;
    use rand::Rng;

    fn small_hyper() -> HyperParams {
        HyperParams { hidden: vec![6, 5], mixer_embed: 4, ..Default::default() }
    }

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize, acts: usize) -> Vec<Transition> {
        (0..n)
            .map(|k| {
                let v = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
                Transition {
                    obs: vec![v(rng), v(rng)],
                    actions: vec![rng.random_range(0..acts), rng.random_range(0..acts)],
                    reward: rng.random_range(-2.0..2.0),
                    next_obs: vec![v(rng), v(rng)],
                    done: k % 3 == 0,
                }
            })
            .collect()
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for algo in Algo::ALL {
            let l = Learner::new(algo, 4, 3, 2, small_hyper(), 1);
            let mut b = random_batch(&mut rng, 5, 4, 3);
            b.iter_mut().for_each(|t| t.done = true);
            let refs: Vec<&Transition> = b.iter().collect();
            for (t, y) in b.iter().zip(l.td_targets(&refs)) {
                assert_eq!(y, vec![t.reward; 2]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for algo in Algo::ALL {
            let mut l = Learner::new(algo, 4, 3, 2, small_hyper(), 3);
            // separate target weights so the target branch is non-trivial
            l.target_agents = (0..2).map(|_| Mlp::new(&[4, 6, 5, 3], &mut rng)).collect();
            let b = random_batch(&mut rng, 6, 4, 3);
            let refs: Vec<&Transition> = b.iter().collect();
            let (_, g) = l.loss_and_gradients(&refs);
            let g = g.flatten();
            let mut k = 0;
            let n_groups = l.params_mut().len();
            for grp in 0..n_groups {
                let len = l.params_mut()[grp].len();
                for p in 0..len {
                    let orig = l.params_mut()[grp][p];
                    l.params_mut()[grp][p] = orig + 1e-5;
                    let up = l.loss(&refs);
                    l.params_mut()[grp][p] = orig - 1e-5;
                    let down = l.loss(&refs);
                    l.params_mut()[grp][p] = orig;
                    let fd = (up - down) / 2e-5;
                    let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
                    assert!(rel < 1e-4, "{algo} group {grp} param {p}: fd {fd} analytic {}", g[k]);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let mut l = Learner::new(Algo::Vdn, 3, 2, 2, small_hyper(), 0);
        for a in l.agents.iter_mut() {
            a.params.iter_mut().for_each(|p| *p = 0.0);
        }
        let t = Transition {
            obs: vec![vec![0.1; 3]; 2],
            actions: vec![0, 1],
            reward: 0.0,
            next_obs: vec![vec![0.0; 3]; 2],
            done: true,
        };
        let (loss, g) = l.loss_and_gradients(&[&t]);
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn iql_agent_updates_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_batch(&mut rng, 8, 4, 3);
        let mut b2 = b.clone();
        // change only agent 1's data
        for t in &mut b2 {
            t.obs[1].iter_mut().for_each(|v| *v = -*v);
            t.actions[1] = (t.actions[1] + 1) % 3;
        }
        let mut l1 = Learner::new(Algo::Iql, 4, 3, 2, small_hyper(), 9);
        let mut l2 = l1.clone();
        l1.train_step(&b.iter().collect::<Vec<_>>()).unwrap();
        l2.train_step(&b2.iter().collect::<Vec<_>>()).unwrap();
        assert_eq!(l1.agents[0], l2.agents[0]);
        assert_ne!(l1.agents[1], l2.agents[1]);
    }

    #[test]
    fn targets_change_only_at_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_batch(&mut rng, 8, 4, 3);
        let refs: Vec<&Transition> = b.iter().collect();
        let hyper = HyperParams { target_update_interval: 3, ..small_hyper() };
        let mut l = Learner::new(Algo::Qmix, 4, 3, 2, hyper, 1);
        let initial = l.target_agents.clone();
        l.train_step(&refs).unwrap();
        l.train_step(&refs).unwrap();
        assert_eq!(l.target_agents, initial);
        l.train_step(&refs).unwrap();
        assert_eq!(l.target_agents, l.agents);
        assert_eq!(l.target_mixer, l.mixer);
    }

    #[test]
    fn vdn_solves_matrix_game() {
        // payoff[a0][a1]; the best joint action is (1, 0)
        let payoff = [[0.0, 1.0], [5.0, 2.0]];
        let hyper = HyperParams { hidden: vec![8], batch_size: 16, ..Default::default() };
        let mut l = Learner::new(Algo::Vdn, 2, 2, 2, hyper, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs = vec![vec![1.0, 0.0]; 2];
        for _ in 0..2000 {
            let batch: Vec<Transition> = (0..16)
                .map(|_| {
                    let (a0, a1) = (rng.random_range(0..2), rng.random_range(0..2));
                    Transition {
                        obs: obs.clone(),
                        actions: vec![a0, a1],
                        reward: payoff[a0][a1],
                        next_obs: obs.clone(),
                        done: true,
                    }
                })
                .collect();
            l.train_step(&batch.iter().collect::<Vec<_>>()).unwrap();
        }
        let greedy: Vec<usize> = l.agents.iter().map(|a| argmax(&a.forward(&obs[0]))).collect();
        assert_eq!(greedy, vec![1, 0]);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random_batch(&mut rng, 8, 4, 3);
        let refs: Vec<&Transition> = b.iter().collect();
        let run = || {
            let mut l = Learner::new(Algo::Qmix, 4, 3, 2, small_hyper(), 4);
            for _ in 0..5 {
                l.train_step(&refs).unwrap();
            }
            (l.agents, l.mixer)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn epsilon_schedule() {
        let h = HyperParams::default();
        assert_eq!(h.epsilon(0), 1.0);
        assert!((h.epsilon(25_000) - 0.525).abs() < 1e-12);
        assert_eq!(h.epsilon(50_000), 0.05);
        assert_eq!(h.epsilon(1_000_000), 0.05);
    }
}
