//! Value-decomposition mixers.
//!
//! VDN adds the chosen per-agent values. QMIX combines them through one
//! ELU hidden layer whose weights come from hypernetworks conditioned on
//! the global state; absolute values on the weights keep the mix monotone
//! in every agent value.

use super::net::{Mlp, MlpCache};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub fn vdn_mix(q: &[f64]) -> f64 {
    q.iter().sum()
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmixMixer {
    pub n_agents: usize,
    pub embed: usize,
    /// state -> W1 (embed x n_agents, row-major), before |.|
    pub hyper_w1: Mlp,
    /// state -> b1
    pub hyper_b1: Mlp,
    /// state -> w2, before |.|
    pub hyper_w2: Mlp,
    /// state -> scalar output bias, one ReLU hidden layer
    pub hyper_v: Mlp,
}

/// Intermediate values of one batched mixing pass.
#[derive(Debug, Clone, Default)]
pub struct MixCache {
    batch: usize,
    q: Vec<f64>,
    w1_raw: Vec<f64>,
    w2_raw: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    c_w1: MlpCache,
    c_b1: MlpCache,
    c_w2: MlpCache,
    c_v: MlpCache,
}

impl QmixMixer {
    pub fn new<R: Rng>(n_agents: usize, state_dim: usize, embed: usize, rng: &mut R) -> Self {
        Self {
            n_agents,
            embed,
            hyper_w1: Mlp::new(&[state_dim, embed * n_agents], rng),
            hyper_b1: Mlp::new(&[state_dim, embed], rng),
            hyper_w2: Mlp::new(&[state_dim, embed], rng),
            hyper_v: Mlp::new(&[state_dim, embed, 1], rng),
        }
    }

    pub fn zeros(n_agents: usize, state_dim: usize, embed: usize) -> Self {
        Self {
            n_agents,
            embed,
            hyper_w1: Mlp::zeros(&[state_dim, embed * n_agents]),
            hyper_b1: Mlp::zeros(&[state_dim, embed]),
            hyper_w2: Mlp::zeros(&[state_dim, embed]),
            hyper_v: Mlp::zeros(&[state_dim, embed, 1]),
        }
    }

    pub fn nets(&self) -> [&Mlp; 4] {
        [&self.hyper_w1, &self.hyper_b1, &self.hyper_w2, &self.hyper_v]
    }

    pub fn nets_mut(&mut self) -> [&mut Mlp; 4] {
        [&mut self.hyper_w1, &mut self.hyper_b1, &mut self.hyper_w2, &mut self.hyper_v]
    }

    pub fn state_dim(&self) -> usize {
        self.hyper_b1.input_dim()
    }

    pub fn mix(&self, q: &[f64], state: &[f64]) -> f64 {
        self.mix_batch(q, state, 1)[0]
    }

    /// Q_tot for `batch` rows of agent values (`batch x n_agents`) and
    /// states (`batch x state_dim`).
    pub fn mix_batch(&self, q: &[f64], states: &[f64], batch: usize) -> Vec<f64> {
        self.mix_cached(q, states, batch, &mut MixCache::default())
    }

    pub fn mix_cached(&self, q: &[f64], states: &[f64], batch: usize, c: &mut MixCache) -> Vec<f64> {
        let n = self.n_agents;
        let e = self.embed;
        assert_eq!(q.len(), batch * n, "one value per agent");
        let w1 = self.hyper_w1.forward_cached(states, batch, &mut c.c_w1);
        let b1 = self.hyper_b1.forward_cached(states, batch, &mut c.c_b1);
        let w2 = self.hyper_w2.forward_cached(states, batch, &mut c.c_w2);
        let v = self.hyper_v.forward_cached(states, batch, &mut c.c_v);
        let mut pre = vec![0.0; batch * e];
        let mut out = v;
        for r in 0..batch {
            for j in 0..e {
                let w_row = &w1[r * e * n + j * n..r * e * n + (j + 1) * n];
                pre[r * e + j] =
                    b1[r * e + j] + w_row.iter().zip(&q[r * n..(r + 1) * n]).map(|(w, x)| w.abs() * x).sum::<f64>();
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&x| elu(x)).collect();
        for r in 0..batch {
            out[r] += (0..e).map(|j| hidden[r * e + j] * w2[r * e + j].abs()).sum::<f64>();
        }
        c.batch = batch;
        c.q = q.to_vec();
        c.w1_raw = w1;
        c.w2_raw = w2;
        c.pre = pre;
        c.hidden = hidden;
        out
    }

    /// Backpropagates `d_out` (dL/dQ_tot per row) into the hypernetwork
    /// gradients (`grads` in [`QmixMixer::nets`] order) and returns dL/dq
    /// (`batch x n_agents`).
    pub fn backward(&self, c: &MixCache, d_out: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        let n = self.n_agents;
        let e = self.embed;
        let batch = c.batch;
        assert_eq!(d_out.len(), batch, "one output gradient per row");
        let mut d_w1 = vec![0.0; batch * e * n];
        let mut d_b1 = vec![0.0; batch * e];
        let mut d_w2 = vec![0.0; batch * e];
        let mut d_q = vec![0.0; batch * n];
        for r in 0..batch {
            let d = d_out[r];
            for j in 0..e {
                let k = r * e + j;
                d_w2[k] = d * c.hidden[k] * sign(c.w2_raw[k]);
                let d_pre = d * c.w2_raw[k].abs() * elu_grad(c.pre[k]);
                d_b1[k] = d_pre;
                for i in 0..n {
                    let wk = r * e * n + j * n + i;
                    let w = c.w1_raw[wk];
                    d_w1[wk] = d_pre * c.q[r * n + i] * sign(w);
                    d_q[r * n + i] += d_pre * w.abs();
                }
            }
        }
        self.hyper_w1.backward(&c.c_w1, &d_w1, &mut grads[0]);
        self.hyper_b1.backward(&c.c_b1, &d_b1, &mut grads[1]);
        self.hyper_w2.backward(&c.c_w2, &d_w2, &mut grads[2]);
        self.hyper_v.backward(&c.c_v, d_out, &mut grads[3]);
        d_q
    }

    /// dQ_tot/dq at one point, without touching any gradient buffer.
    pub fn dq(&self, q: &[f64], state: &[f64]) -> Vec<f64> {
        let mut c = MixCache::default();
        self.mix_cached(q, state, 1, &mut c);
        let n = self.n_agents;
        let mut d_q = vec![0.0; n];
        for j in 0..self.embed {
            let d_pre = c.w2_raw[j].abs() * elu_grad(c.pre[j]);
            for (i, d) in d_q.iter_mut().enumerate() {
                *d += d_pre * c.w1_raw[j * n + i].abs();
            }
        }
        d_q
    }
}

/// Derivative of |x|, taken as +1 at 0.
fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vdn_is_sum() {
        assert_eq!(vdn_mix(&[0.0, 0.0]), 0.0);
        assert_eq!(vdn_mix(&[1.5, -0.5]), 1.0);
    }

    #[test]
    fn zero_hypernets_give_zero() {
        let m = QmixMixer::zeros(2, 5, 4);
        assert_eq!(m.mix(&[3.0, -7.0], &[1.0; 5]), 0.0);
    }

    #[test]
    fn hand_set_one_by_one_mixer() {
        // state_dim 1, embed 1, one agent; state s = 1:
        // W1 = |-2| = 2, b1 = 0.5, w2 = |-3| = 3, V = relu(1) * 4 + 0.25
        let mut m = QmixMixer::zeros(1, 1, 1);
        m.hyper_w1.params = vec![0.0, -2.0];
        m.hyper_b1.params = vec![0.0, 0.5];
        m.hyper_w2.params = vec![-3.0, 0.0];
        m.hyper_v.params = vec![1.0, 0.0, 4.0, 0.25];
        // q = 1: hidden = elu(2 + 0.5) = 2.5, Q = 3 * 2.5 + 4.25 = 11.75
        assert!((m.mix(&[1.0], &[1.0]) - 11.75).abs() < 1e-12);
        // q = -1: hidden = elu(-1.5) = e^-1.5 - 1
        let expect = 3.0 * ((-1.5f64).exp() - 1.0) + 4.25;
        assert!((m.mix(&[-1.0], &[1.0]) - expect).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_each_agent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = QmixMixer::new(2, 6, 8, &mut rng);
        for _ in 0..200 {
            let s: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            for i in 0..2 {
                let mut q2 = q;
                q2[i] += 0.1;
                assert!(m.mix(&q2, &s) >= m.mix(&q, &s));
            }
            assert!(m.dq(&q, &s).iter().all(|&d| d >= 0.0));
        }
    }
}
