//! Fully connected networks over a flat parameter vector, with ReLU hidden
//! layers, a linear output layer and hand-written backpropagation.

use super::MarlError;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Per layer: weights (out x in, row-major) then biases.
    pub params: Vec<f64>,
}

/// Layer inputs recorded by [`Mlp::forward_cached`]. `acts[l]` is the input
/// of layer `l`; the last entry is the network output.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform init in +-1/sqrt(fan_in) for weights and biases.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self { sizes: sizes.to_vec(), params }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        Self { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, MarlError> {
        if sizes.len() < 2 || sizes.contains(&0) || params.len() != param_count(sizes) {
            return Err(MarlError::Shape(format!(
                "{} parameters do not fit layers {sizes:?}",
                params.len()
            )));
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer(&self, l: usize) -> (usize, usize, usize) {
        let off: usize = self.sizes[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        (off, self.sizes[l], self.sizes[l + 1])
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input length");
        let mut cur = x.to_vec();
        for l in 0..self.n_layers() {
            cur = self.affine(l, &cur);
            if l + 1 < self.n_layers() {
                cur.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        cur
    }

    /// Forward pass over `batch` row-major inputs, recording layer inputs
    /// for [`Mlp::backward`]. Returns the `batch x output_dim` outputs.
    pub fn forward_cached(&self, x: &[f64], batch: usize, cache: &mut MlpCache) -> Vec<f64> {
        assert_eq!(x.len(), batch * self.input_dim(), "input length");
        cache.acts.clear();
        cache.acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let mut y = self.affine_batch(l, &cache.acts[l], batch);
            if l + 1 < self.n_layers() {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            cache.acts.push(y);
        }
        cache.acts.last().expect("output").clone()
    }

    /// Batched forward pass without a cache.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Vec<f64> {
        assert_eq!(x.len(), batch * self.input_dim(), "input length");
        let mut cur = x.to_vec();
        for l in 0..self.n_layers() {
            cur = self.affine_batch(l, &cur, batch);
            if l + 1 < self.n_layers() {
                cur.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        cur
    }

    fn affine(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (off, n_in, n_out) = self.layer(l);
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        (0..n_out)
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
            })
            .collect()
    }

    /// `Y = X W^T + b` for a `batch x n_in` input.
    fn affine_batch(&self, l: usize, x: &[f64], batch: usize) -> Vec<f64> {
        let (off, n_in, n_out) = self.layer(l);
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        let mut y: Vec<f64> = (0..batch).flat_map(|_| b.iter().copied()).collect();
        gemm(batch, n_in, n_out, x, (n_in, 1), w, (1, n_in), &mut y, (n_out, 1));
        y
    }

    /// Accumulates into `grad` the parameter gradient of `sum(dout * Y)`
    /// for the batched forward pass recorded in `cache`.
    pub fn backward(&self, cache: &MlpCache, dout: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len(), "gradient length");
        let batch = cache.acts[0].len() / self.input_dim();
        assert_eq!(dout.len(), batch * self.output_dim(), "output gradient length");
        let mut delta = dout.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (off, n_in, n_out) = self.layer(l);
            let input = &cache.acts[l];
            // dW (n_out x n_in) += delta^T X
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            gemm(n_out, batch, n_in, &delta, (1, n_out), input, (n_in, 1), gw, (n_in, 1));
            for row in delta.chunks_exact(n_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 {
                break;
            }
            // dX (batch x n_in) = delta W
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; batch * n_in];
            gemm(batch, n_out, n_in, &delta, (n_out, 1), w, (n_in, 1), &mut prev, (n_in, 1));
            // ReLU mask from the hidden activation feeding this layer
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

/// `C += A B` with `A: m x k`, `B: k x n`, `C: m x n`, each given with
/// (row stride, column stride).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, c: usize, rs: usize, cs: usize| (r - 1) * rs + (c - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len(), "gemm operand bounds");
    }
    assert!(last(m, n, rsc, csc) < c.len(), "gemm output bounds");
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Action values for one observation.
pub fn q_forward(net: &Mlp, obs: &[f64]) -> Result<Vec<f64>, MarlError> {
    if obs.len() != net.input_dim() {
        return Err(MarlError::Shape(format!(
            "observation has {} values, network expects {}",
            obs.len(),
            net.input_dim()
        )));
    }
    Ok(net.forward(obs))
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let n = Mlp::zeros(&[37, 64, 64, 8]);
        assert_eq!(n.forward(&[0.3; 37]), vec![0.0; 8]);
        assert_eq!(n.params.len(), 37 * 64 + 64 + 64 * 64 + 64 + 64 * 8 + 8);
    }

    #[test]
    fn single_layer_is_affine() {
        // y = W x + b with W = [[1, 2], [3, 4], [5, 6]], b = [0.5, -1, 0]
        let n = Mlp::from_params(&[2, 3], vec![1., 2., 3., 4., 5., 6., 0.5, -1., 0.]).unwrap();
        assert_eq!(n.forward(&[1.0, -1.0]), vec![-0.5, -2.0, -1.0]);
    }

    #[test]
    fn hidden_relu_clips_negatives() {
        // hidden = relu([x, -x]), output = h0 + h1 = |x|
        let n = Mlp::from_params(&[1, 2, 1], vec![1., -1., 0., 0., 1., 1., 0.]).unwrap();
        assert_eq!(n.forward(&[-2.5]), vec![2.5]);
        assert_eq!(n.forward(&[1.5]), vec![1.5]);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let n = Mlp::zeros(&[3, 2]);
        assert!(q_forward(&n, &[1.0, 2.0]).is_err());
        assert!(Mlp::from_params(&[3, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = Mlp::new(&[5, 7, 6, 3], &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dout = [0.3, -1.2, 0.7];
        let f = |m: &Mlp| m.forward(&x).iter().zip(&dout).map(|(a, b)| a * b).sum::<f64>();
        let mut cache = MlpCache::default();
        n.forward_cached(&x, 1, &mut cache);
        let mut g = vec![0.0; n.params.len()];
        n.backward(&cache, &dout, &mut g);
        for i in 0..n.params.len() {
            let mut p = n.clone();
            p.params[i] += 1e-6;
            let mut m = n.clone();
            m.params[i] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-7, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn batched_pass_matches_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = Mlp::new(&[4, 6, 3], &mut rng);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = n.forward_batch(&x, 5);
        for r in 0..5 {
            let row = n.forward(&x[r * 4..(r + 1) * 4]);
            for o in 0..3 {
                assert!((row[o] - y[r * 3 + o]).abs() < 1e-12);
            }
        }
        // the batched gradient is the sum of per-row gradients
        let dout: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut c = MlpCache::default();
        n.forward_cached(&x, 5, &mut c);
        let mut g = vec![0.0; n.params.len()];
        n.backward(&c, &dout, &mut g);
        let mut g_rows = vec![0.0; n.params.len()];
        for r in 0..5 {
            n.forward_cached(&x[r * 4..(r + 1) * 4], 1, &mut c);
            n.backward(&c, &dout[r * 3..(r + 1) * 3], &mut g_rows);
        }
        for (a, b) in g.iter().zip(&g_rows) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0, 5.0, 3.0, 5.0]), 1);
        assert_eq!(argmax(&[2.0; 4]), 0);
    }
}
