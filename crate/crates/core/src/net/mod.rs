//! Minimal neural-network stack for the actor-critic: a one-hidden-layer
//! tanh perceptron with exact reverse-mode gradients, a softmax policy
//! head, and Adam. Parameters live in one flat buffer so optimizers and
//! checkpoints can treat a network as a plain vector.

pub mod checkpoint;

use rand::Rng;

/// Fully connected `in -> hidden (tanh) -> out` network.
///
/// Parameter layout: `W1` row-major (`hidden x in`), `b1`, `W2` row-major
/// (`out x hidden`), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub params: Vec<f64>,
}

/// Activations saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    input: Vec<f64>,
    hidden: Vec<f64>,
}

/// Standard normal via Box-Muller; two uniform draws per sample.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl Mlp {
    pub fn param_count(in_dim: usize, hidden: usize, out_dim: usize) -> usize {
        hidden * (in_dim + 1) + out_dim * (hidden + 1)
    }

    /// Fan-in-scaled normal weights, zero biases. `out_scale` shrinks the
    /// output layer; policy heads start near-uniform with a small value.
    pub fn init<R: Rng>(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        out_scale: f64,
        rng: &mut R,
    ) -> Mlp {
        let mut params = vec![0.0; Self::param_count(in_dim, hidden, out_dim)];
        let w1_scale = 1.0 / (in_dim as f64).sqrt();
        for p in params.iter_mut().take(hidden * in_dim) {
            *p = standard_normal(rng) * w1_scale;
        }
        let w2_start = hidden * (in_dim + 1);
        let w2_scale = out_scale / (hidden as f64).sqrt();
        for p in params
            .iter_mut()
            .skip(w2_start)
            .take(out_dim * hidden)
        {
            *p = standard_normal(rng) * w2_scale;
        }
        Mlp {
            in_dim,
            hidden,
            out_dim,
            params,
        }
    }

    fn w1(&self) -> &[f64] {
        &self.params[..self.hidden * self.in_dim]
    }

    fn b1(&self) -> &[f64] {
        &self.params[self.hidden * self.in_dim..self.hidden * (self.in_dim + 1)]
    }

    fn w2(&self) -> &[f64] {
        let start = self.hidden * (self.in_dim + 1);
        &self.params[start..start + self.out_dim * self.hidden]
    }

    fn b2(&self) -> &[f64] {
        &self.params[self.params.len() - self.out_dim..]
    }

    /// Forward pass returning the output and the cache for `backward_into`.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Cache) {
        assert_eq!(x.len(), self.in_dim);
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        let mut hidden = vec![0.0; self.hidden];
        for j in 0..self.hidden {
            let row = &w1[j * self.in_dim..(j + 1) * self.in_dim];
            let mut acc = b1[j];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            hidden[j] = acc.tanh();
        }
        let mut out = vec![0.0; self.out_dim];
        for o in 0..self.out_dim {
            let row = &w2[o * self.hidden..(o + 1) * self.hidden];
            let mut acc = b2[o];
            for (wi, hi) in row.iter().zip(&hidden) {
                acc += wi * hi;
            }
            out[o] = acc;
        }
        (
            out,
            Cache {
                input: x.to_vec(),
                hidden,
            },
        )
    }

    /// Forward pass without saving activations.
    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).0
    }

    /// Accumulate `d loss / d params` into `grads`, given the upstream
    /// gradient `dy = d loss / d output` and the forward cache.
    pub fn backward_into(&self, cache: &Cache, dy: &[f64], grads: &mut [f64]) {
        assert_eq!(dy.len(), self.out_dim);
        assert_eq!(grads.len(), self.params.len());
        let w2 = self.w2();
        let w2_start = self.hidden * (self.in_dim + 1);
        let b2_start = w2_start + self.out_dim * self.hidden;

        // Output layer and the gradient flowing into the activations.
        let mut dh = vec![0.0; self.hidden];
        for o in 0..self.out_dim {
            grads[b2_start + o] += dy[o];
            let row = &w2[o * self.hidden..(o + 1) * self.hidden];
            for j in 0..self.hidden {
                grads[w2_start + o * self.hidden + j] += dy[o] * cache.hidden[j];
                dh[j] += dy[o] * row[j];
            }
        }

        // Through tanh into the first layer.
        let b1_start = self.hidden * self.in_dim;
        for j in 0..self.hidden {
            let dpre = dh[j] * (1.0 - cache.hidden[j] * cache.hidden[j]);
            grads[b1_start + j] += dpre;
            let row_start = j * self.in_dim;
            for i in 0..self.in_dim {
                grads[row_start + i] += dpre * cache.input[i];
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Log-probability of `action` under the softmax of `logits`.
pub fn log_prob(logits: &[f64], action: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let logsumexp = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits[action] - logsumexp
}

/// Shannon entropy of a probability vector, in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Draw an index from a categorical distribution by inverse CDF.
pub fn categorical_sample<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Adam {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
