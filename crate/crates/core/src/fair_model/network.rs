//! One-hidden-layer network: rectifier hidden units, sigmoid outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LABEL_COUNT;
use crate::error::{Error, Result};
use crate::seeds;

pub const DEFAULT_HIDDEN: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub hidden: usize,
    /// `hidden x input_dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `LABEL_COUNT x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct Activations {
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output: [f64; LABEL_COUNT],
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Network {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; LABEL_COUNT * hidden],
            b2: vec![0.0; LABEL_COUNT],
        }
    }

    /// He-uniform first layer, Glorot-uniform output layer, zero biases.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut net = Self::zeros(input_dim, hidden);
        let mut rng = seeds::rng(seed, 0x696e_6974);
        let a1 = (6.0 / input_dim as f64).sqrt();
        net.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        let a2 = (6.0 / (hidden + LABEL_COUNT) as f64).sqrt();
        net.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        net
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<Activations> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let pre_hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| b + dot(row, x))
            .collect();
        let hidden: Vec<f64> = pre_hidden.iter().map(|&a| a.max(0.0)).collect();
        let mut output = [0.0; LABEL_COUNT];
        for (o, (row, b)) in output.iter_mut().zip(self.w2.chunks_exact(self.hidden).zip(&self.b2)) {
            *o = sigmoid(b + dot(row, &hidden));
        }
        Ok(Activations {
            pre_hidden,
            hidden,
            output,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<[f64; LABEL_COUNT]> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn params(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn gradients_like(&self) -> Gradients {
        Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    /// Adds the parameter gradient for one sample given `d_logit`, the
    /// derivative of the loss with respect to its output pre-activations.
    pub fn backprop(&self, x: &[f64], act: &Activations, d_logit: &[f64; LABEL_COUNT], grads: &mut Gradients) {
        let h = self.hidden;
        let mut d_hidden = vec![0.0; h];
        for (k, &dz) in d_logit.iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            grads.b2[k] += dz;
            let row = &self.w2[k * h..(k + 1) * h];
            let grow = &mut grads.w2[k * h..(k + 1) * h];
            for j in 0..h {
                grow[j] += dz * act.hidden[j];
                d_hidden[j] += dz * row[j];
            }
        }
        for (j, &dh) in d_hidden.iter().enumerate() {
            if act.pre_hidden[j] <= 0.0 || dh == 0.0 {
                continue;
            }
            grads.b1[j] += dh;
            let grow = &mut grads.w1[j * self.input_dim..(j + 1) * self.input_dim];
            for (g, &xi) in grow.iter_mut().zip(x) {
                *g += dh * xi;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn parts(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adaptive-moment optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &Network, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in net
            .params_mut()
            .into_iter()
            .zip(grads.parts())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}
