//! A one-hidden-layer tanh network with a hand-written backward pass.
//!
//! Parameters live in one flat vector laid out as `[W1 | b1 | W2 | b2]`
//! with `W1` of shape `hidden x input` and `W2` of shape `output x hidden`,
//! both row-major. Gradients use the same layout.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

impl Mlp {
    /// Gaussian init: `W1 ~ N(0, 1/input)`, `W2 ~ N(0, out_scale^2/hidden)`,
    /// zero biases.
    pub fn new(input: usize, hidden: usize, output: usize, out_scale: f64, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; hidden * input + hidden + output * hidden + output];
        let s1 = (1.0 / input as f64).sqrt();
        for w in &mut params[..hidden * input] {
            *w = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        let w2 = hidden * input + hidden;
        let s2 = out_scale / (hidden as f64).sqrt();
        for w in &mut params[w2..w2 + output * hidden] {
            *w = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        Self {
            input,
            hidden,
            output,
            params,
        }
    }

    pub fn from_parts(input: usize, hidden: usize, output: usize, params: Vec<f64>) -> Option<Self> {
        (params.len() == hidden * input + hidden + output * hidden + output).then_some(Self {
            input,
            hidden,
            output,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let start = self.params.len() - self.output;
        &mut self.params[start..]
    }

    /// Writes the output into `out` and returns the hidden activations,
    /// which [`Mlp::backward`] needs.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input);
        debug_assert_eq!(out.len(), self.output);
        let (w1, rest) = self.params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.output * self.hidden);
        let hidden: Vec<f64> = w1
            .chunks_exact(self.input)
            .zip(b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).tanh())
            .collect();
        for ((o, row), b) in out.iter_mut().zip(w2.chunks_exact(self.hidden)).zip(b2) {
            *o = row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b;
        }
        hidden
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, x: &[f64], hidden: &[f64], grad_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let (_, rest) = self.params.split_at(self.hidden * self.input + self.hidden);
        let (w2, _) = rest.split_at(self.output * self.hidden);
        let (gw1, grest) = grad.split_at_mut(self.hidden * self.input);
        let (gb1, grest) = grest.split_at_mut(self.hidden);
        let (gw2, gb2) = grest.split_at_mut(self.output * self.hidden);

        let mut grad_hidden = vec![0.0; self.hidden];
        for (o, &go) in grad_out.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            gb2[o] += go;
            let row = &w2[o * self.hidden..(o + 1) * self.hidden];
            let grow = &mut gw2[o * self.hidden..(o + 1) * self.hidden];
            for j in 0..self.hidden {
                grow[j] += go * hidden[j];
                grad_hidden[j] += go * row[j];
            }
        }
        for j in 0..self.hidden {
            let pre = grad_hidden[j] * (1.0 - hidden[j] * hidden[j]);
            if pre == 0.0 {
                continue;
            }
            gb1[j] += pre;
            for (g, v) in gw1[j * self.input..(j + 1) * self.input].iter_mut().zip(x) {
                *g += pre * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(3, 5, 2, 1.0, &mut rng);
        let x = [0.3, -0.7, 1.1];
        let upstream = [0.4, -1.3];
        let loss = |net: &Mlp| {
            let mut out = [0.0; 2];
            net.forward(&x, &mut out);
            out[0] * upstream[0] + out[1] * upstream[1]
        };
        let mut out = [0.0; 2];
        let hidden = net.forward(&x, &mut out);
        let mut grad = vec![0.0; net.n_params()];
        net.backward(&x, &hidden, &upstream, &mut grad);
        for i in 0..net.n_params() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            plus.params_mut()[i] += 1e-6;
            minus.params_mut()[i] -= 1e-6;
            let fd = (loss(&plus) - loss(&minus)) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-8, "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
