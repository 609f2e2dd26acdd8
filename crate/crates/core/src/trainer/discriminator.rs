use rand::Rng;
use serde::{Deserialize, Serialize};

use super::par_accumulate;
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::optim::Optimizer;
use crate::trajectory::TrajectoryBatch;

const LOGIT_CLAMP: f64 = 30.0;

/// Per-step learner reward derived from some scorer.
pub trait RewardModel: Sync {
    fn reward(&self, state: &[f64], action: &[f64]) -> f64;

    /// Reward collected in the absorbing state after an episode ends early.
    fn absorbing_reward(&self) -> f64 {
        0.0
    }
}

/// Logistic scorer `D(s, a)` estimating the probability that a pair came
/// from the learner. Inputs are `[state | action | absorbing flag]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    state_dim: usize,
    action_dim: usize,
    net: Mlp,
}

/// One discriminator input with its multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscSample {
    pub input: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscReport {
    pub pre: f64,
    pub post: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Discriminator {
    pub fn new(state_dim: usize, action_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            state_dim,
            action_dim,
            net: Mlp::new(state_dim + action_dim + 1, hidden, 1, 1.0, rng),
        }
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params()
    }

    pub fn params(&self) -> &[f64] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    pub fn input(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.state_dim + self.action_dim + 1);
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        x.push(0.0);
        x
    }

    pub fn absorbing_input(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.state_dim + self.action_dim + 1];
        x[self.state_dim + self.action_dim] = 1.0;
        x
    }

    /// Clamped pre-activation and the hidden layer.
    fn logit(&self, input: &[f64]) -> (f64, Vec<f64>) {
        let mut out = [0.0];
        let hidden = self.net.forward(input, &mut out);
        (out[0].clamp(-LOGIT_CLAMP, LOGIT_CLAMP), hidden)
    }

    pub fn prob_input(&self, input: &[f64]) -> f64 {
        sigmoid(self.logit(input).0)
    }

    pub fn prob(&self, state: &[f64], action: &[f64]) -> f64 {
        self.prob_input(&self.input(state, action))
    }

    /// `-log D` evaluated without forming `D`.
    pub fn neg_log_prob_input(&self, input: &[f64]) -> f64 {
        softplus(-self.logit(input).0)
    }

    /// Discriminator inputs for a batch: every step once, plus one absorbing
    /// input per episode weighted by the steps left before `horizon`.
    pub fn samples(&self, batch: &TrajectoryBatch, horizon: Option<usize>) -> Vec<DiscSample> {
        let mut out: Vec<DiscSample> = batch
            .steps()
            .map(|(_, _, step)| DiscSample {
                input: self.input(&step.state, &step.action),
                weight: 1.0,
            })
            .collect();
        if let Some(h) = horizon {
            let pad: usize = batch.episodes().iter().map(|e| h.saturating_sub(e.len())).sum();
            if pad > 0 {
                out.push(DiscSample {
                    input: self.absorbing_input(),
                    weight: pad as f64,
                });
            }
        }
        out
    }

    /// Weighted mean of `log D` over learner samples plus weighted mean of
    /// `log(1 - D)` over expert samples.
    pub fn objective(&self, learner: &[DiscSample], expert: &[DiscSample]) -> f64 {
        self.objective_grad(learner, expert, false).0
    }

    pub fn objective_grad(&self, learner: &[DiscSample], expert: &[DiscSample], with_grad: bool) -> (f64, Vec<f64>) {
        let mut total = 0.0;
        let mut grad = vec![0.0; if with_grad { self.n_params() } else { 0 }];
        for (set, from_learner) in [(learner, true), (expert, false)] {
            let mass: f64 = set.iter().map(|s| s.weight).sum();
            if mass == 0.0 {
                continue;
            }
            let (value, g) = par_accumulate(set, grad.len(), |sample, acc| {
                let mut out = [0.0];
                let hidden = self.net.forward(&sample.input, &mut out);
                let raw = out[0];
                let z = raw.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                let w = sample.weight / mass;
                // log D = -softplus(-z), log(1 - D) = -softplus(z)
                let (value, dz) = if from_learner {
                    (-softplus(-z), 1.0 - sigmoid(z))
                } else {
                    (-softplus(z), -sigmoid(z))
                };
                if !acc.is_empty() && raw.abs() < LOGIT_CLAMP {
                    self.net.backward(&sample.input, &hidden, &[w * dz], acc);
                }
                w * value
            });
            total += value;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (total, grad)
    }
}

/// One gradient-ascent step on the discriminator objective.
pub fn discriminator_update(
    disc: &mut Discriminator,
    learner: &[DiscSample],
    expert: &[DiscSample],
    optimizer: &mut Optimizer,
) -> Result<DiscReport> {
    if learner.is_empty() || expert.is_empty() {
        return Err(Error::domain("discriminator update needs nonempty batches"));
    }
    let (pre, grad) = disc.objective_grad(learner, expert, true);
    optimizer.ascend(disc.params_mut(), &grad);
    Ok(DiscReport {
        pre,
        post: disc.objective(learner, expert),
    })
}

/// Learner reward `-log D(s, a)`.
impl RewardModel for Discriminator {
    fn reward(&self, state: &[f64], action: &[f64]) -> f64 {
        self.neg_log_prob_input(&self.input(state, action))
    }

    fn absorbing_reward(&self) -> f64 {
        self.neg_log_prob_input(&self.absorbing_input())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn samples(points: &[[f64; 2]]) -> Vec<DiscSample> {
        points
            .iter()
            .map(|p| DiscSample {
                input: vec![p[0], p[1], 0.0],
                weight: 1.0,
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let disc = Discriminator::new(1, 1, 4, &mut ChaCha8Rng::seed_from_u64(5));
        let learner = samples(&[[0.1, 0.5], [-0.3, 0.2], [0.9, -1.0]]);
        let mut expert = samples(&[[0.4, 0.4], [1.2, 0.3]]);
        expert[1].weight = 2.5;
        let (_, grad) = disc.objective_grad(&learner, &expert, true);
        let h = 1e-6;
        for i in 0..disc.n_params() {
            let mut plus = disc.clone();
            let mut minus = disc.clone();
            plus.params_mut()[i] += h;
            minus.params_mut()[i] -= h;
            let fd = (plus.objective(&learner, &expert) - minus.objective(&learner, &expert)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(1e-4), "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn reward_decreases_as_d_increases() {
        let disc = Discriminator::new(1, 1, 4, &mut ChaCha8Rng::seed_from_u64(2));
        let mut probes: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let x = disc.input(&[i as f64 * 0.1 - 2.5], &[0.3]);
                (disc.prob_input(&x), disc.neg_log_prob_input(&x))
            })
            .collect();
        probes.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in probes.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn saturated_logits_stay_inside_unit_interval() {
        let mut disc = Discriminator::new(1, 1, 2, &mut ChaCha8Rng::seed_from_u64(0));
        let n = disc.n_params();
        disc.params_mut()[n - 1] = 1e4;
        let p = disc.prob(&[0.0], &[0.0]);
        assert!(p > 0.0 && p < 1.0);
        assert!(disc.neg_log_prob_input(&disc.input(&[0.0], &[0.0])).is_finite());
    }
}
