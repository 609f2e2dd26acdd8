use rayon::prelude::*;

use super::discriminator::RewardModel;
use super::par_accumulate;
use crate::error::{Error, Result};
use crate::mdn::{
    accumulate_entropy_gradient, discounted_states, gibbs_entropy_loglik, tsallis_entropy_per_sample,
    EntropyEstimate, SparseMixturePolicy,
};
use crate::optim::Optimizer;
use crate::trajectory::{Episode, TrajectoryBatch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyGradientSettings {
    pub gamma: f64,
    /// Entropy coefficient.
    pub alpha: f64,
    /// When set, episodes shorter than this continue in an absorbing state
    /// that pays `RewardModel::absorbing_reward` until the horizon.
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyBonus {
    /// Exact gradient of the plug-in causal Tsallis entropy at visited states.
    Tsallis,
    /// `-alpha log pi(a|s)` folded into the per-step reward.
    LogLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub grad_norm: f64,
    /// Mean discounted return of the surrogate reward.
    pub surrogate_return: f64,
    pub entropy: EntropyEstimate,
}

fn check_batch(policy: &SparseMixturePolicy, batch: &TrajectoryBatch) -> Result<()> {
    policy.check_state(&vec![0.0; batch.state_dim()])?;
    policy.check_action(&vec![0.0; batch.action_dim()])
}

/// Score-function estimate of the gradient of
/// `E[sum_t gamma^t r_t] + alpha * entropy`, with a leave-one-out batch-mean
/// baseline on the reward-to-go. Returns the gradient and the mean return.
pub fn policy_gradient(
    policy: &SparseMixturePolicy,
    reward: &dyn RewardModel,
    rollouts: &TrajectoryBatch,
    settings: &PolicyGradientSettings,
    bonus: EntropyBonus,
) -> Result<(Vec<f64>, f64)> {
    check_batch(policy, rollouts)?;
    let PolicyGradientSettings { gamma, alpha, horizon } = *settings;
    let episodes = rollouts.episodes();
    let n = episodes.len();
    let max_len = episodes.iter().map(Episode::len).max().unwrap_or(0);

    // discounted absorbing-state value collected from step t onward
    let tail: Vec<f64> = match horizon {
        Some(h) => {
            let r_abs = reward.absorbing_reward();
            let mut tail = vec![0.0; max_len.max(h) + 1];
            for t in (0..h).rev() {
                tail[t] = tail[t + 1] + gamma.powi(t as i32) * r_abs;
            }
            tail
        }
        None => vec![0.0; max_len + 1],
    };

    let to_go: Vec<Vec<f64>> = episodes
        .par_iter()
        .map(|ep| {
            let mut g = vec![0.0; ep.len() + 1];
            g[ep.len()] = tail[ep.len()];
            for (t, step) in ep.steps.iter().enumerate().rev() {
                let mut r = reward.reward(&step.state, &step.action);
                if bonus == EntropyBonus::LogLikelihood && alpha != 0.0 {
                    r -= alpha * policy.head(&step.state).mixture.log_density(&step.action);
                }
                g[t] = g[t + 1] + gamma.powi(t as i32) * r;
            }
            g
        })
        .collect();

    let baseline: Vec<f64> = (0..max_len)
        .map(|t| {
            to_go
                .iter()
                .map(|g| if t < g.len() { g[t] } else { tail[t] })
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let correction = if n > 1 { n as f64 / (n - 1) as f64 } else { 0.0 };
    let mean_return = to_go.iter().map(|g| g[0]).sum::<f64>() / n as f64;

    let indexed: Vec<(&Episode, &Vec<f64>)> = episodes.iter().zip(&to_go).collect();
    let (_, mut grad) = par_accumulate(&indexed, policy.n_params(), |(ep, g), acc| {
        for (t, step) in ep.steps.iter().enumerate() {
            let advantage = if n > 1 {
                correction * (g[t] - baseline[t])
            } else {
                g[t]
            };
            if advantage != 0.0 {
                policy.log_density_grad(&step.state, &step.action, advantage / n as f64, acc);
            }
        }
        0.0
    });

    if bonus == EntropyBonus::Tsallis && alpha != 0.0 {
        accumulate_entropy_gradient(policy, &discounted_states(rollouts, gamma), alpha, &mut grad);
    }
    Ok((grad, mean_return))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn step_policy(
    policy: &mut SparseMixturePolicy,
    optimizer: &mut Optimizer,
    reward: &dyn RewardModel,
    rollouts: &TrajectoryBatch,
    settings: &PolicyGradientSettings,
    bonus: EntropyBonus,
    entropy: EntropyEstimate,
) -> Result<UpdateReport> {
    let (grad, surrogate_return) = policy_gradient(policy, reward, rollouts, settings, bonus)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite policy gradient".into()));
    }
    optimizer.ascend(policy.params_mut(), &grad);
    Ok(UpdateReport {
        grad_norm: norm(&grad),
        surrogate_return,
        entropy,
    })
}

/// Policy step on reward `-log D` plus `alpha` times the causal Tsallis
/// entropy of the mixture.
pub fn policy_update_mcteil(
    policy: &mut SparseMixturePolicy,
    optimizer: &mut Optimizer,
    reward: &dyn RewardModel,
    rollouts: &TrajectoryBatch,
    settings: &PolicyGradientSettings,
) -> Result<UpdateReport> {
    let entropy = tsallis_entropy_per_sample(policy, rollouts, settings.gamma)?;
    step_policy(policy, optimizer, reward, rollouts, settings, EntropyBonus::Tsallis, entropy)
}

/// Policy step on reward `-log D - alpha log pi(a|s)`.
pub fn policy_update_soft_gail(
    policy: &mut SparseMixturePolicy,
    optimizer: &mut Optimizer,
    reward: &dyn RewardModel,
    rollouts: &TrajectoryBatch,
    settings: &PolicyGradientSettings,
) -> Result<UpdateReport> {
    let entropy = gibbs_entropy_loglik(policy, rollouts, settings.gamma)?;
    step_policy(policy, optimizer, reward, rollouts, settings, EntropyBonus::LogLikelihood, entropy)
}

/// Mean negative log-likelihood of the demonstrated pairs and, when
/// `with_grad`, the gradient of the mean log-likelihood.
pub fn demo_nll(policy: &SparseMixturePolicy, demos: &TrajectoryBatch, with_grad: bool) -> Result<(f64, Vec<f64>)> {
    check_batch(policy, demos)?;
    let steps: Vec<_> = demos.steps().map(|(_, _, s)| s).collect();
    let n = steps.len() as f64;
    let dim = if with_grad { policy.n_params() } else { 0 };
    let (loglik, grad) = par_accumulate(&steps, dim, |step, acc| {
        if acc.is_empty() {
            policy.head(&step.state).mixture.log_density(&step.action) / n
        } else {
            policy.log_density_grad(&step.state, &step.action, 1.0 / n, acc) / n
        }
    });
    Ok((-loglik, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcReport {
    /// Mean NLL before each epoch, then after the last one.
    pub nll: Vec<f64>,
}

impl BcReport {
    pub fn final_nll(&self) -> f64 {
        *self.nll.last().expect("history holds the initial value")
    }
}

/// Full-batch gradient ascent on the demonstration log-likelihood.
pub fn behavior_cloning(
    policy: &mut SparseMixturePolicy,
    optimizer: &mut Optimizer,
    demos: &TrajectoryBatch,
    epochs: usize,
) -> Result<BcReport> {
    let mut nll = Vec::with_capacity(epochs + 1);
    for _ in 0..epochs {
        let (value, grad) = demo_nll(policy, demos, true)?;
        nll.push(value);
        optimizer.ascend(policy.params_mut(), &grad);
    }
    nll.push(demo_nll(policy, demos, false)?.0);
    Ok(BcReport { nll })
}
