use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::SparseMixturePolicy;
use crate::error::{Error, Result};
use crate::trajectory::TrajectoryBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    AnalyticIntegral,
    PerSamplePlugin,
    GibbsLoglik,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub method: EntropyMethod,
}

/// A state with a nonnegative weight (discounted visitation mass).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedState {
    pub state: Vec<f64>,
    pub weight: f64,
}

fn check_states(policy: &SparseMixturePolicy, states: &[WeightedState]) -> Result<()> {
    for ws in states {
        policy.check_state(&ws.state)?;
        if !(ws.weight >= 0.0) {
            return Err(Error::domain(format!("state weight {} is negative", ws.weight)));
        }
    }
    Ok(())
}

fn check_batch(policy: &SparseMixturePolicy, batch: &TrajectoryBatch) -> Result<()> {
    if batch.state_dim() != policy.config().state_dim || batch.action_dim() != policy.config().action_dim {
        return Err(Error::domain("trajectory dimensions do not match the policy"));
    }
    Ok(())
}

/// `1/2 sum_s w_s (1 - int pi(a|s)^2 da)` with the integral in closed form.
pub fn tsallis_entropy_analytic(policy: &SparseMixturePolicy, states: &[WeightedState]) -> Result<EntropyEstimate> {
    check_states(policy, states)?;
    let terms: Vec<f64> = states
        .par_iter()
        .map(|ws| ws.weight * policy.head(&ws.state).mixture.tsallis_entropy())
        .collect();
    Ok(EntropyEstimate {
        value: terms.iter().sum(),
        method: EntropyMethod::AnalyticIntegral,
    })
}

/// Visited states weighted by `gamma^t / N`.
pub fn discounted_states(batch: &TrajectoryBatch, gamma: f64) -> Vec<WeightedState> {
    let n = batch.len() as f64;
    batch
        .steps()
        .map(|(_, t, step)| WeightedState {
            state: step.state.clone(),
            weight: gamma.powi(t as i32) / n,
        })
        .collect()
}

/// `(1/N) sum_i sum_t gamma^t / 2 (1 - int pi(a|s_it)^2 da)`.
pub fn tsallis_entropy_per_sample(
    policy: &SparseMixturePolicy,
    batch: &TrajectoryBatch,
    gamma: f64,
) -> Result<EntropyEstimate> {
    check_batch(policy, batch)?;
    let value = tsallis_entropy_analytic(policy, &discounted_states(batch, gamma))?.value;
    Ok(EntropyEstimate {
        value,
        method: EntropyMethod::PerSamplePlugin,
    })
}

/// `(1/N) sum_i sum_t gamma^t / 2 (1 - pi(a_it|s_it))`, using the density
/// at the visited action in place of the integral.
pub fn naive_tsallis_per_action(
    policy: &SparseMixturePolicy,
    batch: &TrajectoryBatch,
    gamma: f64,
) -> Result<EntropyEstimate> {
    check_batch(policy, batch)?;
    let n = batch.len() as f64;
    let steps: Vec<_> = batch.steps().collect();
    let terms: Vec<f64> = steps
        .par_iter()
        .map(|(_, t, step)| {
            let p = policy.head(&step.state).mixture.density(&step.action);
            gamma.powi(*t as i32) * 0.5 * (1.0 - p)
        })
        .collect();
    Ok(EntropyEstimate {
        value: terms.iter().sum::<f64>() / n,
        method: EntropyMethod::PerSamplePlugin,
    })
}

/// `(1/N) sum_i sum_t -gamma^t log pi(a_it|s_it)`.
pub fn gibbs_entropy_loglik(
    policy: &SparseMixturePolicy,
    batch: &TrajectoryBatch,
    gamma: f64,
) -> Result<EntropyEstimate> {
    check_batch(policy, batch)?;
    let n = batch.len() as f64;
    let steps: Vec<_> = batch.steps().collect();
    let terms: Vec<f64> = steps
        .par_iter()
        .map(|(_, t, step)| -gamma.powi(*t as i32) * policy.head(&step.state).mixture.log_density(&step.action))
        .collect();
    Ok(EntropyEstimate {
        value: terms.iter().sum::<f64>() / n,
        method: EntropyMethod::GibbsLoglik,
    })
}

/// Gradient of [`tsallis_entropy_analytic`] with respect to the policy
/// parameters.
pub fn entropy_gradient(policy: &SparseMixturePolicy, states: &[WeightedState]) -> Result<Vec<f64>> {
    check_states(policy, states)?;
    let mut grad = vec![0.0; policy.n_params()];
    accumulate_entropy_gradient(policy, states, 1.0, &mut grad);
    Ok(grad)
}

/// Adds `scale * grad W` into `grad`. Skips the dimension checks.
pub(crate) fn accumulate_entropy_gradient(
    policy: &SparseMixturePolicy,
    states: &[WeightedState],
    scale: f64,
    grad: &mut [f64],
) {
    for ws in states {
        if ws.weight == 0.0 {
            continue;
        }
        let head = policy.head(&ws.state);
        let (_, upstream) = head.mixture.overlap_grad();
        policy.backprop(&ws.state, &head, &upstream, -0.5 * ws.weight * scale, grad);
    }
}
