use nalgebra::{DMatrix, DVector};

use super::{sup_norm_diff, PolicyTable, TabularMdp, ValueTable};
use crate::error::{Error, Result};
use crate::sparsemax::{log_sum_exp, softmax_into, sparsemax_into, tsallis_entropy_slice};

/// Stopping rule for value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueIterationOptions {
    /// Stop once `||B v - v||_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ValueIterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Fixed point found by value iteration.
///
/// `values.q` is computed from `values.v` and `policy` is the greedy
/// (sparsemax or softmax) policy of that `q`, so the three are mutually
/// consistent; `residual = ||B v - v||_inf`.
#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    pub values: ValueTable,
    pub policy: PolicyTable,
    pub iterations: usize,
    pub residual: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// `q(s,a) = r(s,a) + gamma sum_s' T(s'|s,a) v(s')`.
fn q_values(mdp: &TabularMdp, reward: &[f64], v: &[f64]) -> Vec<f64> {
    let na = mdp.n_actions();
    let mut q = Vec::with_capacity(reward.len());
    for s in 0..mdp.n_states() {
        for a in 0..na {
            let future: f64 = mdp.successors(s, a).iter().map(|&(t, p)| p * v[t]).sum();
            q.push(reward[s * na + a] + mdp.gamma() * future);
        }
    }
    q
}

fn sparse_backup_raw(
    mdp: &TabularMdp,
    reward: &[f64],
    v: &[f64],
    alpha: f64,
) -> (ValueTable, PolicyTable) {
    let na = mdp.n_actions();
    let q = q_values(mdp, reward, v);
    let mut probs = vec![0.0; q.len()];
    let mut scaled = vec![0.0; na];
    let mut v_new = Vec::with_capacity(mdp.n_states());
    for (s, (q_row, p_row)) in q.chunks(na).zip(probs.chunks_mut(na)).enumerate() {
        debug_assert!(s < mdp.n_states());
        for (z, &qa) in scaled.iter_mut().zip(q_row) {
            *z = qa / alpha;
        }
        let (tau, support) = sparsemax_into(&scaled, p_row);
        let spread: f64 = support.iter().map(|&a| scaled[a] * scaled[a] - tau * tau).sum();
        v_new.push(alpha * (0.5 * spread + 0.5));
    }
    (
        ValueTable {
            v: v_new,
            q,
            n_actions: na,
        },
        PolicyTable::from_raw(mdp.n_states(), na, probs),
    )
}

fn soft_backup_raw(
    mdp: &TabularMdp,
    reward: &[f64],
    v: &[f64],
    alpha: f64,
) -> (ValueTable, PolicyTable) {
    let na = mdp.n_actions();
    let q = q_values(mdp, reward, v);
    let mut probs = vec![0.0; q.len()];
    let mut scaled = vec![0.0; na];
    let mut v_new = Vec::with_capacity(mdp.n_states());
    for (q_row, p_row) in q.chunks(na).zip(probs.chunks_mut(na)) {
        for (z, &qa) in scaled.iter_mut().zip(q_row) {
            *z = qa / alpha;
        }
        softmax_into(&scaled, p_row);
        v_new.push(alpha * log_sum_exp(&scaled));
    }
    (
        ValueTable {
            v: v_new,
            q,
            n_actions: na,
        },
        PolicyTable::from_raw(mdp.n_states(), na, probs),
    )
}

/// One sparse Bellman backup under the MDP's own reward.
pub fn sparse_bellman_backup(
    mdp: &TabularMdp,
    v: &ValueTable,
    alpha: f64,
) -> Result<(ValueTable, PolicyTable)> {
    sparse_bellman_backup_with_reward(mdp, mdp.rewards(), &v.v, alpha)
}

/// One sparse Bellman backup under an arbitrary reward table.
pub fn sparse_bellman_backup_with_reward(
    mdp: &TabularMdp,
    reward: &[f64],
    v: &[f64],
    alpha: f64,
) -> Result<(ValueTable, PolicyTable)> {
    check_alpha(alpha)?;
    check_shapes(mdp, reward, v)?;
    Ok(sparse_backup_raw(mdp, reward, v, alpha))
}

/// One soft (log-sum-exp) Bellman backup.
pub fn soft_bellman_backup(
    mdp: &TabularMdp,
    v: &ValueTable,
    alpha: f64,
) -> Result<(ValueTable, PolicyTable)> {
    check_alpha(alpha)?;
    check_shapes(mdp, mdp.rewards(), &v.v)?;
    Ok(soft_backup_raw(mdp, mdp.rewards(), &v.v, alpha))
}

fn check_shapes(mdp: &TabularMdp, reward: &[f64], v: &[f64]) -> Result<()> {
    if reward.len() != mdp.n_states() * mdp.n_actions() || v.len() != mdp.n_states() {
        return Err(Error::domain("value or reward table does not match the MDP"));
    }
    Ok(())
}

fn iterate<F>(
    mdp: &TabularMdp,
    v0: Vec<f64>,
    opts: ValueIterationOptions,
    backup: F,
) -> Result<ValueIterationResult>
where
    F: Fn(&[f64]) -> (ValueTable, PolicyTable),
{
    if !(opts.tol > 0.0) {
        return Err(Error::domain("value iteration tolerance must be positive"));
    }
    let mut v = v0;
    let mut residual = f64::INFINITY;
    for iterations in 0..=opts.max_iter {
        let (next, policy) = backup(&v);
        residual = sup_norm_diff(&next.v, &v);
        if residual <= opts.tol {
            // q and policy here are the backup *of* v, so they are consistent with v
            let values = ValueTable {
                v,
                q: next.q,
                n_actions: mdp.n_actions(),
            };
            return Ok(ValueIterationResult {
                values,
                policy,
                iterations,
                residual,
            });
        }
        v = next.v;
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Sparse value iteration from `v = 0` under the MDP's reward.
pub fn sparse_value_iteration(
    mdp: &TabularMdp,
    alpha: f64,
    opts: ValueIterationOptions,
) -> Result<ValueIterationResult> {
    sparse_value_iteration_with_reward(mdp, mdp.rewards(), alpha, opts, None)
}

/// Sparse value iteration under `reward`, optionally warm-started.
pub fn sparse_value_iteration_with_reward(
    mdp: &TabularMdp,
    reward: &[f64],
    alpha: f64,
    opts: ValueIterationOptions,
    warm_start: Option<&[f64]>,
) -> Result<ValueIterationResult> {
    check_alpha(alpha)?;
    let v0 = warm_start.map_or_else(|| vec![0.0; mdp.n_states()], <[f64]>::to_vec);
    check_shapes(mdp, reward, &v0)?;
    iterate(mdp, v0, opts, |v| sparse_backup_raw(mdp, reward, v, alpha))
}

/// Soft value iteration (softmax policies, log-sum-exp values).
pub fn soft_value_iteration(
    mdp: &TabularMdp,
    alpha: f64,
    opts: ValueIterationOptions,
) -> Result<ValueIterationResult> {
    check_alpha(alpha)?;
    iterate(mdp, vec![0.0; mdp.n_states()], opts, |v| {
        soft_backup_raw(mdp, mdp.rewards(), v, alpha)
    })
}

/// Exact policy evaluation: solves `(I - gamma P_pi) v = r_pi`.
pub fn evaluate_policy(mdp: &TabularMdp, pi: &PolicyTable) -> Result<Vec<f64>> {
    evaluate_policy_with_bonus(mdp, pi, 0.0)
}

/// Exact evaluation of `pi` under `r_pi(s) + alpha * 1/2 (1 - sum_a pi(a|s)^2)`.
pub fn evaluate_policy_with_bonus(mdp: &TabularMdp, pi: &PolicyTable, alpha: f64) -> Result<Vec<f64>> {
    pi.check_against(mdp)?;
    let n = mdp.n_states();
    let mut system = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        let row = pi.row(s);
        rhs[s] = alpha * tsallis_entropy_slice(row);
        for (a, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            rhs[s] += p * mdp.reward(s, a);
            for &(t, pt) in mdp.successors(s, a) {
                system[(s, t)] -= mdp.gamma() * p * pt;
            }
        }
    }
    let v = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular policy evaluation system".into()))?;
    Ok(v.iter().copied().collect())
}
