//! Brute-force minimax over simplex grids for the Brier-score game between
//! a decision maker `pi` and nature `pi_tilde`:
//!
//! ```text
//! min_pi max_{pi_tilde admissible} sum_{s,a} rho_{pi_tilde}(s,a) B_pi(s,a)
//! B_pi(s,a) = 1/2 (1 - 2 pi(a|s) + sum_a' pi(a'|s)^2)
//! ```
//!
//! Nature is admissible when its feature expectation lies within
//! `grid_step * ||phi||_inf` of the expert's (exact equality has measure zero
//! on a grid).

use rayon::prelude::*;

use super::{feature_expectation, FeatureExpectation};
use crate::error::{Error, Result};
use crate::tabular::{occupancy_from_policy, PolicyTable, TabularMdp};

const MAX_PAIRS: usize = 8;
const MAX_GRID_POLICIES: usize = 250_000;

#[derive(Debug, Clone)]
pub struct RobustBayesResult {
    /// Minimax decision rule.
    pub policy: PolicyTable,
    /// Nature's best response to `policy`.
    pub nature: PolicyTable,
    /// Worst-case expected Brier score of `policy`.
    pub value: f64,
    /// Number of admissible nature policies.
    pub admissible: usize,
}

/// Minimax Brier policy under the feature-matching constraint.
pub fn robust_bayes_oracle(
    mdp: &TabularMdp,
    mu_expert: &FeatureExpectation,
    grid_step: f64,
) -> Result<PolicyTable> {
    Ok(robust_bayes_minimax(mdp, Some(mu_expert), grid_step)?.policy)
}

/// Minimax Brier policy; `constraint = None` admits every nature policy.
pub fn robust_bayes_minimax(
    mdp: &TabularMdp,
    constraint: Option<&FeatureExpectation>,
    grid_step: f64,
) -> Result<RobustBayesResult> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if ns * na > MAX_PAIRS {
        return Err(Error::domain(format!(
            "brute-force oracle needs n_states * n_actions <= {MAX_PAIRS}, got {}",
            ns * na
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::domain(format!("grid_step {grid_step} outside (0, 0.1]")));
    }
    let parts = (1.0 / grid_step).round() as usize;
    let rows = simplex_grid(na, parts);
    let n_policies = rows
        .len()
        .checked_pow(ns as u32)
        .filter(|&n| n <= MAX_GRID_POLICIES)
        .ok_or_else(|| Error::domain("simplex grid too large for brute force"))?;

    let policy_at = |index: usize| -> PolicyTable {
        let mut probs = Vec::with_capacity(ns * na);
        let mut rest = index;
        for _ in 0..ns {
            probs.extend_from_slice(&rows[rest % rows.len()]);
            rest /= rows.len();
        }
        PolicyTable::new(ns, na, probs).expect("grid rows are on the simplex")
    };

    let tolerance = grid_step * mdp.feature_sup_norm();
    let nature: Vec<(usize, Vec<f64>)> = (0..n_policies)
        .into_par_iter()
        .map(|i| -> Result<Option<(usize, Vec<f64>)>> {
            let pi = policy_at(i);
            if let Some(mu_e) = constraint {
                let mu = feature_expectation(mdp, &pi)?;
                if mu.sup_distance(mu_e) > tolerance {
                    return Ok(None);
                }
            }
            Ok(Some((i, occupancy_from_policy(mdp, &pi)?.as_slice().to_vec())))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if nature.is_empty() {
        return Err(Error::domain(
            "no grid policy satisfies the feature constraint; refine grid_step",
        ));
    }

    // per-row Brier table: B(a) = 1/2 (1 - 2 p_a + sum p^2)
    let brier_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|p| {
            let sq: f64 = p.iter().map(|x| x * x).sum();
            p.iter().map(|x| 0.5 * (1.0 - 2.0 * x + sq)).collect()
        })
        .collect();

    let worst: Vec<(f64, usize)> = (0..n_policies)
        .into_par_iter()
        .map(|i| {
            let mut b = Vec::with_capacity(ns * na);
            let mut rest = i;
            for _ in 0..ns {
                b.extend_from_slice(&brier_rows[rest % rows.len()]);
                rest /= rows.len();
            }
            let mut best = (f64::NEG_INFINITY, 0);
            for (j, (_, rho)) in nature.iter().enumerate() {
                let value: f64 = rho.iter().zip(&b).map(|(r, x)| r * x).sum();
                if value > best.0 {
                    best = (value, j);
                }
            }
            best
        })
        .collect();

    // first index wins ties, so the reduction order is fixed
    let (decision, &(value, response)) = worst
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("grid is nonempty");
    Ok(RobustBayesResult {
        policy: policy_at(decision),
        nature: policy_at(nature[response].0),
        value,
        admissible: nature.len(),
    })
}

/// All points of `{p : p_i = k_i / parts, sum k_i = parts}`.
fn simplex_grid(n: usize, parts: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(n - 1, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut counts = Vec::new();
    rec(n, parts, &mut Vec::with_capacity(n), &mut counts);
    counts
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / parts as f64).collect())
        .collect()
}
