use nalgebra::{DMatrix, DVector};

use super::{OccupancyMeasure, PolicyTable, TabularMdp};
use crate::error::{Error, Result};
use crate::sparsemax::tsallis_entropy_slice;

/// Discounted state visitation `m(s) = sum_a rho_pi(s, a)`, from the direct
/// solve of `(I - gamma P_pi^T) m = d`.
pub fn state_mass(mdp: &TabularMdp, pi: &PolicyTable) -> Result<Vec<f64>> {
    pi.check_against(mdp)?;
    let n = mdp.n_states();
    let mut system = DMatrix::<f64>::identity(n, n);
    for sp in 0..n {
        for a in 0..mdp.n_actions() {
            let w = pi.prob(sp, a);
            if w == 0.0 {
                continue;
            }
            for &(s, p) in mdp.successors(sp, a) {
                system[(s, sp)] -= mdp.gamma() * w * p;
            }
        }
    }
    let rhs = DVector::from_column_slice(mdp.initial());
    let mass = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular flow system".into()))?;
    if mass.iter().any(|m| !m.is_finite()) {
        return Err(Error::Numeric("flow solve produced non-finite mass".into()));
    }
    // tiny negative round-off on unreachable states
    Ok(mass.iter().map(|&m| m.max(0.0)).collect())
}

/// Occupancy measure `rho_pi(s, a) = m(s) pi(a|s)` of a stationary policy.
pub fn occupancy_from_policy(mdp: &TabularMdp, pi: &PolicyTable) -> Result<OccupancyMeasure> {
    let mass = state_mass(mdp, pi)?;
    let na = mdp.n_actions();
    let mut rho = Vec::with_capacity(mdp.n_states() * na);
    for (s, m) in mass.iter().enumerate() {
        rho.extend(pi.row(s).iter().map(|p| m * p));
    }
    OccupancyMeasure::new(mdp.n_states(), na, rho)
}

/// Row-normalizes `rho`; states without mass get the uniform row.
pub fn policy_from_occupancy(rho: &OccupancyMeasure) -> PolicyTable {
    let na = rho.n_actions();
    let mut probs = Vec::with_capacity(rho.n_states() * na);
    for s in 0..rho.n_states() {
        let row = rho.row(s);
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            probs.extend(row.iter().map(|r| r / total));
        } else {
            probs.extend(std::iter::repeat(1.0 / na as f64).take(na));
        }
    }
    PolicyTable::from_raw(rho.n_states(), na, probs)
}

/// `1/2 sum_{s,a} rho(s,a) (1 - rho(s,a) / sum_a' rho(s,a'))`.
pub fn tsallis_entropy_of_occupancy(rho: &OccupancyMeasure) -> f64 {
    (0..rho.n_states())
        .map(|s| {
            let row = rho.row(s);
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                0.5 * row.iter().map(|r| r * (1.0 - r / total)).sum::<f64>()
            } else {
                0.0
            }
        })
        .sum()
}

/// Causal Tsallis entropy of a policy, `sum_s m(s) * 1/2 (1 - sum_a pi(a|s)^2)`.
pub fn causal_tsallis_entropy(mdp: &TabularMdp, pi: &PolicyTable) -> Result<f64> {
    let mass = state_mass(mdp, pi)?;
    Ok(mass
        .iter()
        .enumerate()
        .map(|(s, m)| m * tsallis_entropy_slice(pi.row(s)))
        .sum())
}
