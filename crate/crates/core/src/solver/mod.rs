//! Maximum causal Tsallis entropy estimation on tabular MDPs.
//!
//! The primal problem maximizes `alpha * W(pi)` subject to matching the
//! expert's feature expectation. [`solve_mcte`] runs dual ascent on the
//! feature weights `theta`; each step solves the sparse MDP with reward
//! `theta^T phi` exactly, so the dual gradient `mu_expert - mu_theta` is exact.
//! [`verify_kkt`] checks the optimality system on any candidate
//! `(pi, theta, c)` and [`robust_bayes_minimax`] is a brute-force oracle for
//! the Brier-score minimax game on tiny instances.

mod robust;

pub use robust::{robust_bayes_minimax, robust_bayes_oracle, RobustBayesResult};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparsemax::sparsemax_into;
use crate::tabular::{
    occupancy_from_policy, sparse_value_iteration_with_reward, PolicyTable, TabularEpisode,
    TabularMdp, ValueIterationOptions,
};

/// Expected discounted feature sum `sum_{s,a} rho(s,a) phi(s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExpectation(pub Vec<f64>);

impl FeatureExpectation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sup_distance(&self, other: &FeatureExpectation) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Lagrange multipliers of the estimation problem: feature weights `theta`
/// and per-state flow duals `c`. The nonnegativity multipliers are implicit
/// in the sparsemax clamp and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub theta: Vec<f64>,
    pub c: Vec<f64>,
    pub step_count: usize,
}

pub fn feature_expectation(mdp: &TabularMdp, pi: &PolicyTable) -> Result<FeatureExpectation> {
    let rho = occupancy_from_policy(mdp, pi)?;
    let mut mu = vec![0.0; mdp.n_features()];
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let r = rho.get(s, a);
            if r == 0.0 {
                continue;
            }
            for (m, f) in mu.iter_mut().zip(mdp.feature(s, a)) {
                *m += r * f;
            }
        }
    }
    Ok(FeatureExpectation(mu))
}

/// `(1/N) sum_i sum_t gamma^t phi(s_t, a_t)` over demonstration episodes.
pub fn empirical_feature_expectation<'a, F>(
    demos: &[TabularEpisode],
    gamma: f64,
    features: F,
) -> Result<FeatureExpectation>
where
    F: Fn(usize, usize) -> &'a [f64],
{
    let first = demos
        .iter()
        .find_map(|ep| ep.first())
        .ok_or_else(|| Error::domain("empirical feature expectation of an empty batch"))?;
    let dim = features(first.0, first.1).len();
    let mut mu = vec![0.0; dim];
    for ep in demos {
        let mut discount = 1.0;
        for &(s, a) in ep {
            for (m, f) in mu.iter_mut().zip(features(s, a)) {
                *m += discount * f;
            }
            discount *= gamma;
        }
    }
    let n = demos.len() as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    Ok(FeatureExpectation(mu))
}

const MIN_STEP: f64 = 1e-12;

/// Settings for [`solve_mcte`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub alpha: f64,
    /// Initial step size; halved on insufficient decrease.
    pub lr: f64,
    pub iters: usize,
    /// Stop early once `||mu_expert - mu_theta||_inf <= grad_tol`.
    pub grad_tol: f64,
    pub inner: ValueIterationOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lr: 0.1,
            iters: 20_000,
            grad_tol: 1e-5,
            inner: ValueIterationOptions::default(),
        }
    }
}

/// One row of the solver's residual log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverRecord {
    pub iteration: usize,
    pub grad_norm: f64,
    pub kkt_residual_policy: f64,
    pub kkt_residual_value: f64,
}

/// Best iterate of the dual ascent.
#[derive(Debug, Clone)]
pub struct McteSolution {
    pub policy: PolicyTable,
    pub dual: DualState,
    pub mu: FeatureExpectation,
    /// `||mu_expert - mu||_inf` at the returned iterate, the minimum over the run.
    pub grad_norm: f64,
    pub converged: bool,
    pub history: Vec<SolverRecord>,
}

/// Dual ascent `theta <- theta + lr (mu_expert - mu_theta)` with an exact
/// sparse-MDP inner solve; returns the iterate with the smallest gradient.
///
/// The step is gradient descent on the convex dual
/// `D(theta) = d0^T v_theta - theta^T mu_expert`. The step size is halved
/// whenever a step fails the sufficient-decrease test on `D` and recovers
/// geometrically towards `opts.lr` after accepted steps.
pub fn solve_mcte(
    mdp: &TabularMdp,
    mu_expert: &FeatureExpectation,
    opts: &SolveOptions,
) -> Result<McteSolution> {
    if mu_expert.len() != mdp.n_features() {
        return Err(Error::domain(format!(
            "expert feature expectation has {} entries, MDP has {} features",
            mu_expert.len(),
            mdp.n_features()
        )));
    }
    if !(opts.alpha > 0.0) || !(opts.lr > 0.0) {
        return Err(Error::domain("alpha and lr must be positive"));
    }
    let solve = |theta: &[f64], warm: Option<&[f64]>| {
        sparse_value_iteration_with_reward(mdp, &mdp.linear_reward(theta), opts.alpha, opts.inner, warm)
    };
    let dual_value = |v: &[f64], theta: &[f64]| -> f64 {
        let start: f64 = mdp.initial().iter().zip(v).map(|(d, v)| d * v).sum();
        start - theta.iter().zip(&mu_expert.0).map(|(t, m)| t * m).sum::<f64>()
    };
    let mut theta = vec![0.0; mdp.n_features()];
    let mut fixed = solve(&theta, None)?;
    let mut lr = opts.lr;
    let mut history = Vec::with_capacity(opts.iters);
    let mut best: Option<McteSolution> = None;

    for step in 0..opts.iters.max(1) {
        let mu = feature_expectation(mdp, &fixed.policy)?;
        let grad: Vec<f64> = mu_expert.0.iter().zip(&mu.0).map(|(e, m)| e - m).collect();
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let dual = DualState {
            theta: theta.clone(),
            c: fixed.values.v.clone(),
            step_count: step,
        };
        let kkt = verify_kkt(mdp, &fixed.policy, &dual, opts.alpha)?;
        history.push(SolverRecord {
            iteration: step,
            grad_norm,
            kkt_residual_policy: kkt.policy_residual,
            kkt_residual_value: kkt.value_residual,
        });
        if best.as_ref().map_or(true, |b| grad_norm < b.grad_norm) {
            best = Some(McteSolution {
                policy: fixed.policy.clone(),
                dual,
                mu,
                grad_norm,
                converged: false,
                history: Vec::new(),
            });
        }
        if grad_norm <= opts.grad_tol || step + 1 == opts.iters {
            break;
        }
        let current = dual_value(&fixed.values.v, &theta);
        let decrease: f64 = 0.5 * grad.iter().map(|g| g * g).sum::<f64>();
        let slack = 1e-9 * (1.0 + current.abs());
        loop {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + lr * g).collect();
            let next = solve(&trial, Some(&fixed.values.v))?;
            if dual_value(&next.values.v, &trial) <= current - lr * decrease + slack || lr < MIN_STEP {
                theta = trial;
                fixed = next;
                lr = (1.25 * lr).min(opts.lr);
                break;
            }
            lr *= 0.5;
        }
    }
    let mut best = best.expect("at least one dual step runs");
    best.converged = best.grad_norm <= opts.grad_tol;
    best.history = history;
    Ok(best)
}

/// Maximum violations of the two optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `max |pi(a|s) - sparsemax(q_s / alpha)_a|`.
    pub policy_residual: f64,
    /// `max |c_s - alpha [1/2 sum_{a in S(s)} ((q_sa/alpha)^2 - tau^2) + 1/2]|`.
    pub value_residual: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.policy_residual.max(self.value_residual)
    }
}

/// Evaluates the optimality system at `(pi, theta, c)` with
/// `q_sa = theta^T phi(s,a) + gamma sum_s' c_s' T(s'|s,a)`.
pub fn verify_kkt(
    mdp: &TabularMdp,
    pi: &PolicyTable,
    dual: &DualState,
    alpha: f64,
) -> Result<KktReport> {
    if dual.theta.len() != mdp.n_features() || dual.c.len() != mdp.n_states() {
        return Err(Error::domain("dual variables do not match the MDP"));
    }
    if pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions() {
        return Err(Error::domain("policy does not match the MDP"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha must be positive"));
    }
    let na = mdp.n_actions();
    let reward = mdp.linear_reward(&dual.theta);
    let mut scaled = vec![0.0; na];
    let mut projected = vec![0.0; na];
    let mut report = KktReport {
        policy_residual: 0.0,
        value_residual: 0.0,
    };
    for s in 0..mdp.n_states() {
        for (a, z) in scaled.iter_mut().enumerate() {
            let future: f64 = mdp
                .successors(s, a)
                .iter()
                .map(|&(t, p)| p * dual.c[t])
                .sum();
            *z = (reward[s * na + a] + mdp.gamma() * future) / alpha;
        }
        let (tau, support) = sparsemax_into(&scaled, &mut projected);
        for (p, q) in pi.row(s).iter().zip(&projected) {
            report.policy_residual = report.policy_residual.max((p - q).abs());
        }
        let spread: f64 = support.iter().map(|&a| scaled[a] * scaled[a] - tau * tau).sum();
        let c_expected = alpha * (0.5 * spread + 0.5);
        report.value_residual = report.value_residual.max((dual.c[s] - c_expected).abs());
    }
    Ok(report)
}

/// Writes `iteration,grad_norm,kkt_residual_policy,kkt_residual_value`.
pub fn write_residual_csv(history: &[SolverRecord], path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "iteration,grad_norm,kkt_residual_policy,kkt_residual_value").map_err(io)?;
    for r in history {
        writeln!(
            out,
            "{},{:e},{:e},{:e}",
            r.iteration, r.grad_norm, r.kkt_residual_policy, r.kkt_residual_value
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{gridworld, random_mdp, sparse_value_iteration, GridworldSpec};

    fn bandit(reward: Vec<f64>, gamma: f64) -> TabularMdp {
        let n = reward.len();
        TabularMdp::new(1, n, gamma, vec![1.0; n], reward, vec![1.0], 0, vec![]).unwrap()
    }

    #[test]
    fn constant_feature_gives_total_mass() {
        let mdp = random_mdp(5, 3, 0, 0.8, 2);
        let mdp = mdp.with_features(1, vec![1.0; 15]).unwrap();
        let mu = feature_expectation(&mdp, &PolicyTable::uniform(5, 3)).unwrap();
        assert!((mu.0[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn one_hot_features_give_occupancy() {
        let mdp = gridworld(&GridworldSpec { size: 3, ..Default::default() });
        let pi = PolicyTable::uniform(9, 5);
        let mu = feature_expectation(&mdp, &pi).unwrap();
        let rho = occupancy_from_policy(&mdp, &pi).unwrap();
        for (m, r) in mu.values().iter().zip(rho.as_slice()) {
            assert!((m - r).abs() < 1e-14);
        }
    }

    #[test]
    fn empirical_expectation_basics() {
        let mdp = gridworld(&GridworldSpec { size: 2, ..Default::default() });
        let phi = |s: usize, a: usize| mdp.feature(s, a);
        let single = vec![vec![(1, 2)]];
        let mu = empirical_feature_expectation(&single, 0.9, phi).unwrap();
        assert_eq!(mu.values(), mdp.feature(1, 2));

        let ep = vec![(0, 1), (2, 3), (3, 0)];
        let one = empirical_feature_expectation(&[ep.clone()], 0.9, phi).unwrap();
        let two = empirical_feature_expectation(&[ep.clone(), ep], 0.9, phi).unwrap();
        assert_eq!(one, two);
        assert!(empirical_feature_expectation(&[], 0.9, phi).is_err());
    }

    #[test]
    fn kkt_closed_form_bandit() {
        // gamma = 0, theta picks reward [1, 1]: pi = [1/2, 1/2], c = 1.25
        let mdp = bandit(vec![0.0, 0.0], 0.0).with_features(1, vec![1.0, 1.0]).unwrap();
        let pi = PolicyTable::uniform(1, 2);
        let dual = DualState {
            theta: vec![1.0],
            c: vec![1.25],
            step_count: 0,
        };
        let r = verify_kkt(&mdp, &pi, &dual, 1.0).unwrap();
        assert!(r.max() <= 1e-12);
    }

    #[test]
    fn kkt_detects_policy_perturbation() {
        let mdp = gridworld(&GridworldSpec::default());
        let theta: Vec<f64> = (0..mdp.n_features()).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let reward = mdp.linear_reward(&theta);
        let sol = sparse_value_iteration_with_reward(&mdp, &reward, 1.0, Default::default(), None)
            .unwrap();
        let dual = DualState {
            theta,
            c: sol.values.v.clone(),
            step_count: 0,
        };
        let clean = verify_kkt(&mdp, &sol.policy, &dual, 1.0).unwrap();
        assert!(clean.max() <= 1e-8);

        let mut probs = sol.policy.as_slice().to_vec();
        probs[0] += 0.01;
        let total: f64 = probs[..5].iter().sum();
        probs[..5].iter_mut().for_each(|p| *p /= total);
        let perturbed = PolicyTable::new(25, 5, probs).unwrap();
        let r = verify_kkt(&mdp, &perturbed, &dual, 1.0).unwrap();
        assert!(r.policy_residual >= 0.005);
    }

    #[test]
    fn value_iteration_fixed_point_passes_kkt_with_mdp_reward() {
        let mdp = random_mdp(6, 3, 0, 0.9, 8);
        // identity-like features so theta reproduces the MDP reward
        let sa = 18;
        let mut phi = vec![0.0; sa * sa];
        for i in 0..sa {
            phi[i * sa + i] = 1.0;
        }
        let mdp = mdp.with_features(sa, phi).unwrap();
        let sol = sparse_value_iteration(&mdp, 0.7, Default::default()).unwrap();
        let dual = DualState {
            theta: mdp.rewards().to_vec(),
            c: sol.values.v,
            step_count: 0,
        };
        let r = verify_kkt(&mdp, &sol.policy, &dual, 0.7).unwrap();
        assert!(r.max() <= 1e-8, "{r:?}");
    }

    #[test]
    fn degenerate_constant_feature_converges() {
        let mdp = random_mdp(4, 3, 0, 0.9, 1).with_features(1, vec![1.0; 12]).unwrap();
        let mu = FeatureExpectation(vec![10.0]);
        let sol = solve_mcte(&mdp, &mu, &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.grad_norm <= 1e-9);
    }

    #[test]
    fn best_iterate_is_returned() {
        let mdp = gridworld(&GridworldSpec { size: 3, ..Default::default() });
        let expert = PolicyTable::new(
            9,
            5,
            (0..9).flat_map(|_| [0.0, 0.0, 0.5, 0.0, 0.5]).collect(),
        )
        .unwrap();
        let mu = feature_expectation(&mdp, &expert).unwrap();
        let opts = SolveOptions {
            iters: 40,
            lr: 3.0,
            ..Default::default()
        };
        let sol = solve_mcte(&mdp, &mu, &opts).unwrap();
        let min = sol
            .history
            .iter()
            .map(|r| r.grad_norm)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(sol.grad_norm, min);
    }

    #[test]
    fn residual_csv_layout() {
        let dir = std::env::temp_dir().join(format!("mcte-resid-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("residuals.csv");
        let rec = SolverRecord {
            iteration: 3,
            grad_norm: 0.5,
            kkt_residual_policy: 1e-12,
            kkt_residual_value: 2e-11,
        };
        write_residual_csv(&[rec], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,grad_norm,kkt_residual_policy,kkt_residual_value"
        );
        assert!(lines.next().unwrap().starts_with("3,5e-1,"));
        std::fs::remove_dir_all(dir).ok();
    }
}
