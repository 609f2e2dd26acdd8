//! Finite MDPs: the data model, occupancy measures, sparse (Tsallis) and
//! soft (Shannon) Bellman backups and value iteration.

mod bellman;
mod builders;
mod occupancy;
mod sampling;

pub use bellman::{
    evaluate_policy, evaluate_policy_with_bonus, soft_bellman_backup, soft_value_iteration,
    sparse_bellman_backup, sparse_bellman_backup_with_reward, sparse_value_iteration,
    sparse_value_iteration_with_reward, ValueIterationOptions, ValueIterationResult,
};
pub use builders::{gridworld, random_mdp, GridworldSpec};
pub use sampling::{effective_horizon, sample_episode, TabularEpisode};
pub use occupancy::{
    causal_tsallis_entropy, occupancy_from_policy, policy_from_occupancy, state_mass,
    tsallis_entropy_of_occupancy,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparsemax::SimplexVector;

/// A finite discounted MDP with a feature map over state-action pairs.
///
/// Dense storage, row-major: `transition[(s * A + a) * S + s']`,
/// `reward[s * A + a]`, `features[(s * A + a) * F + f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    n_features: usize,
    gamma: f64,
    transition: Vec<f64>,
    reward: Vec<f64>,
    initial: Vec<f64>,
    features: Vec<f64>,
    // nonzero successors of each (s, a), derived from `transition`
    successors: Vec<Vec<(usize, f64)>>,
}

impl TabularMdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial: Vec<f64>,
        n_features: usize,
        features: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::domain("MDP needs at least one state and one action"));
        }
        // gamma = 0 is admitted: it is the contextual-bandit special case
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::domain(format!("discount {gamma} outside [0, 1)")));
        }
        let sa = n_states * n_actions;
        if transition.len() != sa * n_states {
            return Err(Error::domain("transition tensor has the wrong size"));
        }
        if reward.len() != sa {
            return Err(Error::domain("reward table has the wrong size"));
        }
        if features.len() != sa * n_features {
            return Err(Error::domain("feature table has the wrong size"));
        }
        if reward.iter().chain(&features).any(|v| !v.is_finite()) {
            return Err(Error::domain("rewards and features must be finite"));
        }
        let initial = SimplexVector::new(initial)
            .map_err(|e| Error::domain(format!("initial distribution: {e}")))?
            .into_inner();
        let mut transition = transition;
        for (row_idx, row) in transition.chunks_mut(n_states).enumerate() {
            let row_ok = SimplexVector::new(row.to_vec()).map_err(|e| {
                Error::domain(format!(
                    "T(.|s={}, a={}): {e}",
                    row_idx / n_actions,
                    row_idx % n_actions
                ))
            })?;
            row.copy_from_slice(row_ok.probs());
        }
        let successors = transition
            .chunks(n_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(s, &p)| (s, p))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_states,
            n_actions,
            n_features,
            gamma,
            transition,
            reward,
            initial,
            features,
            successors,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    /// Nonzero entries of `T(.|s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[s * self.n_actions + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn feature(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_features;
        &self.features[start..start + self.n_features]
    }

    /// `max |phi|` over all entries.
    pub fn feature_sup_norm(&self) -> f64 {
        self.features.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `theta^T phi(s, a)` for every pair.
    pub fn linear_reward(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.n_features);
        if self.n_features == 0 {
            return vec![0.0; self.n_states * self.n_actions];
        }
        self.features
            .chunks(self.n_features)
            .map(|phi| phi.iter().zip(theta).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Same dynamics with a different reward table.
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        if reward.len() != self.reward.len() {
            return Err(Error::domain("reward table has the wrong size"));
        }
        let mut out = self.clone();
        out.reward = reward;
        Ok(out)
    }

    /// Same dynamics with a different feature map.
    pub fn with_features(&self, n_features: usize, features: Vec<f64>) -> Result<Self> {
        if features.len() != self.n_states * self.n_actions * n_features {
            return Err(Error::domain("feature table has the wrong size"));
        }
        let mut out = self.clone();
        out.n_features = n_features;
        out.features = features;
        Ok(out)
    }

    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.initial = SimplexVector::new(initial)?.into_inner();
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MdpFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk layout of a [`TabularMdp`]: nested arrays indexed `[s][a][...]`.
#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    initial: Vec<f64>,
    features: Vec<Vec<Vec<f64>>>,
}

impl From<&TabularMdp> for MdpFile {
    fn from(m: &TabularMdp) -> Self {
        let (ns, na) = (m.n_states, m.n_actions);
        Self {
            n_states: ns,
            n_actions: na,
            gamma: m.gamma,
            transition: (0..ns)
                .map(|s| {
                    (0..na)
                        .map(|a| (0..ns).map(|t| m.transition(s, a, t)).collect())
                        .collect()
                })
                .collect(),
            reward: (0..ns)
                .map(|s| (0..na).map(|a| m.reward(s, a)).collect())
                .collect(),
            initial: m.initial.clone(),
            features: (0..ns)
                .map(|s| (0..na).map(|a| m.feature(s, a).to_vec()).collect())
                .collect(),
        }
    }
}

impl TryFrom<MdpFile> for TabularMdp {
    type Error = Error;

    fn try_from(f: MdpFile) -> Result<Self> {
        let (ns, na) = (f.n_states, f.n_actions);
        let shape_err = |what: &str| Error::domain(format!("{what} does not match n_states/n_actions"));
        if f.transition.len() != ns || f.reward.len() != ns || f.features.len() != ns {
            return Err(shape_err("outer dimension"));
        }
        let n_features = f
            .features
            .first()
            .and_then(|row| row.first())
            .map_or(0, Vec::len);
        let mut transition = Vec::with_capacity(ns * na * ns);
        let mut reward = Vec::with_capacity(ns * na);
        let mut features = Vec::with_capacity(ns * na * n_features);
        for s in 0..ns {
            if f.transition[s].len() != na || f.reward[s].len() != na || f.features[s].len() != na {
                return Err(shape_err("action dimension"));
            }
            for a in 0..na {
                if f.transition[s][a].len() != ns {
                    return Err(shape_err("transition row"));
                }
                if f.features[s][a].len() != n_features {
                    return Err(Error::domain("ragged feature vectors"));
                }
                transition.extend_from_slice(&f.transition[s][a]);
                features.extend_from_slice(&f.features[s][a]);
            }
            reward.extend_from_slice(&f.reward[s]);
        }
        TabularMdp::new(ns, na, f.gamma, transition, reward, f.initial, n_features, features)
    }
}

/// A stationary stochastic policy: one probability row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::domain("policy table has the wrong size"));
        }
        let mut out = Vec::with_capacity(probs.len());
        for (s, row) in probs.chunks(n_actions).enumerate() {
            let row = SimplexVector::new(row.to_vec())
                .map_err(|e| Error::domain(format!("policy row {s}: {e}")))?;
            out.extend_from_slice(row.probs());
        }
        Ok(Self {
            n_states,
            n_actions,
            probs: out,
        })
    }

    pub fn from_rows(rows: &[SimplexVector]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, SimplexVector::len);
        if rows.iter().any(|r| r.len() != n_actions) || n_actions == 0 {
            return Err(Error::domain("policy rows must share one nonzero length"));
        }
        Ok(Self {
            n_states: rows.len(),
            n_actions,
            probs: rows.iter().flat_map(|r| r.probs().iter().copied()).collect(),
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    // rows already known to be valid
    pub(crate) fn from_raw(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n_states * n_actions);
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &PolicyTable) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len());
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Number of actions with positive probability in state `s`.
    pub fn support_size(&self, s: usize) -> usize {
        self.row(s).iter().filter(|&&p| p > 0.0).count()
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states || self.n_actions != mdp.n_actions {
            return Err(Error::domain(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states, self.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(())
    }
}

/// Discounted state-action visitation measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    n_states: usize,
    n_actions: usize,
    rho: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn new(n_states: usize, n_actions: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != n_states * n_actions {
            return Err(Error::domain("occupancy table has the wrong size"));
        }
        if rho.iter().any(|&r| !r.is_finite() || r < 0.0) {
            return Err(Error::domain("occupancy entries must be finite and nonnegative"));
        }
        Ok(Self {
            n_states,
            n_actions,
            rho,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.rho[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rho[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rho
    }

    pub fn state_mass(&self, s: usize) -> f64 {
        self.row(s).iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &OccupancyMeasure, lambda: f64) -> OccupancyMeasure {
        assert_eq!(self.rho.len(), other.rho.len());
        OccupancyMeasure {
            n_states: self.n_states,
            n_actions: self.n_actions,
            rho: self
                .rho
                .iter()
                .zip(&other.rho)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        }
    }

    /// Per-state violation of the discounted flow constraint
    /// `sum_a rho(s,a) = d(s) + gamma sum_{s',a'} T(s|s',a') rho(s',a')`.
    pub fn flow_residuals(&self, mdp: &TabularMdp) -> Vec<f64> {
        let mut inflow = mdp.initial.clone();
        for sp in 0..mdp.n_states {
            for ap in 0..mdp.n_actions {
                let r = self.get(sp, ap);
                if r == 0.0 {
                    continue;
                }
                for &(s, p) in mdp.successors(sp, ap) {
                    inflow[s] += mdp.gamma * p * r;
                }
            }
        }
        (0..mdp.n_states)
            .map(|s| self.state_mass(s) - inflow[s])
            .collect()
    }
}

/// State values and state-action values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    /// Row-major `q[s * A + a]`.
    pub q: Vec<f64>,
    pub n_actions: usize,
}

impl ValueTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            v: vec![0.0; n_states],
            q: vec![0.0; n_states * n_actions],
            n_actions,
        }
    }

    pub fn from_values(v: Vec<f64>, n_actions: usize) -> Self {
        let n = v.len();
        Self {
            v,
            q: vec![0.0; n * n_actions],
            n_actions,
        }
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

pub(crate) fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
