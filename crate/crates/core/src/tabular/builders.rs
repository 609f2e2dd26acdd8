use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::TabularMdp;

/// A square gridworld with five actions (stay, up, down, left, right),
/// slippery moves, one-hot state-action features and a goal in the far
/// corner.
#[derive(Debug, Clone, PartialEq)]
pub struct GridworldSpec {
    pub size: usize,
    /// Probability that the intended move is replaced by a uniformly random one.
    pub slip: f64,
    pub gamma: f64,
    pub goal_reward: f64,
    pub step_reward: f64,
}

impl Default for GridworldSpec {
    fn default() -> Self {
        Self {
            size: 5,
            slip: 0.1,
            gamma: 0.9,
            goal_reward: 1.0,
            step_reward: 0.0,
        }
    }
}

const MOVES: [(i64, i64); 5] = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];

/// Builds the gridworld MDP. States are `row * size + col`; the initial
/// distribution is uniform over all cells.
pub fn gridworld(spec: &GridworldSpec) -> TabularMdp {
    let n = spec.size;
    let ns = n * n;
    let na = MOVES.len();
    let target = |s: usize, m: usize| -> usize {
        let (r, c) = ((s / n) as i64, (s % n) as i64);
        let (dr, dc) = MOVES[m];
        let (nr, nc) = (r + dr, c + dc);
        if nr < 0 || nc < 0 || nr >= n as i64 || nc >= n as i64 {
            s
        } else {
            nr as usize * n + nc as usize
        }
    };
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![spec.step_reward; ns * na];
    let goal = ns - 1;
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            row[target(s, a)] += 1.0 - spec.slip;
            for m in 0..na {
                row[target(s, m)] += spec.slip / na as f64;
            }
            if s == goal {
                reward[s * na + a] = spec.goal_reward;
            }
        }
    }
    let sa = ns * na;
    let mut features = vec![0.0; sa * sa];
    for i in 0..sa {
        features[i * sa + i] = 1.0;
    }
    TabularMdp::new(ns, na, spec.gamma, transition, reward, vec![1.0 / ns as f64; ns], sa, features)
        .expect("gridworld construction is valid by design")
}

/// Random dense MDP with uniform-then-normalized transition rows, rewards in
/// `[-1, 1]`, Gaussian features and a random initial distribution.
pub fn random_mdp(
    n_states: usize,
    n_actions: usize,
    n_features: usize,
    gamma: f64,
    seed: u64,
) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normalized = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0f64).powi(2)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect()
    };
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(normalized(n_states, &mut rng));
    }
    let initial = normalized(n_states, &mut rng);
    let reward = (0..n_states * n_actions)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let features = (0..n_states * n_actions * n_features)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    TabularMdp::new(
        n_states, n_actions, gamma, transition, reward, initial, n_features, features,
    )
    .expect("random MDP construction is valid by design")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gridworld_shapes() {
        let mdp = gridworld(&GridworldSpec::default());
        assert_eq!(mdp.n_states(), 25);
        assert_eq!(mdp.n_actions(), 5);
        assert_eq!(mdp.n_features(), 125);
        // moving up from the top row stays put with prob 1 - slip + slip * 2/5
        let p = mdp.transition(0, 1, 0);
        assert!((p - (0.9 + 0.1 * 3.0 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn random_mdp_is_deterministic_in_seed() {
        assert_eq!(random_mdp(3, 2, 2, 0.9, 4), random_mdp(3, 2, 2, 0.9, 4));
        assert_ne!(random_mdp(3, 2, 2, 0.9, 4), random_mdp(3, 2, 2, 0.9, 5));
    }
}
