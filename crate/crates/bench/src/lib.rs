//! Fixtures shared by the kernel benchmarks.

use mcte::mdn::{MdnConfig, SparseMixturePolicy, WeightedState};
use mcte::tabular::PolicyTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn logits(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

/// Full-support random policy table.
pub fn policy_table(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize) -> PolicyTable {
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let row: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = row.iter().sum();
        probs.extend(row.iter().map(|p| p / total));
    }
    PolicyTable::new(n_states, n_actions, probs).expect("rows are normalized")
}

/// Default two-dimensional mixture policy with spread-out components.
pub fn mixture_policy(seed: u64, components: usize) -> SparseMixturePolicy {
    let config = MdnConfig {
        components,
        init_mean_spread: 0.8,
        init_out_scale: 0.5,
        ..MdnConfig::default()
    };
    SparseMixturePolicy::new(config, &mut rng(seed)).expect("default config is valid")
}

pub fn states(rng: &mut ChaCha8Rng, n: usize) -> Vec<WeightedState> {
    (0..n)
        .map(|_| WeightedState {
            state: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            weight: 1.0 / n as f64,
        })
        .collect()
}
