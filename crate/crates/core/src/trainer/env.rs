use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::mdn::SparseMixturePolicy;
use crate::trajectory::{Episode, Step, TrajectoryBatch};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub reward: f64,
    pub done: bool,
}

/// Episodic continuous-control environment. Instances are immutable; the
/// evolving state is passed in and out explicitly.
pub trait Environment: Sync {
    type State: Clone + Send;

    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Maximum episode length.
    fn horizon(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    fn observe(&self, state: &Self::State) -> Vec<f64>;
    /// Applies `clip_action` to `action` before moving.
    fn step(&self, state: &Self::State, action: &[f64]) -> Transition<Self::State>;
    fn clip_action(&self, action: &[f64]) -> Vec<f64>;

    /// Index of the goal captured in `state`, if any.
    fn goal_of(&self, _state: &Self::State) -> Option<usize> {
        None
    }
}

/// Anything that picks an action from an observation.
pub trait ActionPolicy: Sync {
    fn act(&self, observation: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64>;
}

impl ActionPolicy for SparseMixturePolicy {
    fn act(&self, observation: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.head(observation).mixture.sample(rng).1
    }
}

impl<F> ActionPolicy for F
where
    F: Fn(&[f64], &mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    fn act(&self, observation: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self(observation, rng)
    }
}

/// Rollouts with the goal (if any) each episode ended in.
#[derive(Debug, Clone)]
pub struct Rollouts {
    pub batch: TrajectoryBatch,
    pub goals: Vec<Option<usize>>,
}

impl Rollouts {
    /// Number of distinct goals captured at least once.
    pub fn reachability(&self) -> usize {
        self.goals.iter().flatten().collect::<BTreeSet<_>>().len()
    }
}

/// Random stream for one episode, fixed by `(seed, round, episode)` alone.
pub fn episode_rng(seed: u64, round: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((round << 32) | episode);
    rng.set_word_pos(0);
    rng
}

/// Runs one episode. Recorded actions are the raw policy samples; the
/// environment clips them itself.
pub fn rollout_episode<E: Environment, P: ActionPolicy + ?Sized>(
    policy: &P,
    env: &E,
    rng: &mut ChaCha8Rng,
) -> (Episode, Option<usize>) {
    let mut state = env.reset(rng);
    let mut steps = Vec::with_capacity(env.horizon());
    let mut goal = None;
    for _ in 0..env.horizon() {
        let obs = env.observe(&state);
        let action = policy.act(&obs, rng);
        let next = env.step(&state, &action);
        steps.push(Step {
            state: obs,
            action,
            reward: Some(next.reward),
        });
        state = next.state;
        if next.done {
            goal = env.goal_of(&state);
            break;
        }
    }
    (Episode { steps }, goal)
}

/// `n` episodes with pre-assigned random streams, so the result does not
/// depend on thread scheduling.
pub fn sample_rollouts<E: Environment, P: ActionPolicy + ?Sized>(
    policy: &P,
    env: &E,
    n: usize,
    seed: u64,
    round: u64,
) -> Result<Rollouts> {
    let (episodes, goals): (Vec<_>, Vec<_>) = (0..n as u64)
        .into_par_iter()
        .map(|i| rollout_episode(policy, env, &mut episode_rng(seed, round, i)))
        .collect::<Vec<_>>()
        .into_iter()
        .unzip();
    Ok(Rollouts {
        batch: TrajectoryBatch::new(episodes)?,
        goals,
    })
}
