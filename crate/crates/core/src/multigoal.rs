//! Point mass on a square with four attracting goals and four repulsors,
//! plus a grid-discretized expert solved as a sparse MDP.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{sparse_value_iteration, PolicyTable, TabularMdp, ValueIterationOptions};
use crate::trainer::{sample_rollouts, ActionPolicy, Environment, Transition};
use crate::trajectory::{Episode, Step, TrajectoryBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiGoalWorld {
    /// Positions live in `[-bound, bound]^2`.
    pub bound: f64,
    pub attractors: Vec<[f64; 2]>,
    pub repulsors: Vec<[f64; 2]>,
    pub dt: f64,
    pub max_steps: usize,
    /// Actions are clipped to `[-action_max, action_max]^2`.
    pub action_max: f64,
    pub attractor_gain: f64,
    pub repulsor_gain: f64,
    pub kernel_width: f64,
    pub goal_radius: f64,
    /// Start positions are uniform on `[-start_jitter, start_jitter]^2`.
    pub start_jitter: f64,
}

impl Default for MultiGoalWorld {
    fn default() -> Self {
        Self {
            bound: 1.0,
            attractors: vec![[0.8, 0.8], [-0.8, 0.8], [-0.8, -0.8], [0.8, -0.8]],
            repulsors: vec![[0.8, 0.0], [0.0, 0.8], [-0.8, 0.0], [0.0, -0.8]],
            dt: 2.0 / 21.0,
            max_steps: 25,
            action_max: 1.0,
            attractor_gain: 1.0,
            repulsor_gain: 0.1,
            kernel_width: 0.3,
            goal_radius: 0.1,
            start_jitter: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub position: [f64; 2],
    pub step: usize,
}

impl MultiGoalWorld {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.bound,
            self.dt,
            self.action_max,
            self.attractor_gain,
            self.repulsor_gain,
            self.kernel_width,
            self.goal_radius,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_steps == 0 || !(self.start_jitter >= 0.0) {
            return Err(Error::domain("world constants must be positive"));
        }
        let inside = |p: &[f64; 2]| p.iter().all(|c| c.abs() <= self.bound);
        if !self.attractors.iter().chain(&self.repulsors).all(inside) {
            return Err(Error::domain("attractors and repulsors must lie inside the bounds"));
        }
        for (i, a) in self.attractors.iter().enumerate() {
            if self.attractors[..i].contains(a) {
                return Err(Error::domain(format!("attractor {i} duplicates an earlier one")));
            }
        }
        if self.attractors.is_empty() {
            return Err(Error::domain("world needs at least one attractor"));
        }
        Ok(())
    }

    fn kernel(&self, p: [f64; 2], c: [f64; 2]) -> f64 {
        let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
        (-0.5 * d2 / (self.kernel_width * self.kernel_width)).exp()
    }

    /// Attractor potential: the sum of Gaussian kernels.
    pub fn potential(&self, p: [f64; 2]) -> f64 {
        self.attractors.iter().map(|&c| self.kernel(p, c)).sum()
    }

    pub fn repulsion(&self, p: [f64; 2]) -> f64 {
        self.repulsors.iter().map(|&c| self.kernel(p, c)).sum()
    }

    /// Reward for moving from `from` to `to`.
    pub fn reward(&self, from: [f64; 2], to: [f64; 2]) -> f64 {
        self.attractor_gain * (self.potential(to) - self.potential(from)) - self.repulsor_gain * self.repulsion(to)
    }

    pub fn captured(&self, p: [f64; 2]) -> Option<usize> {
        self.attractors
            .iter()
            .position(|c| (p[0] - c[0]).hypot(p[1] - c[1]) <= self.goal_radius)
    }

    pub fn clip(&self, action: &[f64]) -> [f64; 2] {
        [
            action[0].clamp(-self.action_max, self.action_max),
            action[1].clamp(-self.action_max, self.action_max),
        ]
    }

    /// Position after applying `action` from `p`, clamped to the bounds.
    pub fn advance(&self, p: [f64; 2], action: &[f64]) -> [f64; 2] {
        let a = self.clip(action);
        [
            (p[0] + self.dt * a[0]).clamp(-self.bound, self.bound),
            (p[1] + self.dt * a[1]).clamp(-self.bound, self.bound),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let world: Self = serde_json::from_str(text)?;
        world.validate()?;
        Ok(world)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl Environment for MultiGoalWorld {
    type State = EnvState;

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.max_steps
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let j = self.start_jitter;
        let mut draw = || if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
        EnvState {
            position: [draw(), draw()],
            step: 0,
        }
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        state.position.to_vec()
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Transition<EnvState> {
        let position = self.advance(state.position, action);
        let next = EnvState {
            position,
            step: state.step + 1,
        };
        Transition {
            state: next,
            reward: self.reward(state.position, position),
            done: self.captured(position).is_some() || next.step >= self.max_steps,
        }
    }

    fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        self.clip(action).to_vec()
    }

    fn goal_of(&self, state: &EnvState) -> Option<usize> {
        self.captured(state.position)
    }
}

/// Number of distinct attractors captured over `n_episodes` rollouts.
pub fn reachability<P: ActionPolicy + ?Sized>(
    policy: &P,
    world: &MultiGoalWorld,
    n_episodes: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    if n_episodes == 0 {
        return Err(Error::domain("reachability needs at least one episode"));
    }
    Ok(sample_rollouts(policy, world, n_episodes, rng.gen(), 0)?.reachability())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    pub grid_n: usize,
    pub n_directions: usize,
    /// Entropy coefficient of the sparse MDP.
    pub alpha: f64,
    pub gamma: f64,
    pub n_demos: usize,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            grid_n: 21,
            n_directions: 8,
            alpha: 0.01,
            gamma: 0.95,
            n_demos: 300,
        }
    }
}

/// Sparsemax-optimal policy of the discretized world.
#[derive(Debug, Clone)]
pub struct GridExpert {
    pub world: MultiGoalWorld,
    pub grid_n: usize,
    /// Unit vectors in the infinity norm, one per action.
    pub directions: Vec<[f64; 2]>,
    pub mdp: TabularMdp,
    pub policy: PolicyTable,
    pub values: Vec<f64>,
    /// Cells whose center lies within the capture radius.
    pub goal_cells: BTreeSet<usize>,
}

/// `n` directions evenly spaced in angle, scaled to unit infinity norm.
pub fn compass_directions(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            let m = s.abs().max(c.abs());
            // snap rounding noise so axis and diagonal moves are exact
            let snap = |x: f64| {
                let r = x.round();
                if (x - r).abs() < 1e-12 { r } else { x }
            };
            [snap(c / m), snap(s / m)]
        })
        .collect()
}

impl GridExpert {
    pub fn solve(world: &MultiGoalWorld, config: &ExpertConfig) -> Result<Self> {
        world.validate()?;
        if config.grid_n < 8 {
            return Err(Error::domain(format!("grid_n must be at least 8, got {}", config.grid_n)));
        }
        if config.n_directions < 2 {
            return Err(Error::domain("need at least two directions"));
        }
        let n = config.grid_n;
        let ns = n * n;
        let directions = compass_directions(config.n_directions);
        let na = directions.len();
        let mut expert = Self {
            world: world.clone(),
            grid_n: n,
            directions,
            mdp: TabularMdp::new(1, 1, 0.0, vec![1.0], vec![0.0], vec![1.0], 0, vec![])?,
            policy: PolicyTable::uniform(1, 1),
            values: vec![],
            goal_cells: BTreeSet::new(),
        };
        expert.goal_cells = (0..ns).filter(|&s| world.captured(expert.center(s)).is_some()).collect();
        if expert.goal_cells.is_empty() {
            return Err(Error::domain("no grid cell lies within the capture radius; refine the grid"));
        }

        let mut transition = vec![0.0; ns * na * ns];
        let mut reward = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let idx = s * na + a;
                if expert.goal_cells.contains(&s) {
                    transition[idx * ns + s] = 1.0;
                    continue;
                }
                let from = expert.center(s);
                let to = world.advance(from, &expert.directions[a]);
                transition[idx * ns + expert.cell_of(to)] = 1.0;
                reward[idx] = world.reward(from, to);
            }
        }
        let mut initial = vec![0.0; ns];
        initial[expert.cell_of([0.0, 0.0])] = 1.0;
        expert.mdp = TabularMdp::new(ns, na, config.gamma, transition, reward, initial, 0, vec![])?;
        let solved = sparse_value_iteration(&expert.mdp, config.alpha, ValueIterationOptions::default())?;
        expert.policy = solved.policy;
        expert.values = solved.values.v;
        Ok(expert)
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.world.bound / self.grid_n as f64
    }

    pub fn cell_of(&self, p: [f64; 2]) -> usize {
        let w = self.cell_width();
        let index = |x: f64| (((x + self.world.bound) / w).floor().max(0.0) as usize).min(self.grid_n - 1);
        index(p[1]) * self.grid_n + index(p[0])
    }

    pub fn center(&self, cell: usize) -> [f64; 2] {
        let w = self.cell_width();
        let (row, col) = (cell / self.grid_n, cell % self.grid_n);
        [
            -self.world.bound + (col as f64 + 0.5) * w,
            -self.world.bound + (row as f64 + 0.5) * w,
        ]
    }

    fn sample_action(&self, cell: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let row = self.policy.row(cell);
        let mut acc = 0.0;
        let mut last = 0;
        for (a, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = a;
                if u < acc {
                    return a;
                }
            }
        }
        last
    }

    /// Demonstrations on the grid: cell centers and direction vectors,
    /// starting from the initial cell and stopping at a goal cell.
    pub fn demos(&self, n_demos: usize, rng: &mut impl Rng) -> Result<TrajectoryBatch> {
        let start = self.cell_of([0.0, 0.0]);
        let mut episodes = Vec::with_capacity(n_demos);
        for _ in 0..n_demos {
            let mut s = start;
            let mut steps = Vec::new();
            while steps.len() < self.world.max_steps && !self.goal_cells.contains(&s) {
                let a = self.sample_action(s, rng);
                let next = self.mdp.successors(s, a)[0].0;
                steps.push(Step {
                    state: self.center(s).to_vec(),
                    action: self.directions[a].to_vec(),
                    reward: Some(self.mdp.reward(s, a)),
                });
                s = next;
            }
            episodes.push(Episode { steps });
        }
        TrajectoryBatch::new(episodes)
    }
}

impl ActionPolicy for GridExpert {
    fn act(&self, observation: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let a = self.sample_action(self.cell_of([observation[0], observation[1]]), rng);
        self.directions[a].to_vec()
    }
}

/// Solves the discretized world and samples `config.n_demos` demonstrations.
pub fn generate_expert_demos(
    world: &MultiGoalWorld,
    config: &ExpertConfig,
    rng: &mut impl Rng,
) -> Result<TrajectoryBatch> {
    GridExpert::solve(world, config)?.demos(config.n_demos, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compass_has_diagonals() {
        let d = compass_directions(8);
        assert_eq!(d[0], [1.0, 0.0]);
        assert_eq!(d[1], [1.0, 1.0]);
        assert_eq!(d[2], [0.0, 1.0]);
        assert_eq!(d[5], [-1.0, -1.0]);
    }

    #[test]
    fn zero_action_only_pays_repulsion() {
        let w = MultiGoalWorld::default();
        let s = EnvState {
            position: [0.3, -0.1],
            step: 0,
        };
        let t = w.step(&s, &[0.0, 0.0]);
        assert_eq!(t.state.position, s.position);
        assert_eq!(t.reward, -w.repulsor_gain * w.repulsion(s.position));
    }

    #[test]
    fn cell_round_trip() {
        let expert_world = MultiGoalWorld::default();
        let e = GridExpert::solve(&expert_world, &ExpertConfig::default()).unwrap();
        for cell in 0..e.grid_n * e.grid_n {
            assert_eq!(e.cell_of(e.center(cell)), cell);
        }
        assert_eq!(e.center(e.cell_of([0.0, 0.0])), [0.0, 0.0]);
    }

    #[test]
    fn layout_json_round_trip() {
        let w = MultiGoalWorld::default();
        assert_eq!(MultiGoalWorld::from_json(&w.to_json().unwrap()).unwrap(), w);
    }
}
