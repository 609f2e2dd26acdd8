//! Adversarial imitation learning with a Tsallis entropy bonus (MCTEIL),
//! the soft GAIL baseline, and behavior cloning.

mod discriminator;
mod env;
mod update;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use discriminator::{
    discriminator_update, DiscReport, DiscSample, Discriminator, RewardModel,
};
pub use env::{episode_rng, ActionPolicy, rollout_episode, sample_rollouts, Environment, Rollouts, Transition};
pub use update::{
    behavior_cloning, demo_nll, policy_gradient, policy_update_mcteil, policy_update_soft_gail, BcReport,
    EntropyBonus, PolicyGradientSettings, UpdateReport,
};

use crate::error::{Error, Result};
use crate::mdn::{tsallis_entropy_per_sample, Gate, MdnConfig, SparseMixturePolicy};
use crate::optim::Optimizer;
use crate::trajectory::TrajectoryBatch;

const CHUNK: usize = 32;

/// Sums `f` over `items` in fixed-size chunks, in parallel, reducing the
/// chunk results in order so the answer does not depend on scheduling.
/// `f` accumulates into a gradient buffer of length `dim`.
pub(crate) fn par_accumulate<T: Sync>(
    items: &[T],
    dim: usize,
    f: impl Fn(&T, &mut [f64]) -> f64 + Sync,
) -> (f64, Vec<f64>) {
    let parts: Vec<(f64, Vec<f64>)> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; dim];
            let value = chunk.iter().map(|item| f(item, &mut acc)).sum();
            (value, acc)
        })
        .collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; dim];
    for (value, acc) in parts {
        total += value;
        for (g, a) in grad.iter_mut().zip(&acc) {
            *g += a;
        }
    }
    (total, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mcteil,
    SoftGail,
    Bc,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Mcteil => "mcteil",
            Variant::SoftGail => "soft_gail",
            Variant::Bc => "bc",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcteil" => Ok(Variant::Mcteil),
            "soft_gail" => Ok(Variant::SoftGail),
            "bc" => Ok(Variant::Bc),
            other => Err(Error::domain(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub policy_lr: f64,
    pub disc_lr: f64,
    pub disc_hidden: usize,
    /// Discriminator steps per policy step.
    pub disc_steps: usize,
    pub seed: u64,
    pub policy: MdnConfig,
    pub demo_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Mcteil,
            alpha: 0.1,
            gamma: 0.95,
            iterations: 100,
            episodes_per_iter: 500,
            policy_lr: 3e-3,
            disc_lr: 3e-3,
            disc_hidden: 64,
            disc_steps: 1,
            seed: 0,
            policy: MdnConfig::default(),
            demo_path: None,
            log_path: None,
            checkpoint_path: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.policy_lr > 0.0 && self.disc_lr > 0.0) {
            return Err(Error::domain("learning rates must be positive"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::domain("alpha must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::domain("gamma must lie in [0, 1]"));
        }
        if self.episodes_per_iter == 0 || self.disc_hidden == 0 || self.disc_steps == 0 {
            return Err(Error::domain("episodes_per_iter, disc_hidden and disc_steps must be positive"));
        }
        self.policy.validate()
    }

    /// Policy architecture with the gate each adversarial variant uses.
    pub fn policy_config(&self) -> MdnConfig {
        let gate = match self.variant {
            Variant::Mcteil => Gate::Sparsemax,
            Variant::SoftGail => Gate::Softmax,
            Variant::Bc => self.policy.gate,
        };
        MdnConfig {
            gate,
            ..self.policy.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub avg_return: f64,
    pub reachability: usize,
    pub entropy_estimate: f64,
    /// Absent for behavior cloning.
    pub disc_objective: Option<f64>,
    pub policy_grad_norm: f64,
    pub nll: f64,
}

pub const LOG_HEADER: &str =
    "iteration,avg_return,reachability,entropy_estimate,disc_objective,policy_grad_norm,nll";

impl LogRow {
    pub fn to_csv(&self) -> String {
        let disc = self.disc_objective.map(|d| format!("{d:?}")).unwrap_or_default();
        format!(
            "{},{:?},{},{:?},{},{:?},{:?}",
            self.iteration, self.avg_return, self.reachability, self.entropy_estimate, disc, self.policy_grad_norm, self.nll
        )
    }
}

pub fn write_log(rows: &[LogRow], path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{LOG_HEADER}").map_err(io)?;
    for row in rows {
        writeln!(out, "{}", row.to_csv()).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<LogRow>,
    pub policy: SparseMixturePolicy,
    pub discriminator: Option<Discriminator>,
}

/// Loads demonstrations from `config.demo_path` and trains.
pub fn train<E: Environment>(config: &TrainerConfig, env: &E) -> Result<TrainOutcome> {
    let path = config
        .demo_path
        .as_ref()
        .ok_or_else(|| Error::domain("trainer config has no demo_path"))?;
    let demos = TrajectoryBatch::read_csv(path)?;
    train_with_demos(config, env, &demos)
}

/// The full loop: sample rollouts, update the discriminator, update the
/// policy. Writes the log and final checkpoint when paths are configured.
pub fn train_with_demos<E: Environment>(
    config: &TrainerConfig,
    env: &E,
    demos: &TrajectoryBatch,
) -> Result<TrainOutcome> {
    config.validate()?;
    let policy_config = MdnConfig {
        state_dim: env.state_dim(),
        action_dim: env.action_dim(),
        ..config.policy_config()
    };
    let mut policy = SparseMixturePolicy::new(policy_config, &mut ChaCha8Rng::seed_from_u64(config.seed))?;
    policy.check_state(&vec![0.0; demos.state_dim()])?;
    policy.check_action(&vec![0.0; demos.action_dim()])?;

    let mut disc = (config.variant != Variant::Bc).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Discriminator::new(env.state_dim(), env.action_dim(), config.disc_hidden, &mut rng)
    });
    let expert_samples = disc
        .as_ref()
        .map(|d| d.samples(demos, Some(env.horizon())));
    let mut policy_opt = Optimizer::adam(config.policy_lr);
    let mut disc_opt = Optimizer::adam(config.disc_lr);
    let settings = PolicyGradientSettings {
        gamma: config.gamma,
        alpha: config.alpha,
        horizon: Some(env.horizon()),
    };
    // rollout streams are keyed away from the init streams
    let rollout_seed = config.seed ^ 0x5eed_0f_7011_0075;

    let mut log = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let rollouts = sample_rollouts(&policy, env, config.episodes_per_iter, rollout_seed, iteration as u64)?;
        let avg_return = rollouts.batch.average_return();
        let reachability = rollouts.reachability();

        let (disc_objective, report) = match (&mut disc, &expert_samples) {
            (Some(d), Some(expert)) => {
                let learner = d.samples(&rollouts.batch, Some(env.horizon()));
                let mut first = None;
                for _ in 0..config.disc_steps {
                    let r = discriminator_update(d, &learner, expert, &mut disc_opt)?;
                    first.get_or_insert(r.pre);
                }
                let reward: &Discriminator = d;
                let report = match config.variant {
                    Variant::Mcteil => {
                        policy_update_mcteil(&mut policy, &mut policy_opt, reward, &rollouts.batch, &settings)?
                    }
                    _ => policy_update_soft_gail(&mut policy, &mut policy_opt, reward, &rollouts.batch, &settings)?,
                };
                (first, report)
            }
            _ => {
                let entropy = tsallis_entropy_per_sample(&policy, &rollouts.batch, config.gamma)?;
                let (_, grad) = demo_nll(&policy, demos, true)?;
                policy_opt.ascend(policy.params_mut(), &grad);
                let report = UpdateReport {
                    grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
                    surrogate_return: f64::NAN,
                    entropy,
                };
                (None, report)
            }
        };
        let nll = demo_nll(&policy, demos, false)?.0;
        log.push(LogRow {
            iteration,
            avg_return,
            reachability,
            entropy_estimate: report.entropy.value,
            disc_objective,
            policy_grad_norm: report.grad_norm,
            nll,
        });
    }

    if let Some(path) = &config.log_path {
        write_log(&log, path)?;
    }
    if let Some(path) = &config.checkpoint_path {
        policy.save(path)?;
    }
    Ok(TrainOutcome {
        log,
        policy,
        discriminator: disc,
    })
}
