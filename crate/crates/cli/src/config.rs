use std::fmt;
use std::path::{Path, PathBuf};

use mcte::multigoal::{ExpertConfig, MultiGoalWorld};
use mcte::trainer::{TrainerConfig, Variant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Multigoal,
    TabularIrl,
    PropertySuite,
}

/// One trainer variant with its mixture size and entropy coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub variant: Variant,
    #[serde(default = "default_k")]
    pub k: usize,
    pub alpha: f64,
}

fn default_k() -> usize {
    4
}

impl VariantSpec {
    pub fn label(&self) -> String {
        format!("{}_k{}_a{}", self.variant.name(), self.k, self.alpha)
    }
}

/// Settings for the feature-matching recovery experiment on the gridworld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrlSettings {
    pub grid_size: usize,
    pub slip: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub lr: f64,
    pub iters: usize,
    pub grad_tol: f64,
}

impl Default for IrlSettings {
    fn default() -> Self {
        Self {
            grid_size: 5,
            slip: 0.1,
            gamma: 0.9,
            alpha: 1.0,
            lr: 0.1,
            iters: 20_000,
            grad_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub variants: Vec<VariantSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Base trainer settings; variant entries override variant, k and alpha.
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub world: MultiGoalWorld,
    #[serde(default)]
    pub expert: ExpertConfig,
    /// Episodes used for the final return and reachability of each cell.
    #[serde(default = "default_eval")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub irl: IrlSettings,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

fn default_eval() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parses `text`, applies `key.path=value` overrides and validates.
    /// Parse errors carry the line and column of the offending token.
    pub fn parse(text: &str, origin: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let located = |e: serde_json::Error| {
            ConfigError(format!("{origin}: line {} column {}: {e}", e.line(), e.column()))
        };
        // typed parse first so structural errors point at a line
        serde_json::from_str::<ExperimentConfig>(text).map_err(located)?;
        let mut value: Value = serde_json::from_str(text).map_err(located)?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let config: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| ConfigError(format!("{origin}: after overrides: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string(), overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError(msg));
        if self.seeds.is_empty() {
            return fail("seeds must be nonempty".into());
        }
        if self.kind == Kind::Multigoal {
            if self.variants.is_empty() {
                return fail("multigoal experiments need at least one variant".into());
            }
            if self.eval_episodes == 0 {
                return fail("eval_episodes must be positive".into());
            }
            self.world.validate().map_err(|e| ConfigError(format!("world: {e}")))?;
        }
        for (i, v) in self.variants.iter().enumerate() {
            if v.k == 0 || !(v.alpha >= 0.0) {
                return fail(format!("variants[{i}]: k must be positive and alpha nonnegative"));
            }
            self.trainer_for(v, 0)
                .validate()
                .map_err(|e| ConfigError(format!("variants[{i}]: {e}")))?;
        }
        if self.kind == Kind::TabularIrl {
            let irl = &self.irl;
            if irl.grid_size < 2 || !(irl.alpha > 0.0) || !(irl.lr > 0.0) || !(0.0..1.0).contains(&irl.gamma) {
                return fail("irl: need grid_size >= 2, positive alpha and lr, gamma in [0, 1)".into());
            }
        }
        Ok(())
    }

    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        self.seeds.iter_mut().for_each(|s| *s += offset);
        self
    }

    /// Trainer settings for one cell.
    pub fn trainer_for(&self, spec: &VariantSpec, seed: u64) -> TrainerConfig {
        let mut config = self.trainer.clone();
        config.variant = spec.variant;
        config.alpha = spec.alpha;
        config.policy.components = spec.k;
        config.seed = seed;
        config.demo_path = None;
        config.log_path = None;
        config.checkpoint_path = None;
        config
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Sets `path` (dot separated, numeric segments index arrays) to `value`,
/// read as JSON when it parses and as a string otherwise.
pub fn apply_override(root: &mut Value, item: &str) -> Result<(), ConfigError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override {item:?} is not key.path=value")))?;
    if path.is_empty() {
        return Err(ConfigError(format!("override {item:?} has an empty path")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        node = match node {
            Value::Array(items) => {
                let index: usize = seg
                    .parse()
                    .map_err(|_| ConfigError(format!("override {path}: {seg:?} is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(index)
                    .ok_or_else(|| ConfigError(format!("override {path}: index {index} out of range ({len})")))?
            }
            Value::Object(map) => map.entry(seg.to_string()).or_insert(Value::Object(Default::default())),
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut()
                    .expect("just set")
                    .entry(seg.to_string())
                    .or_insert(Value::Object(Default::default()))
            }
            _ => return Err(ConfigError(format!("override {path}: {seg:?} is below a scalar"))),
        };
        if last {
            *node = value;
            return Ok(());
        }
    }
    unreachable!("paths have at least one segment")
}
