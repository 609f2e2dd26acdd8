//! Continuous-space episodes: the currency of demonstrations and rollouts.
//!
//! Demonstration files are CSV with a header
//! `episode_id,t,s0,..,s{n-1},a0,..,a{m-1}` and one row per step.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// Environment reward, recorded for evaluation only.
    pub reward: Option<f64>,
}

impl Step {
    pub fn new(state: Vec<f64>, action: Vec<f64>) -> Self {
        Self {
            state,
            action,
            reward: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode {
    pub steps: Vec<Step>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Undiscounted sum of recorded rewards.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().filter_map(|s| s.reward).sum()
    }
}

/// Nonempty list of nonempty episodes with consistent dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    episodes: Vec<Episode>,
    state_dim: usize,
    action_dim: usize,
}

impl TrajectoryBatch {
    pub fn new(episodes: Vec<Episode>) -> Result<Self> {
        let first = episodes
            .first()
            .and_then(|e| e.steps.first())
            .ok_or_else(|| Error::domain("trajectory batch must contain a nonempty episode"))?;
        let (state_dim, action_dim) = (first.state.len(), first.action.len());
        for (i, ep) in episodes.iter().enumerate() {
            if ep.is_empty() {
                return Err(Error::domain(format!("episode {i} is empty")));
            }
            if ep
                .steps
                .iter()
                .any(|s| s.state.len() != state_dim || s.action.len() != action_dim)
            {
                return Err(Error::domain(format!("episode {i} has inconsistent dimensions")));
            }
        }
        Ok(Self {
            episodes,
            state_dim,
            action_dim,
        })
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn n_steps(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    /// `(episode index, t, step)` in episode-major order.
    pub fn steps(&self) -> impl Iterator<Item = (usize, usize, &Step)> {
        self.episodes
            .iter()
            .enumerate()
            .flat_map(|(i, ep)| ep.steps.iter().enumerate().map(move |(t, s)| (i, t, s)))
    }

    /// Mean undiscounted return over episodes.
    pub fn average_return(&self) -> f64 {
        self.episodes.iter().map(Episode::total_reward).sum::<f64>() / self.len() as f64
    }

    /// Concatenates `n` copies of the batch.
    pub fn repeated(&self, n: usize) -> Self {
        let mut episodes = Vec::with_capacity(self.len() * n);
        for _ in 0..n {
            episodes.extend(self.episodes.iter().cloned());
        }
        Self {
            episodes,
            ..*self
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let mut header = vec!["episode_id".to_string(), "t".to_string()];
        header.extend((0..self.state_dim).map(|i| format!("s{i}")));
        header.extend((0..self.action_dim).map(|i| format!("a{i}")));
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for (i, t, step) in self.steps() {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(step.state.iter().chain(&step.action).map(|v| format!("{v:?}")));
            writeln!(out, "{}", row.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[0] != "episode_id" || cols[1] != "t" {
            return Err(parse_err(1, "header must start with episode_id,t".into()));
        }
        let state_dim = cols.iter().filter(|c| c.starts_with('s')).count();
        let action_dim = cols.iter().filter(|c| c.starts_with('a')).count();
        if state_dim + action_dim + 2 != cols.len() {
            return Err(parse_err(1, format!("unrecognized columns in header {header:?}")));
        }

        let mut episodes: Vec<Episode> = Vec::new();
        let mut current_id: Option<u64> = None;
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(parse_err(
                    lineno,
                    format!("expected {} fields, found {}", cols.len(), fields.len()),
                ));
            }
            let id: u64 = fields[0]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad episode id {:?}", fields[0])))?;
            let values = fields[2..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(lineno, e.to_string()))?;
            if current_id != Some(id) {
                episodes.push(Episode::default());
                current_id = Some(id);
            }
            episodes
                .last_mut()
                .expect("pushed above")
                .steps
                .push(Step::new(values[..state_dim].to_vec(), values[state_dim..].to_vec()));
        }
        Self::new(episodes)
    }
}
