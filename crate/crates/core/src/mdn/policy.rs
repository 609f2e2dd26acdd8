use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mixture::{GaussianMixture, MixtureGrad};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::sparsemax::{softmax_into, softmax_vjp, sparsemax_into, sparsemax_vjp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Sparsemax,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdnConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub components: usize,
    pub hidden: usize,
    pub gate: Gate,
    /// Gate logits are divided by this before the projection.
    pub gate_temperature: f64,
    /// Floor on every component standard deviation.
    pub sigma_min: f64,
    /// Optional ceiling on every component standard deviation.
    pub sigma_max: Option<f64>,
    /// Standard deviation of every component at initialization.
    pub init_std: f64,
    /// Spread of the initial component means (output bias draw).
    pub init_mean_spread: f64,
    /// Scale of the initial output-layer weights.
    pub init_out_scale: f64,
}

impl Default for MdnConfig {
    fn default() -> Self {
        Self {
            state_dim: 2,
            action_dim: 2,
            components: 4,
            hidden: 64,
            gate: Gate::Sparsemax,
            gate_temperature: 1.0,
            sigma_min: 1e-3,
            sigma_max: None,
            init_std: 0.3,
            init_mean_spread: 0.0,
            init_out_scale: 0.1,
        }
    }
}

impl MdnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 || self.components == 0 || self.hidden == 0 {
            return Err(Error::domain("mixture policy dimensions must be positive"));
        }
        if !(self.gate_temperature > 0.0) || !(self.sigma_min > 0.0) {
            return Err(Error::domain("gate_temperature and sigma_min must be positive"));
        }
        if !(self.init_std > self.sigma_min) {
            return Err(Error::domain("init_std must exceed sigma_min"));
        }
        if let Some(max) = self.sigma_max {
            if !(max > self.init_std) {
                return Err(Error::domain("sigma_max must exceed init_std"));
            }
        }
        if !(self.init_mean_spread >= 0.0) || !(self.init_out_scale >= 0.0) {
            return Err(Error::domain("init scales must be nonnegative"));
        }
        Ok(())
    }

    fn output_dim(&self) -> usize {
        self.components * (1 + 2 * self.action_dim)
    }

    fn std_from_raw(&self, raw: f64) -> f64 {
        match self.sigma_max {
            None => self.sigma_min + raw.exp(),
            Some(max) => self.sigma_min + (max - self.sigma_min) / (1.0 + (-raw).exp()),
        }
    }

    fn raw_from_std(&self, std: f64) -> f64 {
        let excess = std - self.sigma_min;
        match self.sigma_max {
            None => excess.ln(),
            Some(max) => (excess / (max - std)).ln(),
        }
    }

    /// Derivative of the std with respect to its raw output, given the std.
    fn std_slope(&self, std: f64) -> f64 {
        match self.sigma_max {
            None => std - self.sigma_min,
            Some(max) => (std - self.sigma_min) * (max - std) / (max - self.sigma_min),
        }
    }
}

/// Network output at one state, kept around for the backward pass.
#[derive(Debug, Clone)]
pub struct MixtureHead {
    pub mixture: GaussianMixture,
    hidden: Vec<f64>,
    support: Vec<usize>,
}

impl MixtureHead {
    /// Components with nonzero weight.
    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

/// State-conditioned Gaussian mixture whose weights come from a sparsemax
/// (or softmax) gate. Network outputs are laid out as
/// `[gate logits K | means K*d | raw stds K*d]` with
/// `std = sigma_min + exp(raw)`, or a logistic squash into
/// `(sigma_min, sigma_max)` when a ceiling is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMixturePolicy {
    config: MdnConfig,
    net: Mlp,
}

impl SparseMixturePolicy {
    pub fn new(config: MdnConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut net = Mlp::new(
            config.state_dim,
            config.hidden,
            config.output_dim(),
            config.init_out_scale,
            rng,
        );
        let (k, d) = (config.components, config.action_dim);
        let raw_std = config.raw_from_std(config.init_std);
        let bias = net.output_bias_mut();
        for b in &mut bias[k..k + k * d] {
            *b = config.init_mean_spread * rng.sample::<f64, _>(StandardNormal);
        }
        bias[k + k * d..].iter_mut().for_each(|b| *b = raw_std);
        Ok(Self { config, net })
    }

    pub fn from_parts(config: MdnConfig, net: Mlp) -> Result<Self> {
        config.validate()?;
        if net.input_dim() != config.state_dim || net.output_dim() != config.output_dim() {
            return Err(Error::domain("network shape does not match the mixture config"));
        }
        Ok(Self { config, net })
    }

    pub fn config(&self) -> &MdnConfig {
        &self.config
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params()
    }

    pub fn params(&self) -> &[f64] {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    pub fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.config.state_dim {
            return Err(Error::domain(format!(
                "state has dimension {}, policy expects {}",
                state.len(),
                self.config.state_dim
            )));
        }
        Ok(())
    }

    pub fn check_action(&self, action: &[f64]) -> Result<()> {
        if action.len() != self.config.action_dim {
            return Err(Error::domain(format!(
                "action has dimension {}, policy expects {}",
                action.len(),
                self.config.action_dim
            )));
        }
        Ok(())
    }

    /// Mixture at `state`. Callers are responsible for the dimension check.
    pub fn head(&self, state: &[f64]) -> MixtureHead {
        let (k, d) = (self.config.components, self.config.action_dim);
        let mut out = vec![0.0; self.config.output_dim()];
        let hidden = self.net.forward(state, &mut out);
        let logits: Vec<f64> = out[..k].iter().map(|z| z / self.config.gate_temperature).collect();
        let mut weights = vec![0.0; k];
        let support = match self.config.gate {
            Gate::Sparsemax => sparsemax_into(&logits, &mut weights).1,
            Gate::Softmax => {
                softmax_into(&logits, &mut weights);
                (0..k).filter(|&i| weights[i] > 0.0).collect()
            }
        };
        let means = out[k..k + k * d].to_vec();
        let stds = out[k + k * d..]
            .iter()
            .map(|&r| self.config.std_from_raw(r))
            .collect();
        MixtureHead {
            mixture: GaussianMixture {
                weights,
                means,
                stds,
                dim: d,
            },
            hidden,
            support,
        }
    }

    pub fn mixture(&self, state: &[f64]) -> Result<GaussianMixture> {
        self.check_state(state)?;
        Ok(self.head(state).mixture)
    }

    pub fn density(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.check_action(action)?;
        Ok(self.mixture(state)?.density(action))
    }

    pub fn log_density(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.check_action(action)?;
        Ok(self.mixture(state)?.log_density(action))
    }

    pub fn sample(&self, state: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
        Ok(self.mixture(state)?.sample(rng).1)
    }

    /// Accumulates `scale * d(loss)/d(params)` into `grad`, where `upstream`
    /// is `d(loss)/d(mixture parameters)` at `state`.
    pub fn backprop(
        &self,
        state: &[f64],
        head: &MixtureHead,
        upstream: &MixtureGrad,
        scale: f64,
        grad: &mut [f64],
    ) {
        let (k, d) = (self.config.components, self.config.action_dim);
        let mut grad_out = vec![0.0; self.config.output_dim()];
        let (g_gate, rest) = grad_out.split_at_mut(k);
        let (g_mean, g_std) = rest.split_at_mut(k * d);
        match self.config.gate {
            Gate::Sparsemax => sparsemax_vjp(&head.support, &upstream.weights, g_gate),
            Gate::Softmax => softmax_vjp(&head.mixture.weights, &upstream.weights, g_gate),
        }
        for g in g_gate.iter_mut() {
            *g *= scale / self.config.gate_temperature;
        }
        for (g, u) in g_mean.iter_mut().zip(&upstream.means) {
            *g = scale * u;
        }
        for ((g, u), &s) in g_std.iter_mut().zip(&upstream.stds).zip(&head.mixture.stds) {
            *g = scale * u * self.config.std_slope(s);
        }
        self.net.backward(state, &head.hidden, &grad_out, grad);
    }

    /// Accumulates `scale * grad log pi(action | state)` and returns the
    /// log-density.
    pub fn log_density_grad(&self, state: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let head = self.head(state);
        let (logp, upstream) = head.mixture.log_density_grad(action);
        self.backprop(state, &head, &upstream, scale, grad);
        logp
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text)?;
        Self::from_parts(raw.config, raw.net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
