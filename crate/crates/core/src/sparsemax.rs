//! Sparsemax projection onto the probability simplex, the discrete
//! (q = 2, k = 1/2) Tsallis entropy and the Brier score.
//!
//! `sparsemax(z)` is the Euclidean projection of `z` onto the simplex. The
//! result is `p_i = max(z_i - tau, 0)` where the threshold `tau` is fixed by
//! the sorted support test `1 + i * z_(i) > sum_{j <= i} z_(j)`.

use crate::error::{Error, Result};

/// Absolute tolerance used for simplex membership checks.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Sums within this distance of one are renormalized on construction.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Scaled action scores fed to [`sparsemax`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("logit vector must have at least one entry"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "logit {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Validates `probs`; sums off by at most [`RENORMALIZE_TOL`] are
    /// renormalized, anything further away is rejected.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("simplex vector must be nonempty"));
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::domain(format!("probability {i} is not finite")));
            }
            if *p < 0.0 {
                if *p < -SIMPLEX_TOL {
                    return Err(Error::domain(format!("probability {i} is negative ({p})")));
                }
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::domain(format!("probabilities sum to {sum}, not 1")));
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero outcomes");
        Self(vec![1.0 / n as f64; n])
    }

    /// Point mass on `index`.
    pub fn vertex(n: usize, index: usize) -> Self {
        assert!(index < n);
        let mut p = vec![0.0; n];
        p[index] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices with strictly positive probability.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl AsRef<[f64]> for SimplexVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Output of [`sparsemax`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparsemaxResult {
    pub dist: SimplexVector,
    pub threshold: f64,
    /// Support indices in descending order of their logits.
    pub support: Vec<usize>,
}

impl SparsemaxResult {
    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

/// Euclidean projection of `z` onto the probability simplex.
pub fn sparsemax(z: &LogitVector) -> SparsemaxResult {
    let mut probs = vec![0.0; z.len()];
    let (threshold, support) = sparsemax_into(z.values(), &mut probs);
    SparsemaxResult {
        dist: SimplexVector(probs),
        threshold,
        support,
    }
}

/// Unchecked slice form of [`sparsemax`]: writes the projection into `out`
/// and returns `(tau, support)`. Inputs must be finite.
pub fn sparsemax_into(z: &[f64], out: &mut [f64]) -> (f64, Vec<usize>) {
    debug_assert_eq!(z.len(), out.len());
    debug_assert!(!z.is_empty());
    let mut order: Vec<usize> = (0..z.len()).collect();
    // stable: equal logits keep index order
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]));

    let mut cumsum = 0.0;
    let mut k = 0;
    let mut support_sum = 0.0;
    for (i, &idx) in order.iter().enumerate() {
        cumsum += z[idx];
        if 1.0 + (i + 1) as f64 * z[idx] > cumsum {
            k = i + 1;
            support_sum = cumsum;
        }
    }
    // the largest logit always satisfies the test, so k >= 1
    let tau = (support_sum - 1.0) / k as f64;
    out.iter_mut().for_each(|p| *p = 0.0);
    let support = order[..k].to_vec();
    for &i in &support {
        out[i] = z[i] - tau;
    }
    (tau, support)
}

/// Vector-Jacobian product of sparsemax: given `dL/dp`, returns `dL/dz`.
///
/// The Jacobian is `diag(s) - s s^T / |S|` with `s` the support indicator,
/// so off-support coordinates receive exactly zero.
pub fn sparsemax_vjp(support: &[usize], grad_p: &[f64], grad_z: &mut [f64]) {
    grad_z.iter_mut().for_each(|g| *g = 0.0);
    let mean = support.iter().map(|&i| grad_p[i]).sum::<f64>() / support.len() as f64;
    for &i in support {
        grad_z[i] = grad_p[i] - mean;
    }
}

/// Numerically stable softmax, written into `out`.
pub fn softmax_into(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// `log(sum(exp(z)))` without overflow.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Vector-Jacobian product of softmax at output `p`.
pub fn softmax_vjp(p: &[f64], grad_p: &[f64], grad_z: &mut [f64]) {
    let dot: f64 = p.iter().zip(grad_p).map(|(a, b)| a * b).sum();
    for ((gz, &pi), &gp) in grad_z.iter_mut().zip(p).zip(grad_p) {
        *gz = pi * (gp - dot);
    }
}

/// `1/2 (1 - sum p^2)`.
pub fn tsallis_entropy_discrete(p: &SimplexVector) -> f64 {
    tsallis_entropy_slice(p.probs())
}

pub(crate) fn tsallis_entropy_slice(p: &[f64]) -> f64 {
    0.5 * (1.0 - p.iter().map(|x| x * x).sum::<f64>())
}

/// Brier score `1/2 sum_a' (1{a' = a} - p_a')^2` of forecast `p` against
/// realized outcome `action`.
pub fn brier_score(p: &SimplexVector, action: usize) -> Result<f64> {
    if action >= p.len() {
        return Err(Error::domain(format!(
            "action {action} out of range for {} outcomes",
            p.len()
        )));
    }
    Ok(brier_slice(p.probs(), action))
}

pub(crate) fn brier_slice(p: &[f64], action: usize) -> f64 {
    0.5 * p
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let hit = if i == action { 1.0 } else { 0.0 };
            (hit - q) * (hit - q)
        })
        .sum::<f64>()
}
