use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::sparsemax::log_sum_exp;

/// Diagonal-covariance Gaussian mixture over `R^dim`.
///
/// `means` and `stds` are `K x dim`, row-major. Components with zero weight
/// are skipped everywhere, so they contribute exactly nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub dim: usize,
}

/// Gradient of a scalar with respect to the mixture's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGrad {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl MixtureGrad {
    pub fn zeros(k: usize, dim: usize) -> Self {
        Self {
            weights: vec![0.0; k],
            means: vec![0.0; k * dim],
            stds: vec![0.0; k * dim],
        }
    }
}

impl GaussianMixture {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn mean_of(&self, i: usize) -> &[f64] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    pub fn std_of(&self, i: usize) -> &[f64] {
        &self.stds[i * self.dim..(i + 1) * self.dim]
    }

    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
    }

    /// `log N(a; mu_i, diag(sigma_i^2))`.
    pub fn component_log_density(&self, i: usize, a: &[f64]) -> f64 {
        self.mean_of(i)
            .iter()
            .zip(self.std_of(i))
            .zip(a)
            .map(|((m, s), x)| {
                let z = (x - m) / s;
                -0.5 * (z * z + (2.0 * PI * s * s).ln())
            })
            .sum()
    }

    pub fn log_density(&self, a: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .active()
            .map(|i| self.weights[i].ln() + self.component_log_density(i, a))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn density(&self, a: &[f64]) -> f64 {
        self.active()
            .map(|i| self.weights[i] * self.component_log_density(i, a).exp())
            .sum()
    }

    /// `log pi(a)` and its gradient. Weight gradients of inactive
    /// components are left at zero.
    pub fn log_density_grad(&self, a: &[f64]) -> (f64, MixtureGrad) {
        let k = self.n_components();
        let mut grad = MixtureGrad::zeros(k, self.dim);
        let log_terms: Vec<(usize, f64)> = self
            .active()
            .map(|i| (i, self.component_log_density(i, a)))
            .collect();
        let lse = log_sum_exp(
            &log_terms
                .iter()
                .map(|&(i, l)| self.weights[i].ln() + l)
                .collect::<Vec<_>>(),
        );
        for &(i, log_n) in &log_terms {
            // N_i / pi and responsibility r_i = w_i N_i / pi
            let ratio = (log_n - lse).exp();
            let resp = self.weights[i] * ratio;
            grad.weights[i] = ratio;
            for d in 0..self.dim {
                let idx = i * self.dim + d;
                let s = self.stds[idx];
                let diff = a[d] - self.means[idx];
                grad.means[idx] = resp * diff / (s * s);
                grad.stds[idx] = resp * (diff * diff / (s * s * s) - 1.0 / s);
            }
        }
        (lse, grad)
    }

    /// `int pi(a)^2 da = sum_ij w_i w_j N(mu_i; mu_j, Sigma_i + Sigma_j)`.
    pub fn overlap(&self) -> f64 {
        let active: Vec<usize> = self.active().collect();
        let mut total = 0.0;
        for &i in &active {
            for &j in &active {
                total += self.weights[i] * self.weights[j] * self.pair_kernel(i, j);
            }
        }
        total
    }

    fn pair_kernel(&self, i: usize, j: usize) -> f64 {
        (0..self.dim)
            .map(|d| {
                let (a, b) = (i * self.dim + d, j * self.dim + d);
                let v = self.stds[a] * self.stds[a] + self.stds[b] * self.stds[b];
                let diff = self.means[a] - self.means[b];
                (-0.5 * diff * diff / v).exp() / (2.0 * PI * v).sqrt()
            })
            .product()
    }

    /// Overlap integral and its gradient.
    pub fn overlap_grad(&self) -> (f64, MixtureGrad) {
        let k = self.n_components();
        let mut grad = MixtureGrad::zeros(k, self.dim);
        let active: Vec<usize> = self.active().collect();
        let mut total = 0.0;
        for &i in &active {
            for &j in &active {
                let g = self.pair_kernel(i, j);
                let (wi, wj) = (self.weights[i], self.weights[j]);
                total += wi * wj * g;
                // the (i, j) and (j, i) terms together give 2 w_j G_ij
                grad.weights[i] += 2.0 * wj * g;
                for d in 0..self.dim {
                    let (a, b) = (i * self.dim + d, j * self.dim + d);
                    let v = self.stds[a] * self.stds[a] + self.stds[b] * self.stds[b];
                    let diff = self.means[a] - self.means[b];
                    let wg = wi * wj * g;
                    grad.means[a] += -2.0 * wg * diff / v;
                    grad.stds[a] += 4.0 * self.stds[a] * wg * (-0.5 / v + 0.5 * diff * diff / (v * v));
                }
            }
        }
        (total, grad)
    }

    /// `1/2 (1 - int pi^2)`.
    pub fn tsallis_entropy(&self) -> f64 {
        0.5 * (1.0 - self.overlap())
    }

    /// `sum_i w_i mu_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for i in self.active() {
            for (o, m) in out.iter_mut().zip(self.mean_of(i)) {
                *o += self.weights[i] * m;
            }
        }
        out
    }

    /// Draws a component from the weights, then a Gaussian sample from it.
    /// Returns the component index alongside the sample.
    pub fn sample(&self, rng: &mut impl Rng) -> (usize, Vec<f64>) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = None;
        for i in self.active() {
            acc += self.weights[i];
            chosen = Some(i);
            if u < acc {
                break;
            }
        }
        let i = chosen.expect("mixture has an active component");
        let a = self
            .mean_of(i)
            .iter()
            .zip(self.std_of(i))
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (i, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mixture() -> GaussianMixture {
        GaussianMixture {
            weights: vec![0.5, 0.3, 0.2, 0.0],
            means: vec![0.1, -0.4, 1.2, 0.3, -0.8, 0.9, 5.0, 5.0],
            stds: vec![0.7, 0.4, 0.5, 1.1, 0.9, 0.6, 0.3, 0.3],
            dim: 2,
        }
    }

    fn fd_check(
        m: &GaussianMixture,
        f: impl Fn(&GaussianMixture) -> f64,
        grad: &MixtureGrad,
        skip_inactive: bool,
    ) {
        let h = 1e-6;
        let bump = |field: usize, idx: usize, delta: f64| {
            let mut c = m.clone();
            match field {
                0 => c.weights[idx] += delta,
                1 => c.means[idx] += delta,
                _ => c.stds[idx] += delta,
            }
            c
        };
        let fields: [&[f64]; 3] = [&grad.weights, &grad.means, &grad.stds];
        for (field, g) in fields.iter().enumerate() {
            for idx in 0..g.len() {
                let comp = if field == 0 { idx } else { idx / m.dim };
                if skip_inactive && m.weights[comp] == 0.0 {
                    continue;
                }
                let fd = (f(&bump(field, idx, h)) - f(&bump(field, idx, -h))) / (2.0 * h);
                let tol = 1e-6 * (1.0 + fd.abs());
                assert!((fd - g[idx]).abs() < tol, "field {field} idx {idx}: {fd} vs {}", g[idx]);
            }
        }
    }

    #[test]
    fn standard_normal_peak() {
        let m = GaussianMixture {
            weights: vec![1.0],
            means: vec![0.0],
            stds: vec![1.0],
            dim: 1,
        };
        assert!((m.density(&[0.0]) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((m.log_density(&[0.0]) + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn log_density_gradient() {
        let m = mixture();
        let a = [0.3, 0.2];
        let (_, grad) = m.log_density_grad(&a);
        fd_check(&m, |c| c.log_density(&a), &grad, true);
    }

    #[test]
    fn overlap_gradient() {
        let m = mixture();
        let (value, grad) = m.overlap_grad();
        assert!((value - m.overlap()).abs() < 1e-15);
        fd_check(&m, GaussianMixture::overlap, &grad, true);
    }

    #[test]
    fn zero_weight_component_is_inert() {
        let m = mixture();
        let mut moved = m.clone();
        moved.means[6] = -40.0;
        moved.stds[7] = 0.01;
        assert_eq!(m.density(&[0.2, 0.1]), moved.density(&[0.2, 0.1]));
        assert_eq!(m.overlap(), moved.overlap());
        let (_, g) = m.overlap_grad();
        assert_eq!(&g.means[6..], &[0.0, 0.0]);
        assert_eq!(&g.stds[6..], &[0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            assert_ne!(m.sample(&mut rng).0, 3);
        }
    }

    #[test]
    fn single_component_entropy_closed_form() {
        // N(0; 0, 2 sigma^2) = 1 / (2 sqrt(pi sigma^2))
        for var in [1.0 / (4.0 * PI), 1.0, 0.3] {
            let m = GaussianMixture {
                weights: vec![1.0],
                means: vec![0.7],
                stds: vec![f64::sqrt(var)],
                dim: 1,
            };
            let expected = 0.5 * (1.0 - 1.0 / (2.0 * (PI * var).sqrt()));
            assert!((m.tsallis_entropy() - expected).abs() < 1e-14);
        }
    }
}
