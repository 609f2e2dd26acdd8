#![allow(dead_code)]

//! Oracles shared by the integration tests. None of these call into the
//! code paths they check.

use std::f64::consts::PI;

use mcte::mdn::GaussianMixture;
use mcte::tabular::{PolicyTable, TabularMdp};

/// Euclidean projection onto the simplex by bisection on the threshold.
pub fn simplex_projection_bisect(z: &[f64]) -> Vec<f64> {
    let mut lo = z.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = z.iter().map(|v| (v - mid).max(0.0)).sum();
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    z.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the Legendre
/// recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` panels.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let left = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((left + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// Plain Gaussian-mixture density written out independently of the crate.
pub fn mixture_pdf(weights: &[f64], means: &[f64], stds: &[f64], dim: usize, a: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let mut p = 1.0;
        for d in 0..dim {
            let (m, s) = (means[i * dim + d], stds[i * dim + d]);
            p *= (-(a[d] - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        }
        total += w * p;
    }
    total
}

/// Integration box covering every component out to `k` standard deviations.
pub fn box_bounds(m: &GaussianMixture, d: usize, k: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m.weights.len() {
        let (mu, s) = (m.means[i * m.dim + d], m.stds[i * m.dim + d]);
        lo = lo.min(mu - k * s);
        hi = hi.max(mu + k * s);
    }
    (lo, hi)
}

/// `int f(a) da` over a tensor-product rule covering the mixture.
pub fn integrate_over_mixture(m: &GaussianMixture, panels: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let rules: Vec<Vec<(f64, f64)>> = (0..m.dim)
        .map(|d| {
            let (lo, hi) = box_bounds(m, d, 12.0);
            composite_rule(lo, hi, panels, 10)
        })
        .collect();
    match m.dim {
        1 => rules[0].iter().map(|&(x, w)| w * f(&[x])).sum(),
        2 => {
            let mut total = 0.0;
            for &(x, wx) in &rules[0] {
                for &(y, wy) in &rules[1] {
                    total += wx * wy * f(&[x, y]);
                }
            }
            total
        }
        _ => panic!("quadrature oracle supports d <= 2"),
    }
}

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sort-based Euclidean projection onto the simplex.
pub fn simplex_projection_sort(z: &[f64]) -> Vec<f64> {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    z.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Minimizer of `||p - z||^2` over the simplex lattice with `parts`
/// subdivisions (n = 2 or 3).
pub fn simplex_projection_grid(z: &[f64], parts: usize) -> Vec<f64> {
    let h = 1.0 / parts as f64;
    let mut best = (f64::INFINITY, Vec::new());
    let mut consider = |p: Vec<f64>| {
        let d: f64 = p.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
        if d < best.0 {
            best = (d, p);
        }
    };
    match z.len() {
        2 => (0..=parts).for_each(|i| consider(vec![i as f64 * h, (parts - i) as f64 * h])),
        3 => {
            for i in 0..=parts {
                for j in 0..=parts - i {
                    consider(vec![i as f64 * h, j as f64 * h, (parts - i - j) as f64 * h]);
                }
            }
        }
        n => panic!("grid oracle supports n <= 3, got {n}"),
    }
    best.1
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// `V = (I - gamma P_pi)^-1 c` for a per-state cost `c`.
pub fn evaluate_state_cost(mdp: &TabularMdp, pi: &PolicyTable, cost: &[f64]) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut a = vec![vec![0.0; ns]; ns];
    for s in 0..ns {
        a[s][s] += 1.0;
        for act in 0..na {
            for t in 0..ns {
                a[s][t] -= mdp.gamma() * pi.prob(s, act) * mdp.transition(s, act, t);
            }
        }
    }
    solve_dense(a, cost.to_vec())
}
