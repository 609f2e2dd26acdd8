//! Quick invariant checks across the library, run by `mcte suite`.

use mcte::mdn::GaussianMixture;
use mcte::multigoal::{ExpertConfig, GridExpert, MultiGoalWorld};
use mcte::solver::{feature_expectation, solve_mcte, verify_kkt, DualState, SolveOptions};
use mcte::sparsemax::{sparsemax, LogitVector};
use mcte::tabular::{
    causal_tsallis_entropy, evaluate_policy_with_bonus, gridworld, occupancy_from_policy, policy_from_occupancy,
    random_mdp, sparse_value_iteration, sparse_value_iteration_with_reward, tsallis_entropy_of_occupancy,
    GridworldSpec, PolicyTable, TabularMdp, ValueIterationOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::table::{cell, Table};

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut ChaCha8Rng) -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("sparsemax_projection", sparsemax_projection),
    ("occupancy_entropy_identity", occupancy_entropy_identity),
    ("occupancy_entropy_concavity", occupancy_entropy_concavity),
    ("occupancy_round_trip", occupancy_round_trip),
    ("sparse_vi_kkt", sparse_vi_kkt),
    ("sparse_vi_closed_form", sparse_vi_closed_form),
    ("sparse_vi_value_semantics", sparse_vi_value_semantics),
    ("mcte_recovery", mcte_recovery),
    ("mixture_entropy_quadrature", mixture_entropy_quadrature),
    ("multigoal_expert", multigoal_expert),
];

pub fn run_suite(seed: u64) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (passed, detail) = match check(&mut rng) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

pub fn outcome_table(outcomes: &[CheckOutcome]) -> Table {
    let mut t = Table::new(&["check", "result", "detail"]);
    for o in outcomes {
        let result = if o.passed { "pass" } else { "FAIL" };
        t.push(vec![o.name.to_string(), result.to_string(), cell(&o.detail)]);
    }
    t
}

fn within(value: f64, tol: f64, what: &str) -> Result<String, String> {
    if value <= tol {
        Ok(format!("{what} {value:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("{what} {value:.2e} > {tol:.0e}"))
    }
}

fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> PolicyTable {
    let mut probs = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        let raw: Vec<f64> = (0..na)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.01..1.0) })
            .collect();
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            let mut row = vec![0.0; na];
            row[rng.gen_range(0..na)] = 1.0;
            probs.extend(row);
        } else {
            probs.extend(raw.iter().map(|x| x / total));
        }
    }
    PolicyTable::new(ns, na, probs).expect("rows are normalized")
}

fn random_small_mdp(rng: &mut ChaCha8Rng) -> TabularMdp {
    let ns = rng.gen_range(2..=12);
    let na = rng.gen_range(2..=5);
    random_mdp(ns, na, 3, rng.gen_range(0.5..0.95), rng.gen())
}

/// Simplex projection by bisection on the threshold.
fn projection_by_bisection(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (max - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = z.iter().map(|x| (x - mid).max(0.0)).sum();
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    z.iter().map(|x| (x - tau).max(0.0)).collect()
}

fn sparsemax_projection(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=16);
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = sparsemax(&LogitVector::new(z.clone()).map_err(|e| e.to_string())?);
        for (a, b) in p.dist.probs().iter().zip(projection_by_bisection(&z)) {
            worst = worst.max((a - b).abs());
        }
    }
    within(worst, 1e-9, "max abs diff")
}

fn occupancy_entropy_identity(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mdp = random_small_mdp(rng);
        let pi = random_policy(rng, mdp.n_states(), mdp.n_actions());
        let direct = causal_tsallis_entropy(&mdp, &pi).map_err(|e| e.to_string())?;
        let rho = occupancy_from_policy(&mdp, &pi).map_err(|e| e.to_string())?;
        worst = worst.max((direct - tsallis_entropy_of_occupancy(&rho)).abs());
    }
    within(worst, 1e-10, "max gap")
}

fn occupancy_entropy_concavity(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let mdp = random_small_mdp(rng);
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let a = occupancy_from_policy(&mdp, &random_policy(rng, ns, na)).map_err(|e| e.to_string())?;
        let b = occupancy_from_policy(&mdp, &random_policy(rng, ns, na)).map_err(|e| e.to_string())?;
        let lambda = rng.gen_range(0.0..=1.0);
        let mixed = tsallis_entropy_of_occupancy(&a.mix(&b, lambda));
        let chord = lambda * tsallis_entropy_of_occupancy(&a) + (1.0 - lambda) * tsallis_entropy_of_occupancy(&b);
        worst = worst.min(mixed - chord);
    }
    if worst >= -1e-12 {
        Ok(format!("min slack {worst:.2e}"))
    } else {
        Err(format!("min slack {worst:.2e} < -1e-12"))
    }
}

fn occupancy_round_trip(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mdp = random_small_mdp(rng);
        let pi = random_policy(rng, mdp.n_states(), mdp.n_actions());
        let rho = occupancy_from_policy(&mdp, &pi).map_err(|e| e.to_string())?;
        let back = policy_from_occupancy(&rho);
        for s in (0..mdp.n_states()).filter(|&s| rho.state_mass(s) > 0.0) {
            for a in 0..mdp.n_actions() {
                worst = worst.max((back.prob(s, a) - pi.prob(s, a)).abs());
            }
        }
    }
    within(worst, 1e-9, "max policy gap")
}

fn sparse_vi_kkt(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mdp = gridworld(&GridworldSpec::default());
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let theta: Vec<f64> = (0..mdp.n_features()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = rng.gen_range(0.2..2.0);
        let fixed = sparse_value_iteration_with_reward(
            &mdp,
            &mdp.linear_reward(&theta),
            alpha,
            ValueIterationOptions::default(),
            None,
        )
        .map_err(|e| e.to_string())?;
        let dual = DualState {
            theta,
            c: fixed.values.v,
            step_count: 0,
        };
        let kkt = verify_kkt(&mdp, &fixed.policy, &dual, alpha).map_err(|e| e.to_string())?;
        worst = worst.max(kkt.max());
    }
    within(worst, 1e-8, "max KKT residual")
}

fn sparse_vi_closed_form(_: &mut ChaCha8Rng) -> Result<String, String> {
    let mdp = TabularMdp::new(1, 2, 0.0, vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0], 0, vec![])
        .map_err(|e| e.to_string())?;
    let fixed = sparse_value_iteration(&mdp, 1.0, ValueIterationOptions::default()).map_err(|e| e.to_string())?;
    let gap = (fixed.values.v[0] - 1.25)
        .abs()
        .max((fixed.policy.prob(0, 0) - 0.5).abs())
        .max((fixed.policy.prob(0, 1) - 0.5).abs());
    within(gap, 1e-12, "gap to V=1.25, pi=(0.5, 0.5)")
}

fn sparse_vi_value_semantics(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mdp = random_small_mdp(rng);
        let alpha = rng.gen_range(0.1..2.0);
        let fixed = sparse_value_iteration(&mdp, alpha, ValueIterationOptions::default()).map_err(|e| e.to_string())?;
        let v = evaluate_policy_with_bonus(&mdp, &fixed.policy, alpha).map_err(|e| e.to_string())?;
        for (a, b) in v.iter().zip(&fixed.values.v) {
            worst = worst.max((a - b).abs());
        }
    }
    within(worst, 1e-8, "max value gap")
}

fn mcte_recovery(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mdp = gridworld(&GridworldSpec {
        size: 3,
        ..GridworldSpec::default()
    });
    let theta: Vec<f64> = (0..mdp.n_features()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let expert = sparse_value_iteration_with_reward(
        &mdp,
        &mdp.linear_reward(&theta),
        1.0,
        ValueIterationOptions::default(),
        None,
    )
    .map_err(|e| e.to_string())?;
    let mu = feature_expectation(&mdp, &expert.policy).map_err(|e| e.to_string())?;
    let opts = SolveOptions {
        grad_tol: 1e-4,
        ..SolveOptions::default()
    };
    let sol = solve_mcte(&mdp, &mu, &opts).map_err(|e| e.to_string())?;
    within(sol.grad_norm, 1e-3, "feature gap")
}

fn mixture_entropy_quadrature(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.gen_range(1..=4);
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let m = GaussianMixture {
            weights: raw.iter().map(|w| w / total).collect(),
            means: (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            stds: (0..k).map(|_| rng.gen_range(0.3..1.5)).collect(),
            dim: 1,
        };
        // composite Simpson on a wide interval
        let (lo, hi, n) = (-15.0, 15.0, 20_000);
        let h = (hi - lo) / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * m.density(&[x]).powi(2);
        }
        let quad = 0.5 * (1.0 - sum * h / 3.0);
        worst = worst.max((quad - m.tsallis_entropy()).abs());
    }
    within(worst, 1e-6, "max gap to quadrature")
}

fn multigoal_expert(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let world = MultiGoalWorld::default();
    let expert = GridExpert::solve(&world, &ExpertConfig::default()).map_err(|e| e.to_string())?;
    let start = expert.cell_of([0.0, 0.0]);
    let support = expert.policy.support_size(start);
    if support < 2 {
        return Err(format!("center support {support} < 2"));
    }
    let demos = expert.demos(50, rng).map_err(|e| e.to_string())?;
    let horizon = world.max_steps;
    let all_end = demos.episodes().iter().all(|ep| {
        let last = ep.steps.last().expect("episodes are nonempty");
        let end = world.advance([last.state[0], last.state[1]], &last.action);
        ep.len() <= horizon && world.captured(end).is_some()
    });
    if !all_end {
        return Err("a demo did not end at an attractor".into());
    }
    Ok(format!("center support {support}; 50 demos end at attractors"))
}
