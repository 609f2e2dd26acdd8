use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mcte::multigoal::GridExpert;
use mcte::solver::{feature_expectation, solve_mcte, write_residual_csv, SolveOptions};
use mcte::tabular::{gridworld, sparse_value_iteration_with_reward, GridworldSpec, ValueIterationOptions};
use mcte::trainer::{sample_rollouts, train_with_demos};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Kind, VariantSpec};
use crate::suite::{outcome_table, run_suite};
use crate::table::{cell, mean_stderr, Table};

const DEMO_STREAM: u64 = 11;
const EVAL_KEY: u64 = 0xe7a1_0000_0000_0001;

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub role: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_hash: String,
    kind: Kind,
    seeds: &'a [u64],
    files: Vec<FileEntry>,
}

/// What a run produced and how it went.
#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub failed_cells: usize,
    pub failed_checks: usize,
    /// Table printed to stdout at the end.
    pub table: Table,
}

#[derive(Debug)]
pub struct RunError(pub String);

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    Sha256::digest(config.canonical_json().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

struct Files {
    root: PathBuf,
    entries: Vec<FileEntry>,
}

impl Files {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn add(&mut self, rel: &str, role: &'static str, seed: Option<u64>, variant: Option<String>) {
        self.entries.push(FileEntry {
            path: rel.to_string(),
            role,
            seed,
            variant,
        });
    }
}

/// Executes every cell of `config` on `workers` threads and writes all
/// artifacts under `config.out_dir`.
pub fn run(config: &ExperimentConfig, workers: usize) -> Result<RunReport, RunError> {
    let started = unix_now();
    let root = config.out_dir.clone();
    create_dir(&root)?;
    let mut files = Files {
        root: root.clone(),
        entries: Vec::new(),
    };
    write_text(&files.path("config.json"), &(serde_json::to_string_pretty(config).expect("config serializes") + "\n"))?;
    files.add("config.json", "config", None, None);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError(format!("thread pool: {e}")))?;
    let mut report = pool.install(|| match config.kind {
        Kind::Multigoal => run_multigoal(config, &mut files),
        Kind::TabularIrl => run_tabular_irl(config, &mut files),
        Kind::PropertySuite => run_property_suite(config, &mut files),
    })?;

    files.entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        config_hash: config_hash(config),
        kind: config.kind,
        seeds: &config.seeds,
        files: files.entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_text(&root.join("manifest.json"), &text)?;
    let meta = serde_json::json!({
        "started_unix": started,
        "finished_unix": unix_now(),
        "workers": workers,
    });
    write_text(&root.join("run_meta.json"), &(meta.to_string() + "\n"))?;
    report.out_dir = root;
    Ok(report)
}

struct MultigoalCell {
    spec: VariantSpec,
    seed: u64,
    outcome: Result<(f64, usize), String>,
}

fn run_multigoal(config: &ExperimentConfig, files: &mut Files) -> Result<RunReport, RunError> {
    create_dir(&files.path("demos"))?;
    create_dir(&files.path("cells"))?;
    let expert = GridExpert::solve(&config.world, &config.expert).map_err(|e| RunError(format!("expert: {e}")))?;
    let mut demos = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DEMO_STREAM);
        let batch = expert
            .demos(config.expert.n_demos, &mut rng)
            .map_err(|e| RunError(format!("demos for seed {seed}: {e}")))?;
        let rel = format!("demos/seed{seed}.csv");
        batch.write_csv(&files.path(&rel)).map_err(|e| RunError(e.to_string()))?;
        files.add(&rel, "demos", Some(seed), None);
        demos.push(batch);
    }

    let jobs: Vec<(VariantSpec, usize)> = config
        .variants
        .iter()
        .flat_map(|v| (0..config.seeds.len()).map(move |i| (v.clone(), i)))
        .collect();
    for (spec, i) in &jobs {
        let dir = format!("cells/{}_seed{}", spec.label(), config.seeds[*i]);
        create_dir(&files.path(&dir))?;
        files.add(&format!("{dir}/log.csv"), "training_log", Some(config.seeds[*i]), Some(spec.label()));
        files.add(&format!("{dir}/policy.json"), "checkpoint", Some(config.seeds[*i]), Some(spec.label()));
    }
    let cells: Vec<MultigoalCell> = jobs
        .par_iter()
        .map(|(spec, i)| {
            let seed = config.seeds[*i];
            let dir = files.path(&format!("cells/{}_seed{seed}", spec.label()));
            let mut trainer = config.trainer_for(spec, seed);
            trainer.log_path = Some(dir.join("log.csv"));
            trainer.checkpoint_path = Some(dir.join("policy.json"));
            let outcome = train_with_demos(&trainer, &config.world, &demos[*i])
                .and_then(|out| sample_rollouts(&out.policy, &config.world, config.eval_episodes, seed ^ EVAL_KEY, 0))
                .map(|eval| (eval.batch.average_return(), eval.reachability()))
                .map_err(|e| e.to_string());
            MultigoalCell {
                spec: spec.clone(),
                seed,
                outcome,
            }
        })
        .collect();

    let mut per_cell = Table::new(&["variant", "k", "alpha", "seed", "status", "final_return", "final_reachability"]);
    for c in &cells {
        let (status, ret, reach) = match &c.outcome {
            Ok((r, n)) => ("ok".to_string(), format!("{r:?}"), n.to_string()),
            Err(e) => (format!("error: {}", cell(e)), String::new(), String::new()),
        };
        per_cell.push(vec![
            c.spec.variant.name().into(),
            c.spec.k.to_string(),
            format!("{:?}", c.spec.alpha),
            c.seed.to_string(),
            status,
            ret,
            reach,
        ]);
    }
    per_cell.write(&files.path("cells.csv")).map_err(io_err(&files.path("cells.csv")))?;
    files.add("cells.csv", "cell_results", None, None);

    let mut summary = Table::new(&[
        "variant",
        "k",
        "alpha",
        "n_seeds",
        "final_return_mean",
        "final_return_stderr",
        "final_reachability_mean",
        "final_reachability_stderr",
    ]);
    for spec in &config.variants {
        let done: Vec<(f64, usize)> = cells
            .iter()
            .filter(|c| &c.spec == spec)
            .filter_map(|c| c.outcome.as_ref().ok().copied())
            .collect();
        if done.is_empty() {
            continue;
        }
        let (rm, rs) = mean_stderr(&done.iter().map(|d| d.0).collect::<Vec<_>>());
        let (nm, ns) = mean_stderr(&done.iter().map(|d| d.1 as f64).collect::<Vec<_>>());
        summary.push(vec![
            spec.variant.name().into(),
            spec.k.to_string(),
            format!("{:?}", spec.alpha),
            done.len().to_string(),
            format!("{rm:?}"),
            format!("{rs:?}"),
            format!("{nm:?}"),
            format!("{ns:?}"),
        ]);
    }
    summary.rank("final_reachability_mean").expect("column exists");
    summary.write(&files.path("summary.csv")).map_err(io_err(&files.path("summary.csv")))?;
    files.add("summary.csv", "summary", None, None);

    Ok(RunReport {
        out_dir: PathBuf::new(),
        failed_cells: cells.iter().filter(|c| c.outcome.is_err()).count(),
        failed_checks: 0,
        table: summary,
    })
}

struct IrlCell {
    seed: u64,
    outcome: Result<(f64, f64, f64, usize), String>,
}

fn run_tabular_irl(config: &ExperimentConfig, files: &mut Files) -> Result<RunReport, RunError> {
    create_dir(&files.path("demos"))?;
    create_dir(&files.path("cells"))?;
    let irl = &config.irl;
    let mdp = gridworld(&GridworldSpec {
        size: irl.grid_size,
        slip: irl.slip,
        gamma: irl.gamma,
        ..GridworldSpec::default()
    });
    for &seed in &config.seeds {
        let dir = format!("cells/mcte_seed{seed}");
        create_dir(&files.path(&dir))?;
        files.add(&format!("{dir}/log.csv"), "solver_log", Some(seed), Some("mcte".into()));
        files.add(&format!("demos/seed{seed}.csv"), "expert_policy", Some(seed), None);
    }
    let opts = SolveOptions {
        alpha: irl.alpha,
        lr: irl.lr,
        iters: irl.iters,
        grad_tol: irl.grad_tol,
        inner: ValueIterationOptions::default(),
    };
    let cells: Vec<IrlCell> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> Result<(f64, f64, f64, usize), String> {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let theta: Vec<f64> = (0..mdp.n_features()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let expert = sparse_value_iteration_with_reward(
                    &mdp,
                    &mdp.linear_reward(&theta),
                    irl.alpha,
                    ValueIterationOptions::default(),
                    None,
                )
                .map_err(|e| e.to_string())?;
                let mut policy = Table::new(&["state", "action", "prob"]);
                for s in 0..mdp.n_states() {
                    for a in 0..mdp.n_actions() {
                        policy.push(vec![s.to_string(), a.to_string(), format!("{:?}", expert.policy.prob(s, a))]);
                    }
                }
                let path = files.path(&format!("demos/seed{seed}.csv"));
                policy.write(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let mu = feature_expectation(&mdp, &expert.policy).map_err(|e| e.to_string())?;
                let sol = solve_mcte(&mdp, &mu, &opts).map_err(|e| e.to_string())?;
                let log = files.path(&format!("cells/mcte_seed{seed}/log.csv"));
                write_residual_csv(&sol.history, &log).map_err(|e| e.to_string())?;
                let best = sol.history[sol.dual.step_count];
                Ok((sol.grad_norm, best.kkt_residual_policy, best.kkt_residual_value, sol.history.len()))
            };
            IrlCell { seed, outcome: run() }
        })
        .collect();

    let mut per_cell = Table::new(&[
        "variant",
        "seed",
        "status",
        "feature_gap",
        "kkt_residual_policy",
        "kkt_residual_value",
        "iterations",
    ]);
    for c in &cells {
        let row = match &c.outcome {
            Ok((gap, kp, kv, n)) => vec!["ok".into(), format!("{gap:e}"), format!("{kp:e}"), format!("{kv:e}"), n.to_string()],
            Err(e) => vec![format!("error: {}", cell(e)), String::new(), String::new(), String::new(), String::new()],
        };
        let mut full = vec!["mcte".to_string(), c.seed.to_string()];
        full.extend(row);
        per_cell.push(full);
    }
    per_cell.write(&files.path("cells.csv")).map_err(io_err(&files.path("cells.csv")))?;
    files.add("cells.csv", "cell_results", None, None);

    let done: Vec<(f64, f64, f64, usize)> = cells.iter().filter_map(|c| c.outcome.as_ref().ok().copied()).collect();
    let mut summary = Table::new(&[
        "variant",
        "n_seeds",
        "feature_gap_mean",
        "feature_gap_stderr",
        "kkt_residual_max",
        "converged",
    ]);
    if !done.is_empty() {
        let (gm, gs) = mean_stderr(&done.iter().map(|d| d.0).collect::<Vec<_>>());
        let kkt = done.iter().map(|d| d.1.max(d.2)).fold(0.0, f64::max);
        let converged = done.iter().filter(|d| d.0 <= irl.grad_tol).count();
        summary.push(vec![
            "mcte".into(),
            done.len().to_string(),
            format!("{gm:e}"),
            format!("{gs:e}"),
            format!("{kkt:e}"),
            converged.to_string(),
        ]);
    }
    summary.write(&files.path("summary.csv")).map_err(io_err(&files.path("summary.csv")))?;
    files.add("summary.csv", "summary", None, None);

    Ok(RunReport {
        out_dir: PathBuf::new(),
        failed_cells: cells.iter().filter(|c| c.outcome.is_err()).count(),
        failed_checks: 0,
        table: summary,
    })
}

fn run_property_suite(config: &ExperimentConfig, files: &mut Files) -> Result<RunReport, RunError> {
    let outcomes = run_suite(config.seeds[0]);
    let table = outcome_table(&outcomes);
    table.write(&files.path("suite.csv")).map_err(io_err(&files.path("suite.csv")))?;
    files.add("suite.csv", "suite_results", Some(config.seeds[0]), None);
    Ok(RunReport {
        out_dir: PathBuf::new(),
        failed_cells: 0,
        failed_checks: outcomes.iter().filter(|o| !o.passed).count(),
        table,
    })
}
