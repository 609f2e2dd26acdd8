use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY_MULTIGOAL: &str = r#"{
  "kind": "multigoal",
  "variants": [
    { "variant": "mcteil", "k": 4, "alpha": 0.1 },
    { "variant": "soft_gail", "k": 4, "alpha": 0.1 }
  ],
  "seeds": [0, 1, 2],
  "trainer": { "iterations": 2, "episodes_per_iter": 8 },
  "expert": { "n_demos": 10 },
  "eval_episodes": 10
}"#;

const TINY_IRL: &str = r#"{
  "kind": "tabular_irl",
  "seeds": [0, 1],
  "irl": { "grid_size": 3, "grad_tol": 1e-3 }
}"#;

fn mcte(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcte"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    mcte(&args)
}

fn files_with_ext(root: &Path, ext: &str) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == ext) {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn multigoal_run_writes_one_log_per_cell_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "mg.json", TINY_MULTIGOAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));

    let first = run_config(&config, &a, &["--workers", "3"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let csvs = files_with_ext(&a, "csv");
    let logs = csvs.keys().filter(|p| p.ends_with("log.csv")).count();
    let summaries = csvs.keys().filter(|p| p.ends_with("summary.csv")).count();
    assert_eq!((logs, summaries), (6, 1));
    let summary = String::from_utf8(csvs[Path::new("summary.csv")].clone()).unwrap();
    assert!(summary.starts_with("variant,k,alpha,n_seeds,final_return_mean,final_return_stderr"));
    assert_eq!(summary.lines().count(), 3);

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let listed: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    for path in csvs.keys() {
        assert!(listed.contains(&path.to_str().unwrap()), "{path:?} missing from manifest");
    }
    assert!(a.join("run_meta.json").exists());

    // the out dir is part of the config, so the rerun reuses it
    std::fs::rename(&a, &b).unwrap();
    let second = run_config(&config, &a, &["--workers", "1"]);
    assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
    assert_eq!(csvs, files_with_ext(&a, "csv"));
    assert_eq!(
        std::fs::read(a.join("manifest.json")).unwrap(),
        std::fs::read(b.join("manifest.json")).unwrap()
    );
}

#[test]
fn tabular_irl_reports_feature_gap_and_kkt() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "irl.json", TINY_IRL);
    let out = tmp.path().join("irl");
    let o = run_config(&config, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cells = std::fs::read_to_string(out.join("cells.csv")).unwrap();
    let mut lines = cells.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let gap = header.iter().position(|h| *h == "feature_gap").unwrap();
    let kkt = header.iter().position(|h| *h == "kkt_residual_policy").unwrap();
    for line in lines {
        let row: Vec<&str> = line.split(',').collect();
        assert!(row[gap].parse::<f64>().unwrap() <= 1e-3);
        assert!(row[kkt].parse::<f64>().unwrap() <= 1e-6);
    }
}

#[test]
fn seed_offset_and_dotted_overrides_apply() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "irl.json", TINY_IRL);
    let out = tmp.path().join("shifted");
    let o = run_config(&config, &out, &["--seed-offset", "10", "--set", "irl.grid_size=2", "--set", "seeds=[1]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let saved: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["seeds"], serde_json::json!([11]));
    assert_eq!(saved["irl"]["grid_size"], 2);
    assert!(out.join("cells/mcte_seed11/log.csv").exists());
}

#[test]
fn invalid_config_exits_one_with_a_line_number() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.json", "{\n  \"kind\": \"multigoal\",\n  \"seedz\": [0]\n}\n");
    let o = run_config(&bad, &tmp.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let empty = write_config(tmp.path(), "empty.json", r#"{"kind": "tabular_irl", "seeds": []}"#);
    assert_eq!(run_config(&empty, &tmp.path().join("y"), &[]).status.code(), Some(1));
    assert_eq!(mcte(&["run"]).status.code(), Some(1));
}

#[test]
fn compare_merges_and_ranks_summaries() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.csv", "variant,score_mean\nalpha,1\nbeta,3\n");
    let b = write_config(tmp.path(), "b.csv", "variant,score_mean\ngamma,2\n");

    let single = mcte(&["compare", a.to_str().unwrap()]);
    assert_eq!(single.status.code(), Some(0));
    assert_eq!(String::from_utf8(single.stdout).unwrap(), "variant,score_mean\nbeta,3\nalpha,1\n");

    let merged_path = tmp.path().join("merged.csv");
    let two = mcte(&["compare", b.to_str().unwrap(), a.to_str().unwrap(), "--out", merged_path.to_str().unwrap()]);
    assert_eq!(two.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(&merged_path).unwrap(),
        "variant,score_mean\nbeta,3\ngamma,2\nalpha,1\n"
    );
}

#[test]
fn compare_names_the_mismatched_column() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.csv", "variant,score_mean\nalpha,1\n");
    let b = write_config(tmp.path(), "b.csv", "variant,reach_mean\nbeta,1\n");
    let o = mcte(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("\"reach_mean\""), "{}", stderr(&o));
}

#[test]
fn suite_passes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("suite");
    let o = mcte(&["suite", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("check,result,detail\n"));
    assert!(!table.contains("FAIL"));
    assert_eq!(table.lines().count(), 11);
    assert!(out.join("suite.csv").exists());
}
