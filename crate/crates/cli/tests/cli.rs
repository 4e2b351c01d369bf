//! End-to-end runs of the `silofed` binary on small configs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn silofed(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silofed"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

/// Six small silos, silo 2 without positives, a tiny net and a few rounds.
fn tiny() -> Value {
    json!({
        "seed": 5,
        "data": {"synthetic": {"n_silos": 6, "rows_per_silo": 150, "zero_positive_silos": [2]}},
        "federation": {
            "n_rounds": 4, "clients_per_round": 3, "total_clients": 6, "local_baseline_epochs": 2,
            "net": {"hidden_width": 8, "n_blocks": 2}
        },
        "explain": {"instances": 5, "background_size": 12}
    })
}

fn run(tmp: &TempDir, cfg: &Path, out: &str, args: &[&str]) -> Output {
    let mut full = vec!["--config", cfg.to_str().unwrap(), "--out", out];
    full.extend_from_slice(args);
    silofed(&full, tmp.path())
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_data_defaults_are_full_size_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    ok(&silofed(&["--out", "a", "generate-data"], tmp.path()));
    ok(&silofed(&["--out", "b", "generate-data"], tmp.path()));
    let a = std::fs::read(tmp.path().join("a/data.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/data.csv")).unwrap();
    assert_eq!(a, b);

    let rows = read_csv(&tmp.path().join("a/data.csv"));
    assert_eq!(rows.len(), 25_500);
    let mut rdr = csv::Reader::from_path(tmp.path().join("a/data.csv")).unwrap();
    let state = rdr.headers().unwrap().iter().position(|h| h == "state").unwrap();
    let silos: BTreeSet<&str> = rows.iter().map(|r| r[state].as_str()).collect();
    assert_eq!(silos.len(), 51);

    let manifest = read_json(&tmp.path().join("a/manifest.json"));
    assert!(manifest["files"]["data.csv"]["sha256"].is_string());
    assert!(manifest["files"]["schema.json"]["bytes"].as_u64().unwrap() > 0);
}

#[test]
fn invalid_config_exits_with_code_one() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = tiny();
    cfg["data"]["synthetic"]["rows_per_silo"] = json!(0);
    let path = write_config(tmp.path(), "bad.json", &cfg);
    assert_eq!(run(&tmp, &path, "r", &["generate-data"]).status.code(), Some(1));

    let path = write_config(tmp.path(), "unknown.json", &json!({"sede": 1}));
    assert_eq!(run(&tmp, &path, "r", &["train"]).status.code(), Some(1));

    let mut cfg = tiny();
    cfg["explain"]["instances"] = json!(0);
    let path = write_config(tmp.path(), "zero.json", &cfg);
    assert_eq!(run(&tmp, &path, "r", &["explain"]).status.code(), Some(1));
}

#[test]
fn report_outside_a_run_directory_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = silofed(&["--out", "nowhere", "report"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn federated_training_writes_history_and_costs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    ok(&run(&tmp, &cfg, "r", &["train", "--mode", "federated"]));
    let dir = tmp.path().join("r");

    let rows = read_csv(&dir.join("rounds.csv"));
    let global: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == "GLOBAL").collect();
    assert_eq!(global.len(), 4);
    assert_eq!(rows.len(), 4 * 7);
    for (i, g) in global.iter().enumerate() {
        assert_eq!(g[0], (i + 1).to_string());
        let per_silo: u64 = rows
            .iter()
            .filter(|r| r[0] == g[0] && r[1] != "GLOBAL")
            .map(|r| r[6].parse::<u64>().unwrap())
            .sum();
        assert_eq!(per_silo, g[6].parse::<u64>().unwrap());
    }

    let ledger = read_json(&dir.join("ledger.json"));
    let model_bytes = std::fs::metadata(dir.join("model.bin")).unwrap().len();
    assert_eq!(ledger["ledger"]["total_bytes"].as_u64().unwrap(), 4 * 3 * 2 * model_bytes);
    assert_eq!(ledger["broadcast_all"]["total_bytes"].as_u64().unwrap(), 4 * (3 + 6) * model_bytes);

    let silos = read_csv(&dir.join("silo_metrics.csv"));
    assert_eq!(silos.len(), 6);
    let silo2 = silos.iter().find(|r| r[0] == "2").unwrap();
    assert_eq!(silo2[2], "", "recall is undefined without positives");
    assert_eq!(silo2[5], "0");
}

#[test]
fn default_network_costs_match_the_reference_budget() {
    // Full 200-round schedule with the default network on a light dataset.
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"data": {"synthetic": {"rows_per_silo": 20}}});
    let cfg = write_config(tmp.path(), "c.json", &cfg);
    ok(&run(&tmp, &cfg, "r", &["train"]));
    let ledger = read_json(&tmp.path().join("r/ledger.json"));
    assert_eq!(ledger["ledger"]["rounds"].as_u64(), Some(200));
    let gb = ledger["ledger"]["total_gb"].as_f64().unwrap();
    assert!((gb - 4.93).abs() <= 0.01, "{gb}");
    let reduction = ledger["reduction_vs_broadcast_all"].as_f64().unwrap();
    assert!((reduction - (1.0 - 24.0 / 63.0)).abs() < 1e-12);
}

#[test]
fn local_baselines_flag_degenerate_silos() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    let out = run(&tmp, &cfg, "r", &["train", "--mode", "local-baselines"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("silo 2"));
    let summary = read_json(&tmp.path().join("r/local_summary.json"));
    assert!(summary["degenerate_class_weight"].as_array().unwrap().contains(&json!(2)));
    assert!(summary["excluded_from_f1"].as_array().unwrap().contains(&json!(2)));

    let mut rdr = csv::Reader::from_path(tmp.path().join("r/local_baselines.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let silo2 = rows.iter().find(|r| &r[col("silo")] == "2").unwrap();
    assert_eq!(&silo2[col("degenerate_class_weight")], "true");
    assert_eq!(&silo2[col("excluded")], "true");
}

#[test]
fn explaining_with_a_mismatched_model_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    ok(&run(&tmp, &cfg, "r", &["train"]));
    let mut wider = tiny();
    wider["federation"]["net"]["hidden_width"] = json!(10);
    let wider = write_config(tmp.path(), "w.json", &wider);
    let out = run(&tmp, &wider, "other", &["explain", "--model", "r/model.bin"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn owen_with_singleton_blocks_matches_shapley() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = tiny();
    cfg["explain"]["structure"] = json!("features");
    cfg["explain"]["blocks"] = json!([]);
    cfg["explain"]["method"] = json!("owen-exact");
    let owen = write_config(tmp.path(), "owen.json", &cfg);
    cfg["explain"]["method"] = json!("shapley-exact");
    let shapley = write_config(tmp.path(), "shapley.json", &cfg);

    ok(&run(&tmp, &owen, "r", &["train"]));
    ok(&run(&tmp, &owen, "r", &["explain"]));
    ok(&run(&tmp, &shapley, "s", &["explain", "--model", "r/model.bin"]));

    let a = read_csv(&tmp.path().join("r/summary.csv"));
    let b = read_csv(&tmp.path().join("s/summary.csv"));
    assert_eq!(a.len(), 11);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x[0], y[0]);
        for c in 1..3 {
            let (u, v): (f64, f64) = (x[c].parse().unwrap(), y[c].parse().unwrap());
            assert!((u - v).abs() <= 1e-9, "{} {u} vs {v}", x[0]);
        }
    }
}

#[test]
fn report_summarizes_a_full_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    for args in [
        &["train"][..],
        &["train", "--mode", "centralized"],
        &["train", "--mode", "local-baselines"],
        &["explain"],
    ] {
        ok(&run(&tmp, &cfg, "r", args));
    }
    ok(&silofed(&["--out", "r", "report", "--svg"], tmp.path()));
    let dir = tmp.path().join("r");
    let text = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(text.contains("n/a"), "{text}");
    assert!(text.contains("reduction vs broadcast-all: 33.3%"), "{text}");

    // Top five players, ranked independently from summary.csv.
    let mut summary: Vec<(String, f64)> = read_csv(&dir.join("summary.csv"))
        .into_iter()
        .map(|r| (r[0].clone(), r[1].parse().unwrap()))
        .collect();
    summary.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let top: Vec<String> = text
        .lines()
        .skip_while(|l| !l.starts_with("Top features"))
        .skip(1)
        .take(5)
        .map(|l| l.split_whitespace().nth(1).unwrap().to_string())
        .collect();
    let expected: Vec<String> = summary.iter().take(5).map(|(n, _)| n.clone()).collect();
    assert_eq!(top, expected);

    // One marker per silo with both metrics defined.
    let silos = read_csv(&dir.join("silo_metrics.csv"));
    let defined = |x: usize, y: usize| silos.iter().filter(|r| !r[x].is_empty() && !r[y].is_empty()).count();
    let circles = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap().matches("<circle").count();
    assert_eq!(circles("silo_precision_recall.svg"), defined(1, 2));
    assert_eq!(circles("silo_f1_auc.svg"), defined(3, 4));
    assert!(defined(1, 2) < 6, "silo 2 has no recall");

    let manifest = read_json(&dir.join("manifest.json"));
    for name in ["summary.txt", "feature_importance.svg", "attributions.csv", "local_baselines.csv"] {
        assert!(manifest["files"][name].is_object(), "{name} missing from manifest");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny());
    for out in ["a", "b"] {
        for args in [&["train"][..], &["explain"]] {
            ok(&run(&tmp, &cfg, out, args));
        }
    }
    for name in ["rounds.csv", "model.bin", "ledger.json", "attributions.csv", "summary.csv", "bins.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }

    let other = run(&tmp, &cfg, "c", &["--seed", "6", "train"]);
    ok(&other);
    assert_ne!(
        std::fs::read(tmp.path().join("a/model.bin")).unwrap(),
        std::fs::read(tmp.path().join("c/model.bin")).unwrap()
    );
}
