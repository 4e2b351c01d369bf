//! Human-readable summary and charts of a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::commands::{
    CENTRAL_FILE, EXPLAIN_FILE, FEDERATED_FILE, LEDGER_FILE, LOCAL_SUMMARY_FILE, SILO_FILE, SUMMARY_FILE,
};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::svg;

pub const REPORT_FILE: &str = "summary.txt";
pub const PR_SVG: &str = "silo_precision_recall.svg";
pub const F1_AUC_SVG: &str = "silo_f1_auc.svg";
pub const FEATURES_SVG: &str = "feature_importance.svg";

type Table = Vec<BTreeMap<String, String>>;

fn read_table(path: &Path) -> CliResult<Table> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            Ok(headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn num(row: &BTreeMap<String, String>, key: &str) -> Option<f64> {
    row.get(key).and_then(|v| v.parse().ok())
}

/// Four decimals, or "n/a" for undefined values.
pub fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn fmt_json(v: &Value) -> String {
    fmt(v.as_f64())
}

fn metric_line(m: &Value) -> String {
    format!(
        "precision {}  recall {}  f1 {}  auc {}",
        fmt_json(&m["precision"]),
        fmt_json(&m["recall"]),
        fmt_json(&m["f1"]),
        fmt_json(&m["auc"])
    )
}

/// `(player, mean_abs)` sorted by decreasing mean |value|, ties by name.
pub fn ranked_features(summary: &Table) -> Vec<(String, f64)> {
    let mut items: Vec<(String, f64)> = summary
        .iter()
        .filter_map(|r| Some((r.get("player")?.clone(), num(r, "mean_abs")?)))
        .collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items
}

pub fn report(dir: &Path, with_svg: bool) -> CliResult<()> {
    let mut manifest = RunManifest::load(dir)?;
    let mut out = String::new();
    let _ = writeln!(out, "silofed run report");
    let _ = writeln!(out, "config {}  seed {}", &manifest.config_hash[..12], manifest.seed);

    if manifest.has(FEDERATED_FILE) {
        let fed = read_json(&dir.join(FEDERATED_FILE))?;
        let _ = writeln!(out, "\nFederated model after {} rounds (pooled test set)", fed["rounds"]);
        let _ = writeln!(out, "  {}", metric_line(&fed["final"]));
    }
    let silos = if manifest.has(SILO_FILE) {
        read_table(&dir.join(SILO_FILE))?
    } else {
        Vec::new()
    };
    if !silos.is_empty() {
        let mut ranked: Vec<(String, f64)> = silos
            .iter()
            .filter_map(|r| Some((r.get("silo")?.clone(), num(r, "f1")?)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let show = |items: &[(String, f64)]| {
            items
                .iter()
                .map(|(s, f)| format!("{s} ({f:.4})"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(out, "\nPer-silo F1, final round");
        let _ = writeln!(out, "  best:  {}", show(&ranked[..ranked.len().min(3)]));
        let worst: Vec<(String, f64)> = ranked.iter().rev().take(3).cloned().collect();
        let _ = writeln!(out, "  worst: {}", show(&worst));
        let undefined: Vec<&str> = silos
            .iter()
            .filter(|r| num(r, "f1").is_none())
            .filter_map(|r| r.get("silo").map(String::as_str))
            .collect();
        if !undefined.is_empty() {
            let _ = writeln!(out, "  f1 n/a: {}", undefined.join(", "));
        }
    }
    if manifest.has(LEDGER_FILE) {
        let l = read_json(&dir.join(LEDGER_FILE))?;
        let line = |s: &Value| {
            format!(
                "{} over {} rounds: {} bytes = {:.4} GB",
                s["strategy"].as_str().unwrap_or("?"),
                s["rounds"],
                s["total_bytes"],
                s["total_gb"].as_f64().unwrap_or(f64::NAN)
            )
        };
        let _ = writeln!(out, "\nCommunication");
        let _ = writeln!(out, "  {}", line(&l["ledger"]));
        let _ = writeln!(out, "  {}", line(&l["broadcast_all"]));
        let _ = writeln!(
            out,
            "  reduction vs broadcast-all: {:.1}%",
            100.0 * l["reduction_vs_broadcast_all"].as_f64().unwrap_or(f64::NAN)
        );
    }
    if manifest.has(CENTRAL_FILE) {
        let c = read_json(&dir.join(CENTRAL_FILE))?;
        let _ = writeln!(out, "\nCentralized model ({} epochs run)", c["epochs_run"]);
        let _ = writeln!(out, "  {}", metric_line(&c["final"]));
    }
    if manifest.has(LOCAL_SUMMARY_FILE) {
        let l = read_json(&dir.join(LOCAL_SUMMARY_FILE))?;
        let _ = writeln!(out, "\nLocal-only baselines, macro average");
        let _ = writeln!(out, "  {}", metric_line(&l["macro_average"]));
        let _ = writeln!(out, "  excluded from f1: {}", l["excluded_from_f1"]);
        let _ = writeln!(out, "  trained unweighted: {}", l["degenerate_class_weight"]);
    }
    let features = if manifest.has(SUMMARY_FILE) {
        ranked_features(&read_table(&dir.join(SUMMARY_FILE))?)
    } else {
        Vec::new()
    };
    if !features.is_empty() {
        let method = if manifest.has(EXPLAIN_FILE) {
            read_json(&dir.join(EXPLAIN_FILE))?["method"].as_str().unwrap_or("").to_string()
        } else {
            String::new()
        };
        let _ = writeln!(out, "\nTop features by mean |value| ({method})");
        for (i, (name, v)) in features.iter().take(5).enumerate() {
            let _ = writeln!(out, "  {}. {name} {v:.4}", i + 1);
        }
    }

    let mut written = vec![REPORT_FILE];
    let path = dir.join(REPORT_FILE);
    std::fs::write(&path, &out).map_err(|e| CliError::io(&path, e))?;
    if with_svg {
        let pts = |xk: &str, yk: &str| -> Vec<(String, f64, f64)> {
            silos
                .iter()
                .filter_map(|r| Some((format!("silo {}", r.get("silo")?), num(r, xk)?, num(r, yk)?)))
                .collect()
        };
        let charts = [
            (PR_SVG, svg::scatter("Per-silo precision vs recall", "recall", "precision", &pts("recall", "precision"))),
            (F1_AUC_SVG, svg::scatter("Per-silo F1 vs AUC", "auc", "f1", &pts("auc", "f1"))),
            (FEATURES_SVG, svg::bars("Mean |attribution|", &features)),
        ];
        for (name, body) in charts {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            written.push(name);
        }
    }
    for name in written {
        manifest.record(dir, name)?;
    }
    manifest.save(dir)?;
    print!("{out}");
    Ok(())
}
