//! CSV views of run histories. Undefined metrics are written as empty cells.

use std::io::Write;

use super::runner::{EpochRecord, LocalBaselines, RoundRecord};
use crate::error::{Error, Result};
use crate::metrics::MetricSet;

pub const GLOBAL_LABEL: &str = "GLOBAL";

pub(crate) fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metric_cells(m: &MetricSet) -> [String; 4] {
    [cell(m.precision), cell(m.recall), cell(m.f1), cell(m.auc)]
}

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush().map_err(|e| Error::io("csv output", e))
}

/// One GLOBAL row per round followed by one row per silo; per-silo bytes
/// sum to the GLOBAL row's.
pub fn write_rounds_csv<W: Write>(w: W, history: &[RoundRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["round", "silo", "precision", "recall", "f1", "auc", "bytes_up", "bytes_down"])?;
    for r in history {
        let round = r.round.to_string();
        let mut row = vec![round.clone(), GLOBAL_LABEL.to_string()];
        row.extend(metric_cells(&r.global));
        row.extend([r.bytes_up.to_string(), r.bytes_down.to_string()]);
        out.write_record(&row)?;
        for (silo, m) in &r.per_silo {
            let bytes = r.silo_bytes.get(silo).copied().unwrap_or_default();
            let mut row = vec![round.clone(), silo.to_string()];
            row.extend(metric_cells(m));
            row.extend([bytes.up.to_string(), bytes.down.to_string()]);
            out.write_record(&row)?;
        }
    }
    finish(out)
}

/// Per-silo metrics of one round (normally the last).
pub fn write_silo_metrics_csv<W: Write>(w: W, record: &RoundRecord) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["silo", "precision", "recall", "f1", "auc", "support_pos", "support_neg"])?;
    for (silo, m) in &record.per_silo {
        let mut row = vec![silo.to_string()];
        row.extend(metric_cells(m));
        row.extend([m.support_pos.to_string(), m.support_neg.to_string()]);
        out.write_record(&row)?;
    }
    finish(out)
}

pub fn write_epochs_csv<W: Write>(w: W, history: &[EpochRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "precision", "recall", "f1", "auc"])?;
    for e in history {
        let mut row = vec![e.epoch.to_string()];
        row.extend(metric_cells(&e.metrics));
        out.write_record(&row)?;
    }
    finish(out)
}

pub fn write_local_csv<W: Write>(w: W, local: &LocalBaselines) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "silo",
        "precision",
        "recall",
        "f1",
        "auc",
        "support_pos",
        "support_neg",
        "pos_weight",
        "degenerate_class_weight",
        "excluded",
    ])?;
    for r in &local.per_silo {
        let mut row = vec![r.silo.to_string()];
        row.extend(metric_cells(&r.metrics));
        row.extend([
            r.metrics.support_pos.to_string(),
            r.metrics.support_neg.to_string(),
            r.pos_weight.to_string(),
            r.degenerate_class_weight.to_string(),
            local.excluded.contains(&r.silo).to_string(),
        ]);
        out.write_record(&row)?;
    }
    finish(out)
}
