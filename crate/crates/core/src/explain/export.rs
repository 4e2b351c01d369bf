use std::io::Write;

use super::game::Attribution;
use super::structure::GroupStructure;
use super::summary::{BinDistribution, PlayerSummary};
use crate::error::{Error, Result};

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush().map_err(|e| Error::io("csv output", e))
}

/// Long format: one row per (instance, player).
pub fn write_attributions_csv<W: Write>(w: W, structure: &GroupStructure, attributions: &[Attribution]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["instance_id", "player", "value", "base_value", "method", "n_permutations"])?;
    for a in attributions {
        let perms = a.n_permutations.map(|n| n.to_string()).unwrap_or_default();
        for (player, value) in structure.players.iter().zip(&a.values) {
            out.write_record([
                a.instance.to_string(),
                player.name.clone(),
                value.to_string(),
                a.base_value.to_string(),
                a.method.as_str().to_string(),
                perms.clone(),
            ])?;
        }
    }
    finish(out)
}

pub fn write_summary_csv<W: Write>(w: W, summary: &[PlayerSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["player", "mean_abs", "std"])?;
    for s in summary {
        out.write_record([s.player.clone(), s.mean_abs.to_string(), s.std.to_string()])?;
    }
    finish(out)
}

pub fn write_bins_csv<W: Write>(w: W, bins: &[BinDistribution]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_name", "instance_id", "value", "label"])?;
    for b in bins {
        let name = b.bin.name();
        for p in &b.points {
            out.write_record([name.clone(), p.instance.to_string(), p.value.to_string(), p.label.to_string()])?;
        }
    }
    finish(out)
}
