use serde::{Deserialize, Serialize};

use super::game::Attribution;
use super::structure::GroupStructure;
use crate::dataset::{Code, EncodedDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerSummary {
    pub player: String,
    pub mean_abs: f64,
    /// Population standard deviation of the signed values.
    pub std: f64,
}

pub fn summarize_attributions(structure: &GroupStructure, attributions: &[Attribution]) -> Result<Vec<PlayerSummary>> {
    if attributions.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = structure.len();
    if let Some(a) = attributions.iter().find(|a| a.values.len() != n) {
        return Err(Error::shape(
            format!("{n} players"),
            format!("{} values for instance {}", a.values.len(), a.instance),
        ));
    }
    let count = attributions.len() as f64;
    Ok(structure
        .players
        .iter()
        .enumerate()
        .map(|(p, player)| {
            let mean_abs = attributions.iter().map(|a| a.values[p].abs()).sum::<f64>() / count;
            let mean = attributions.iter().map(|a| a.values[p]).sum::<f64>() / count;
            let var = attributions.iter().map(|a| (a.values[p] - mean).powi(2)).sum::<f64>() / count;
            PlayerSummary {
                player: player.name.clone(),
                mean_abs,
                std: var.sqrt(),
            }
        })
        .collect())
}

/// One category of one player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub player: String,
    pub code: Code,
}

impl BinSpec {
    pub fn name(&self) -> String {
        format!("{}={}", self.player, self.code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinPoint {
    pub instance: usize,
    pub value: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinDistribution {
    pub bin: BinSpec,
    pub points: Vec<BinPoint>,
    /// No positive instance fell in the bin.
    pub no_positives: bool,
}

/// For each bin, the attributions of the player over the instances whose
/// category (in the player's first feature) is the bin's code, tagged with
/// the true label.
pub fn bin_distributions(
    structure: &GroupStructure,
    attributions: &[Attribution],
    ds: &EncodedDataset,
    bins: &[BinSpec],
) -> Result<Vec<BinDistribution>> {
    bins.iter()
        .map(|bin| {
            let p = structure
                .player(&bin.player)
                .ok_or_else(|| Error::Reference(format!("unknown player {}", bin.player)))?;
            let span = &ds.spans[structure.players[p].spans[0]];
            let pos = span
                .position(bin.code)
                .ok_or_else(|| Error::Reference(format!("{} has no category {}", span.name, bin.code)))?;
            let mut points = Vec::new();
            for a in attributions {
                if a.instance >= ds.len() {
                    return Err(Error::Reference(format!("instance {} outside the dataset", a.instance)));
                }
                if ds.design[[a.instance, span.start + pos]] == 1.0 {
                    points.push(BinPoint {
                        instance: a.instance,
                        value: a.values[p],
                        label: ds.labels[a.instance],
                    });
                }
            }
            Ok(BinDistribution {
                bin: bin.clone(),
                no_positives: !points.iter().any(|pt| pt.label == 1),
                points,
            })
        })
        .collect()
}
