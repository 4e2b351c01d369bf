use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub silo: u32,
    pub params: ModelParams,
    pub example_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UpdateSummary {
    pub silo: u32,
    pub example_count: usize,
}

/// Example-count weighted mean of the client parameter vectors.
///
/// Updates are combined in silo order, so the result does not depend on the
/// order in which clients finished.
pub fn fedavg_aggregate(updates: &[ClientUpdate]) -> Result<ModelParams> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Aggregation("no client updates".into()))?;
    if let Some(u) = updates.iter().find(|u| !u.params.same_layout(&first.params)) {
        return Err(Error::Aggregation(format!(
            "silo {} sent a model with a different layout",
            u.silo
        )));
    }
    if let Some(u) = updates.iter().find(|u| u.example_count == 0) {
        return Err(Error::Aggregation(format!("silo {} reports zero examples", u.silo)));
    }
    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.silo);
    let total: usize = ordered.iter().map(|u| u.example_count).sum();
    // Accumulate offsets from the first update so identical updates
    // reproduce it bit for bit.
    let reference = &ordered[0].params.values;
    let mut values = reference.clone();
    for u in &ordered[1..] {
        let w = u.example_count as f64 / total as f64;
        for ((acc, &v), &r) in values.iter_mut().zip(&u.params.values).zip(reference) {
            *acc += w * (v - r);
        }
    }
    ModelParams::new(first.params.layout.clone(), values)
}
