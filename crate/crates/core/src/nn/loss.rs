use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-15;

/// Mean of `-[w * y * ln p + (1 - y) * ln(1 - p)]` over the batch.
pub fn weighted_bce_loss(probs: &[f64], labels: &[u8], pos_weight: f64) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if probs.len() != labels.len() {
        return Err(Error::shape(
            format!("{} labels", probs.len()),
            format!("{} labels", labels.len()),
        ));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOG_FLOOR, 1.0 - LOG_FLOOR);
            if y == 1 {
                -pos_weight * p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}
