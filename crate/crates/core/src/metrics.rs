//! Confusion-matrix statistics and rank-based AUC.
//!
//! Undefined quantities (0/0 ratios, AUC with an empty class) are `None`,
//! never zero.

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::nn::{predict, ModelParams};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: Self) -> Self {
        ConfusionMatrix {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Rows with `prob >= threshold` are predicted positive.
pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    if probs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if probs.len() != labels.len() {
        return Err(Error::shape(
            format!("{} labels", probs.len()),
            format!("{} labels", labels.len()),
        ));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Precision, recall and F1; any 0/0 is `None`, and F1 is `None` whenever
/// precision or recall is.
pub fn prf(cm: &ConfusionMatrix) -> (Option<f64>, Option<f64>, Option<f64>) {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    (precision, recall, f1)
}

/// Mann-Whitney AUC with average ranks on ties; `None` when a class is empty.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 || scores.len() != labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let rank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += rank * tied_pos as f64;
        i = j;
    }
    let n_pos_f = n_pos as f64;
    let u = pos_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Some(u / (n_pos_f * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub support_pos: usize,
    pub support_neg: usize,
    pub confusion: ConfusionMatrix,
}

impl MetricSet {
    pub fn from_scores(probs: &[f64], labels: &[u8], threshold: f64) -> Result<Self> {
        let cm = confusion(probs, labels, threshold)?;
        let (precision, recall, f1) = prf(&cm);
        Ok(MetricSet {
            precision,
            recall,
            f1,
            auc: auc(probs, labels),
            support_pos: cm.tp + cm.fn_,
            support_neg: cm.tn + cm.fp,
            confusion: cm,
        })
    }

    /// True when a class is missing, so recall or AUC cannot be defined.
    pub fn is_degenerate(&self) -> bool {
        self.support_pos == 0 || self.support_neg == 0
    }
}

pub fn evaluate_partition(
    params: &ModelParams,
    ds: &EncodedDataset,
    indices: &[usize],
    threshold: f64,
) -> Result<MetricSet> {
    if indices.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::Reference(format!("row {bad} outside a {}-row dataset", ds.len())));
    }
    let probs = predict(params, ds.rows(indices).view())?;
    MetricSet::from_scores(&probs, &ds.labels_of(indices), threshold)
}

/// Unweighted mean of the defined values; `None` when none are defined.
pub fn macro_average<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<f64> {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}
