use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::encode::EncodedDataset;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Train/test split with each silo's rows indexed into both halves.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPartition {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    pub per_silo_train: BTreeMap<u32, Vec<usize>>,
    pub per_silo_test: BTreeMap<u32, Vec<usize>>,
    pub seed: u64,
}

impl SplitPartition {
    pub fn silos(&self) -> Vec<u32> {
        self.per_silo_train.keys().copied().collect()
    }
}

fn silo_index(silo_ids: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &s) in silo_ids.iter().enumerate() {
        map.entry(s).or_default().push(i);
    }
    map
}

/// Splits every silo independently so each contributes `round(ratio * n)`
/// training rows (clamped to leave at least one row on each side).
pub fn split_and_partition(ds: &EncodedDataset, ratio: f64, seed: u64) -> Result<SplitPartition> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (silo, mut rows) in silo_index(&ds.silo_ids) {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Partition { silo, rows: n });
        }
        rows.shuffle(&mut rng_for(seed, "split", u64::from(silo)));
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train_rows.extend_from_slice(&rows[..n_train]);
        test_rows.extend_from_slice(&rows[n_train..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    let train = ds.subset(&train_rows);
    let test = ds.subset(&test_rows);
    Ok(SplitPartition {
        per_silo_train: silo_index(&train.silo_ids),
        per_silo_test: silo_index(&test.silo_ids),
        train,
        test,
        seed,
    })
}
