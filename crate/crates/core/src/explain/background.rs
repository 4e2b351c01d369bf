use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;

use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::nn::{predict, ModelParams};
use crate::seed::rng_for;

pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

/// Reference rows that stand in for absent players.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    pub rows: Array2<f64>,
    /// Dataset row indices the rows were drawn from, when known.
    pub indices: Vec<usize>,
    pub seed: u64,
}

impl BackgroundSet {
    /// `size` distinct rows of `ds`, drawn uniformly by `seed` (all rows when
    /// the dataset is smaller).
    pub fn sample(ds: &EncodedDataset, size: usize, seed: u64) -> Result<Self> {
        if size == 0 || ds.is_empty() {
            return Err(Error::Config("background set needs at least one row".into()));
        }
        let picked = sample_rows(ds.len(), size, seed);
        Ok(BackgroundSet {
            rows: ds.rows(&picked),
            indices: picked,
            seed,
        })
    }

    pub fn from_rows(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Config("background set needs at least one row".into()));
        }
        Ok(BackgroundSet {
            indices: Vec::new(),
            rows,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }
}

/// `k` distinct indices in `0..n` (all of them when `k >= n`), ascending.
pub fn sample_rows(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut picked = index::sample(&mut rng_for(seed, "rows", 0), n, k.min(n)).into_vec();
    picked.sort_unstable();
    picked
}

/// Anything that maps a batch of encoded rows to scalar outputs.
pub trait Predictor: Sync {
    fn input_width(&self) -> usize;
    fn predict_rows(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>>;
}

impl Predictor for ModelParams {
    fn input_width(&self) -> usize {
        self.layout.input_dim
    }

    fn predict_rows(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        predict(self, rows)
    }
}

/// `bias + weights · x`, unsquashed. Its attributions have a closed form,
/// which makes it the reference model for checking the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Predictor for LinearModel {
    fn input_width(&self) -> usize {
        self.weights.len()
    }

    fn predict_rows(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        if rows.ncols() != self.weights.len() {
            return Err(Error::shape(
                format!("{} columns", self.weights.len()),
                format!("{} columns", rows.ncols()),
            ));
        }
        Ok(rows
            .axis_iter(Axis(0))
            .map(|r| self.bias + r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}
