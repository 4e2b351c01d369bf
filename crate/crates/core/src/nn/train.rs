use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::HighwayNetConfig;
use super::loss::weighted_bce_loss;
use super::model::{backward, forward};
use super::params::ModelParams;
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_partition, DEFAULT_THRESHOLD};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub pos_weight: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainStats {
    pub epoch_losses: Vec<f64>,
    pub best_val_f1: Option<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
}

/// Mini-batch Adam over a fixed row subset, one epoch at a time.
pub struct Trainer<'a> {
    ds: &'a EncodedDataset,
    rows: Vec<usize>,
    config: &'a HighwayNetConfig,
    opts: TrainOptions,
    params: ModelParams,
    adam: AdamState,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        params: ModelParams,
        ds: &'a EncodedDataset,
        rows: &[usize],
        config: &'a HighwayNetConfig,
        opts: TrainOptions,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("empty training subset".into()));
        }
        if opts.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(opts.pos_weight > 0.0) {
            return Err(Error::Config("pos_weight must be positive".into()));
        }
        Ok(Trainer {
            ds,
            rows: rows.to_vec(),
            config,
            adam: AdamState::new(params.len()),
            params,
            opts,
            epoch: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    /// Runs one shuffled pass; returns the row-weighted mean batch loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let mut order = self.rows.clone();
        order.shuffle(&mut rng_for(self.opts.seed, "shuffle", self.epoch as u64));
        self.epoch += 1;
        let mut total = 0.0;
        for batch in order.chunks(self.opts.batch_size) {
            let x = self.ds.rows(batch);
            let y = self.ds.labels_of(batch);
            let (probs, cache) = forward(&self.params, x.view())?;
            total += weighted_bce_loss(&probs, &y, self.opts.pos_weight)? * batch.len() as f64;
            let grad = backward(&self.params, &cache, &y, self.opts.pos_weight)?;
            adam_step(&mut self.params.values, &grad, &mut self.adam, self.config)?;
        }
        Ok(total / order.len() as f64)
    }
}

/// Trains on `train_rows` of `ds`, monitoring F1 on `val_rows` for early
/// stopping. When patience runs out, the best-F1 parameters are restored.
pub fn train_local(
    params: ModelParams,
    ds: &EncodedDataset,
    train_rows: &[usize],
    val_rows: &[usize],
    config: &HighwayNetConfig,
    opts: &TrainOptions,
) -> Result<(ModelParams, TrainStats)> {
    train_local_observed(params, ds, train_rows, val_rows, config, opts, |_, _| Ok(()))
}

/// [`train_local`] with a hook called after every epoch (1-based) with the
/// current parameters.
pub fn train_local_observed<F>(
    params: ModelParams,
    ds: &EncodedDataset,
    train_rows: &[usize],
    val_rows: &[usize],
    config: &HighwayNetConfig,
    opts: &TrainOptions,
    mut on_epoch: F,
) -> Result<(ModelParams, TrainStats)>
where
    F: FnMut(usize, &ModelParams) -> Result<()>,
{
    let mut stats = TrainStats {
        epoch_losses: Vec::with_capacity(opts.epochs),
        best_val_f1: None,
        best_epoch: None,
        stopped_early: false,
        warnings: Vec::new(),
    };
    let monitor = !val_rows.is_empty() && config.early_stop_patience > 0;
    if val_rows.is_empty() {
        stats
            .warnings
            .push("empty validation set: early stopping disabled".into());
    }
    let mut trainer = Trainer::new(params, ds, train_rows, config, opts.clone())?;
    let mut best: Option<(Option<f64>, ModelParams)> = None;
    let mut stall = 0;
    for epoch in 0..opts.epochs {
        stats.epoch_losses.push(trainer.run_epoch()?);
        on_epoch(epoch + 1, trainer.params())?;
        if !monitor {
            continue;
        }
        let f1 = evaluate_partition(trainer.params(), ds, val_rows, DEFAULT_THRESHOLD)?.f1;
        // None (undefined) ranks below every defined score.
        let improved = match &best {
            None => true,
            Some((b, _)) => f1 > *b,
        };
        if improved {
            best = Some((f1, trainer.params().clone()));
            stats.best_val_f1 = f1;
            stats.best_epoch = Some(epoch);
            stall = 0;
        } else {
            stall += 1;
            if stall >= config.early_stop_patience {
                stats.stopped_early = true;
                break;
            }
        }
    }
    let params = match best {
        Some((_, p)) if stats.stopped_early => p,
        _ => trainer.into_params(),
    };
    Ok((params, stats))
}
