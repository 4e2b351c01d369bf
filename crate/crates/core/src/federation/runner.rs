//! Federated, centralized and local-only training runs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::aggregate::{fedavg_aggregate, ClientUpdate};
use super::config::FedConfig;
use super::ledger::{CommLedger, RoundBytes};
use super::sampling::sample_clients;
use crate::dataset::{compute_class_weight, SplitPartition};
use crate::error::{Error, Result};
use crate::metrics::{macro_average, MetricSet};
use crate::nn::{
    init_model, param_byte_size, predict, train_local, train_local_observed, HighwayNetConfig,
    ModelParams, TrainOptions, TrainStats, Trainer,
};
use crate::seed::{derive_seed, rng_for};

/// Metrics on the pooled test set plus each silo's own test slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub global: MetricSet,
    pub per_silo: BTreeMap<u32, MetricSet>,
}

/// Evaluates once over the pooled test set and slices the scores per silo.
pub fn evaluate_split(params: &ModelParams, data: &SplitPartition, threshold: f64) -> Result<Evaluation> {
    let probs = predict(params, data.test.view())?;
    let global = MetricSet::from_scores(&probs, &data.test.labels, threshold)?;
    let mut per_silo = BTreeMap::new();
    for (&silo, rows) in &data.per_silo_test {
        let scores: Vec<f64> = rows.iter().map(|&i| probs[i]).collect();
        let labels = data.test.labels_of(rows);
        per_silo.insert(silo, MetricSet::from_scores(&scores, &labels, threshold)?);
    }
    Ok(Evaluation { global, per_silo })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub participants: Vec<u32>,
    pub global: MetricSet,
    pub per_silo: BTreeMap<u32, MetricSet>,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Each silo's share of the round's traffic; sums to the totals above.
    pub silo_bytes: BTreeMap<u32, RoundBytes>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedRun {
    pub params: ModelParams,
    pub history: Vec<RoundRecord>,
    pub ledger: CommLedger,
    pub pos_weight: f64,
}

fn resolved_net(data: &SplitPartition, net: &HighwayNetConfig, seed: u64) -> Result<HighwayNetConfig> {
    let mut net = net.resolved(data.train.width())?;
    if net.init_seed == 0 {
        net.init_seed = derive_seed(seed, "init", 0);
    }
    Ok(net)
}

fn pooled_weight(data: &SplitPartition, gamma: f64, enabled: bool) -> Result<f64> {
    if enabled {
        compute_class_weight(data.train.n_pos, data.train.n_neg, gamma)
    } else {
        Ok(1.0)
    }
}

fn check_silos(data: &SplitPartition, config: &FedConfig) -> Result<Vec<u32>> {
    config.validate()?;
    let silos = data.silos();
    if silos.len() != config.total_clients {
        return Err(Error::Config(format!(
            "total_clients is {} but the data has {} silos",
            config.total_clients,
            silos.len()
        )));
    }
    if let Some((silo, _)) = data.per_silo_train.iter().find(|(_, rows)| rows.is_empty()) {
        return Err(Error::Config(format!("silo {silo} has no training rows")));
    }
    Ok(silos)
}

/// FedAvg with partial participation. Selected clients start from the current
/// global model with a fresh optimizer, train `local_epochs` epochs on their
/// own rows, and are averaged by example count.
pub fn run_federated(data: &SplitPartition, config: &FedConfig) -> Result<FederatedRun> {
    let silos = check_silos(data, config)?;
    let net = resolved_net(data, &config.net, config.seed)?;
    let pos_weight = pooled_weight(data, config.gamma, config.class_weighting)?;
    let mut global = init_model(&net)?;
    let model_bytes = param_byte_size(&global);
    let mut ledger = CommLedger::new(
        config.cost_strategy,
        model_bytes,
        config.clients_per_round,
        config.total_clients,
    );
    let mut history = Vec::with_capacity(config.n_rounds);

    for round in 1..=config.n_rounds {
        let picked = sample_clients(config.total_clients, config.clients_per_round, config.seed, round);
        let participants: Vec<u32> = picked.iter().map(|&i| silos[i]).collect();
        let round_seed = derive_seed(config.seed, "round", round as u64);
        let updates = participants
            .par_iter()
            .map(|&silo| {
                let rows = &data.per_silo_train[&silo];
                let opts = TrainOptions {
                    epochs: config.local_epochs,
                    batch_size: config.batch_size,
                    pos_weight,
                    seed: derive_seed(round_seed, "client", u64::from(silo)),
                };
                let mut trainer = Trainer::new(global.clone(), &data.train, rows, &net, opts)?;
                for _ in 0..config.local_epochs {
                    trainer.run_epoch()?;
                }
                Ok(ClientUpdate {
                    silo,
                    params: trainer.into_params(),
                    example_count: rows.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        global = fedavg_aggregate(&updates)?;

        let bytes = ledger.record_round();
        let eval = evaluate_split(&global, data, config.threshold)?;
        let silo_bytes = silos
            .iter()
            .map(|&s| {
                let participating = participants.binary_search(&s).is_ok();
                let share = RoundBytes {
                    up: if participating { model_bytes } else { 0 },
                    down: if config.cost_strategy.downloads(participating) {
                        model_bytes
                    } else {
                        0
                    },
                };
                (s, share)
            })
            .collect();
        log::debug!(
            "round {round}: f1 {:?} auc {:?}",
            eval.global.f1,
            eval.global.auc
        );
        history.push(RoundRecord {
            round,
            participants,
            global: eval.global,
            per_silo: eval.per_silo,
            bytes_up: bytes.up,
            bytes_down: bytes.down,
            silo_bytes,
        });
    }
    Ok(FederatedRun {
        params: global,
        history,
        ledger,
        pos_weight,
    })
}

/// Splits `rows` into (train, validation) with `fraction` of them held out.
/// Keeps at least one training row.
pub fn holdout(rows: &[usize], fraction: f64, seed: u64, index: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut rng_for(seed, "holdout", index));
    let n_val = ((rows.len() as f64 * fraction).round() as usize).min(rows.len().saturating_sub(1));
    let mut val = shuffled.split_off(rows.len() - n_val);
    let mut train = shuffled;
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 0 is the untrained model.
    pub epoch: usize,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedRun {
    pub params: ModelParams,
    /// Test metrics of `params`, which may be an earlier epoch's weights
    /// when early stopping restored them.
    pub final_metrics: MetricSet,
    pub history: Vec<EpochRecord>,
    pub stats: TrainStats,
    pub pos_weight: f64,
}

/// The same network trained on the pooled training rows for `epochs` epochs,
/// with early stopping on a held-out slice.
pub fn run_centralized(data: &SplitPartition, config: &FedConfig, epochs: usize) -> Result<CentralizedRun> {
    config.validate()?;
    let net = resolved_net(data, &config.net, config.seed)?;
    let pos_weight = pooled_weight(data, config.gamma_centralized, config.class_weighting)?;
    let all: Vec<usize> = (0..data.train.len()).collect();
    let (train_rows, val_rows) = holdout(&all, config.validation_fraction, config.seed, u64::MAX);
    let initial = init_model(&net)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        metrics: evaluate_split(&initial, data, config.threshold)?.global,
    }];
    if epochs == 0 {
        let stats = TrainStats {
            epoch_losses: Vec::new(),
            best_val_f1: None,
            best_epoch: None,
            stopped_early: false,
            warnings: Vec::new(),
        };
        return Ok(CentralizedRun {
            final_metrics: history[0].metrics,
            params: initial,
            history,
            stats,
            pos_weight,
        });
    }
    let opts = TrainOptions {
        epochs,
        batch_size: config.batch_size,
        pos_weight,
        seed: derive_seed(config.seed, "centralized", 0),
    };
    let (params, stats) = train_local_observed(initial, &data.train, &train_rows, &val_rows, &net, &opts, |epoch, p| {
        history.push(EpochRecord {
            epoch,
            metrics: evaluate_split(p, data, config.threshold)?.global,
        });
        Ok(())
    })?;
    Ok(CentralizedRun {
        final_metrics: evaluate_split(&params, data, config.threshold)?.global,
        params,
        history,
        stats,
        pos_weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalResult {
    pub silo: u32,
    pub metrics: MetricSet,
    pub pos_weight: f64,
    /// The silo's training rows lacked a class, so it trained unweighted.
    pub degenerate_class_weight: bool,
    pub stats: TrainStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroAverage {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

impl MacroAverage {
    pub fn of<'a, I: IntoIterator<Item = &'a MetricSet> + Clone>(sets: I) -> Self {
        MacroAverage {
            precision: macro_average(sets.clone().into_iter().map(|m| m.precision)),
            recall: macro_average(sets.clone().into_iter().map(|m| m.recall)),
            f1: macro_average(sets.clone().into_iter().map(|m| m.f1)),
            auc: macro_average(sets.into_iter().map(|m| m.auc)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalBaselines {
    pub per_silo: Vec<LocalResult>,
    pub macro_average: MacroAverage,
    /// Silos whose F1 is undefined and so left out of the F1 average.
    pub excluded: Vec<u32>,
}

fn train_one_silo(
    data: &SplitPartition,
    config: &FedConfig,
    net: &HighwayNetConfig,
    silo: u32,
    epochs: usize,
) -> Result<LocalResult> {
    let rows = &data.per_silo_train[&silo];
    let labels = data.train.labels_of(rows);
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let (pos_weight, degenerate) = if !config.class_weighting {
        (1.0, false)
    } else {
        match compute_class_weight(n_pos, labels.len() - n_pos, config.gamma) {
            Ok(w) => (w, false),
            Err(Error::DegenerateClass { .. }) => (1.0, true),
            Err(e) => return Err(e),
        }
    };
    let (train_rows, val_rows) = holdout(rows, config.validation_fraction, config.seed, u64::from(silo));
    let opts = TrainOptions {
        epochs,
        batch_size: config.batch_size,
        pos_weight,
        seed: derive_seed(config.seed, "local", u64::from(silo)),
    };
    let (params, mut stats) = train_local(init_model(net)?, &data.train, &train_rows, &val_rows, net, &opts)?;
    if degenerate {
        stats
            .warnings
            .push(format!("silo {silo}: one class absent from training rows, trained unweighted"));
    }
    let test_rows = &data.per_silo_test[&silo];
    let probs = predict(&params, data.test.rows(test_rows).view())?;
    let metrics = MetricSet::from_scores(&probs, &data.test.labels_of(test_rows), config.threshold)?;
    Ok(LocalResult {
        silo,
        metrics,
        pos_weight,
        degenerate_class_weight: degenerate,
        stats,
    })
}

/// One independent model per silo, trained and tested on that silo alone.
/// Degenerate silos are reported rather than treated as errors.
pub fn run_local_baselines(data: &SplitPartition, config: &FedConfig, epochs: usize) -> Result<LocalBaselines> {
    config.validate()?;
    let net = resolved_net(data, &config.net, config.seed)?;
    let silos = data.silos();
    let per_silo = silos
        .par_iter()
        .map(|&silo| train_one_silo(data, config, &net, silo, epochs))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_local(per_silo))
}

pub fn summarize_local(per_silo: Vec<LocalResult>) -> LocalBaselines {
    let excluded = per_silo
        .iter()
        .filter(|r| r.metrics.f1.is_none())
        .map(|r| r.silo)
        .collect();
    let macro_average = MacroAverage::of(per_silo.iter().map(|r| &r.metrics));
    LocalBaselines {
        per_silo,
        macro_average,
        excluded,
    }
}
