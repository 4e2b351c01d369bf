use serde::{Deserialize, Serialize};

use super::ledger::CostStrategy;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::nn::HighwayNetConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FedConfig {
    pub n_rounds: usize,
    pub clients_per_round: usize,
    pub total_clients: usize,
    pub cost_strategy: CostStrategy,
    /// Class-weight factor for federated and local-baseline training.
    pub gamma: f64,
    /// Class-weight factor for the pooled (centralized) baseline.
    pub gamma_centralized: f64,
    /// When false every run trains with `pos_weight = 1`.
    pub class_weighting: bool,
    pub seed: u64,
    pub net: HighwayNetConfig,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub threshold: f64,
    /// Share of each baseline's training rows held out for early stopping.
    pub validation_fraction: f64,
    pub local_baseline_epochs: usize,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            n_rounds: 200,
            clients_per_round: 12,
            total_clients: 51,
            cost_strategy: CostStrategy::SelectedOnly,
            gamma: 1.1835,
            gamma_centralized: 1.182,
            class_weighting: true,
            seed: 0,
            net: HighwayNetConfig::default(),
            local_epochs: 1,
            batch_size: 32,
            threshold: DEFAULT_THRESHOLD,
            validation_fraction: 0.1,
            local_baseline_epochs: 20,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_rounds == 0 {
            return bad("n_rounds must be at least 1".into());
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.total_clients {
            return bad(format!(
                "clients_per_round {} must lie in 1..={}",
                self.clients_per_round, self.total_clients
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0, 1)", self.threshold));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)".into());
        }
        if !(self.gamma > 0.0 && self.gamma_centralized > 0.0) {
            return bad("class-weight factors must be positive".into());
        }
        Ok(())
    }
}
