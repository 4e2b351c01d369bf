//! Byte accounting for model transfers.

use serde::{Deserialize, Serialize};

pub const BYTES_PER_GB: f64 = 1024.0 * 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CostStrategy {
    /// Only the sampled clients download the global model and upload theirs.
    #[default]
    SelectedOnly,
    /// Every client downloads the global model; only sampled clients upload.
    BroadcastAll,
}

impl CostStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            CostStrategy::SelectedOnly => "selected-only",
            CostStrategy::BroadcastAll => "broadcast-all",
        }
    }

    /// `(upload, download)` bytes for one round.
    pub fn round_bytes(self, model_bytes: u64, clients_per_round: usize, total_clients: usize) -> RoundBytes {
        let up = clients_per_round as u64 * model_bytes;
        let down = match self {
            CostStrategy::SelectedOnly => up,
            CostStrategy::BroadcastAll => total_clients as u64 * model_bytes,
        };
        RoundBytes { up, down }
    }

    /// Whether a silo downloads the model in a round it may or may not train in.
    pub fn downloads(self, participating: bool) -> bool {
        participating || self == CostStrategy::BroadcastAll
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoundBytes {
    pub up: u64,
    pub down: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommLedger {
    pub strategy: CostStrategy,
    pub model_bytes: u64,
    pub clients_per_round: usize,
    pub total_clients: usize,
    pub rounds: Vec<RoundBytes>,
}

impl CommLedger {
    pub fn new(
        strategy: CostStrategy,
        model_bytes: u64,
        clients_per_round: usize,
        total_clients: usize,
    ) -> Self {
        CommLedger {
            strategy,
            model_bytes,
            clients_per_round,
            total_clients,
            rounds: Vec::new(),
        }
    }

    /// A ledger for `n_rounds` rounds without running any training.
    pub fn projected(
        strategy: CostStrategy,
        model_bytes: u64,
        clients_per_round: usize,
        total_clients: usize,
        n_rounds: usize,
    ) -> Self {
        let mut ledger = Self::new(strategy, model_bytes, clients_per_round, total_clients);
        for _ in 0..n_rounds {
            ledger.record_round();
        }
        ledger
    }

    pub fn record_round(&mut self) -> RoundBytes {
        let bytes = self
            .strategy
            .round_bytes(self.model_bytes, self.clients_per_round, self.total_clients);
        self.rounds.push(bytes);
        bytes
    }

    pub fn total_up(&self) -> u64 {
        self.rounds.iter().map(|r| r.up).sum()
    }

    pub fn total_down(&self) -> u64 {
        self.rounds.iter().map(|r| r.down).sum()
    }

    pub fn summary(&self) -> LedgerSummary {
        let cost = total_cost(self);
        LedgerSummary {
            strategy: self.strategy,
            model_bytes: self.model_bytes,
            rounds: self.rounds.len(),
            clients_per_round: self.clients_per_round,
            total_clients: self.total_clients,
            bytes_up: self.total_up(),
            bytes_down: self.total_down(),
            total_bytes: cost.bytes,
            total_gb: cost.gb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostSummary {
    pub bytes: u64,
    /// `bytes / 1024^3`.
    pub gb: f64,
}

pub fn total_cost(ledger: &CommLedger) -> CostSummary {
    let bytes = ledger.total_up() + ledger.total_down();
    CostSummary {
        bytes,
        gb: bytes as f64 / BYTES_PER_GB,
    }
}

/// The JSON document written next to a federated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerSummary {
    pub strategy: CostStrategy,
    pub model_bytes: u64,
    pub rounds: usize,
    pub clients_per_round: usize,
    pub total_clients: usize,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub total_bytes: u64,
    pub total_gb: f64,
}
