//! FedAvg orchestration with partial participation, the centralized and
//! local-only baselines, and communication accounting.

mod aggregate;
mod config;
mod export;
mod ledger;
mod runner;
mod sampling;

pub use aggregate::{fedavg_aggregate, ClientUpdate, UpdateSummary};
pub use config::FedConfig;
pub use export::{write_epochs_csv, write_local_csv, write_rounds_csv, write_silo_metrics_csv, GLOBAL_LABEL};
pub use ledger::{total_cost, CommLedger, CostStrategy, CostSummary, LedgerSummary, RoundBytes, BYTES_PER_GB};
pub use runner::{
    evaluate_split, holdout, run_centralized, run_federated, run_local_baselines, summarize_local,
    CentralizedRun, EpochRecord, Evaluation, FederatedRun, LocalBaselines, LocalResult, MacroAverage,
    RoundRecord,
};
pub use sampling::sample_clients;
