#![allow(dead_code)]

use silofed::dataset::{encode, generate_synthetic, split_and_partition, RawSurveyTable, SplitPartition, SynthesisConfig};
use silofed::federation::FedConfig;
use silofed::nn::HighwayNetConfig;

pub fn small_synthesis(n_silos: u32, rows_per_silo: usize) -> SynthesisConfig {
    SynthesisConfig {
        n_silos,
        rows_per_silo,
        ..Default::default()
    }
}

pub fn split(config: &SynthesisConfig, seed: u64) -> SplitPartition {
    let schema = config.schema();
    let rows = generate_synthetic(config, seed).unwrap();
    let ds = encode(&RawSurveyTable::filter(rows, &schema), &schema);
    split_and_partition(&ds, 0.8, seed).unwrap()
}

pub fn tiny_fed(total_clients: usize, clients_per_round: usize, n_rounds: usize) -> FedConfig {
    FedConfig {
        n_rounds,
        clients_per_round,
        total_clients,
        seed: 11,
        net: HighwayNetConfig {
            hidden_width: 6,
            n_blocks: 2,
            early_stop_patience: 3,
            ..Default::default()
        },
        local_baseline_epochs: 3,
        ..Default::default()
    }
}
