//! Fixtures shared by the benchmarks.

use ndarray::{s, Array2};
use silofed::dataset::{encode, generate_synthetic, split_and_partition, RawSurveyTable, SplitPartition, SynthesisConfig};
use silofed::seed::derive_seed;
use silofed::explain::{BackgroundSet, GroupStructure};
use silofed::federation::ClientUpdate;
use silofed::nn::{init_model, HighwayNetConfig, ModelParams};

/// Default synthetic survey at reduced size, split 80/20.
pub fn survey(rows_per_silo: usize) -> SplitPartition {
    let config = SynthesisConfig {
        rows_per_silo,
        ..Default::default()
    };
    let schema = config.schema();
    let rows = generate_synthetic(&config, 1).expect("valid synthesis");
    let ds = encode(&RawSurveyTable::filter(rows, &schema), &schema);
    split_and_partition(&ds, 0.8, 1).expect("valid split")
}

/// The default highway net over `input_dim` inputs.
pub fn default_model(input_dim: usize) -> ModelParams {
    let config = HighwayNetConfig {
        input_dim,
        init_seed: 1,
        ..Default::default()
    };
    init_model(&config).expect("valid net")
}

/// The first `rows` training rows and labels.
pub fn batch(data: &SplitPartition, rows: usize) -> (Array2<f64>, Vec<u8>) {
    let rows = rows.min(data.train.len());
    (
        data.train.design.slice(s![..rows, ..]).to_owned(),
        data.train.labels[..rows].to_vec(),
    )
}

/// `n` perturbed copies of `base`, as a round's client updates.
pub fn client_updates(base: &ModelParams, n: usize) -> Vec<ClientUpdate> {
    (0..n)
        .map(|i| {
            let shift = (derive_seed(7, "bench", i as u64) % 1000) as f64 * 1e-6;
            let values = base.values.iter().map(|v| v + shift).collect();
            ClientUpdate {
                silo: i as u32 + 1,
                params: ModelParams::new(base.layout.clone(), values).expect("same layout"),
                example_count: 300 + 17 * i,
            }
        })
        .collect()
}

/// Twelve-player view structure and a background sample from the training split.
pub fn explain_setup(data: &SplitPartition, background: usize) -> (GroupStructure, BackgroundSet) {
    let structure = GroupStructure::with_views(&data.test, "gender_age").expect("views present");
    let background = BackgroundSet::sample(&data.train, background, 3).expect("enough rows");
    (structure, background)
}
