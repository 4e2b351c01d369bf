//! Highway-network binary classifier with hand-derived gradients.

mod adam;
mod config;
mod loss;
mod model;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use config::{Architecture, HighwayNetConfig, LEAKY_SLOPE};
pub use loss::weighted_bce_loss;
pub use model::{backward, block_outputs, forward, predict, projected_input, ForwardCache};
pub use params::{
    init_model, param_byte_size, serialized_len, ModelLayout, ModelParams, TensorRole,
    TensorSpec, FORMAT_VERSION, HEADER_LEN, MAGIC,
};
pub use train::{train_local, train_local_observed, TrainOptions, TrainStats, Trainer};

