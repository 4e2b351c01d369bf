//! Shapley and Owen attributions over groups of one-hot columns.
//!
//! A player is one or more categorical features masked as a unit. The payoff
//! of a coalition is the model's mean output over background rows whose
//! coalition columns are replaced by the explained instance's.

mod background;
mod export;
mod game;
mod structure;
mod summary;

pub use background::{sample_rows, BackgroundSet, LinearModel, Predictor, DEFAULT_BACKGROUND_SIZE};
pub use export::{write_attributions_csv, write_bins_csv, write_summary_csv};
pub use game::{
    Attribution, Explainer, Method, DEFAULT_PERMUTATIONS, MAX_EXACT_OWEN_BLOCKS, MAX_EXACT_OWEN_BLOCK_SIZE,
    MAX_EXACT_SHAPLEY_PLAYERS,
};
pub use structure::{Coalition, GroupStructure, Player, MAX_PLAYERS};
pub use summary::{bin_distributions, summarize_attributions, BinDistribution, BinPoint, BinSpec, PlayerSummary};
