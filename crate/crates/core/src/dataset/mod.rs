//! Survey data: schema, loading and filtering, one-hot encoding, per-silo
//! splitting, class weighting and a synthetic generator.

mod encode;
mod schema;
mod split;
mod synth;
mod table;

pub use encode::{encode, DerivedSpan, EncodedDataset, FeatureSpan};
pub use schema::{Code, DerivedView, FeatureColumn, SiloColumn, SurveySchema, TargetColumn};
pub use split::{split_and_partition, SplitPartition};
pub use synth::{
    gender_age_views, generate_synthetic, SynthFeature, SynthesisConfig, TARGET_DONT_KNOW,
    TARGET_NEGATIVE, TARGET_POSITIVE, TARGET_PREFER_NOT,
};
pub use table::{load_and_filter, read_and_filter, write_csv, FilterReport, RawSurveyTable};

use crate::error::{Error, Result};

/// Positive-class loss weight: the inverse class-frequency ratio scaled by `gamma`.
pub fn compute_class_weight(n_pos: usize, n_neg: usize, gamma: f64) -> Result<f64> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateClass { n_pos, n_neg });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("class-weight factor {gamma} must be positive")));
    }
    Ok(n_neg as f64 / n_pos as f64 * gamma)
}
