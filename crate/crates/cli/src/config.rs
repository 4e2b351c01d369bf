//! The experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use silofed::dataset::SynthesisConfig;
use silofed::explain::{BinSpec, Method, DEFAULT_BACKGROUND_SIZE, DEFAULT_PERMUTATIONS};
use silofed::federation::FedConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Every other seed is derived from this one.
    pub seed: u64,
    pub data: DataSource,
    /// Share of each silo's rows used for training.
    pub train_ratio: f64,
    pub federation: FedConfig,
    pub explain: ExplainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            data: DataSource::Synthetic(SynthesisConfig::default()),
            train_ratio: 0.8,
            federation: FedConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SynthesisConfig),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "comma")]
    pub delimiter: char,
}

fn comma() -> char {
    ','
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    /// Derived views replace `view_source` when it has any, else `features`.
    Auto,
    /// One player per original feature.
    Features,
    /// `view_source` replaced by its derived views, grouped in one block.
    Views,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainConfig {
    pub method: Method,
    pub structure: StructureKind,
    pub view_source: String,
    /// Owen blocks as lists of player names; unnamed players stay singletons.
    pub blocks: Option<Vec<Vec<String>>>,
    /// Test rows sampled for explanation.
    pub instances: usize,
    pub background_size: usize,
    /// Sampled methods only.
    pub permutations: usize,
    /// Every category of every player when absent.
    pub bins: Option<Vec<BinSpec>>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            method: Method::OwenExact,
            structure: StructureKind::Auto,
            view_source: "gender_age".into(),
            blocks: None,
            instances: 50,
            background_size: DEFAULT_BACKGROUND_SIZE,
            permutations: DEFAULT_PERMUTATIONS,
            bins: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let DataSource::Csv(src) = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [&mut src.path, &mut src.schema] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Applies the seed override and checks cross-field constraints.
    pub fn resolve(mut self, seed: Option<u64>) -> CliResult<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if self.federation.seed != 0 && self.federation.seed != self.seed {
            log::warn!("federation.seed is replaced by the experiment seed {}", self.seed);
        }
        self.federation.seed = self.seed;
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(CliError::Config(format!("train_ratio {} outside (0, 1)", self.train_ratio)));
        }
        if let DataSource::Csv(src) = &self.data {
            if !src.delimiter.is_ascii() {
                return Err(CliError::Config("delimiter must be an ASCII character".into()));
            }
        }
        self.federation
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let ex = &self.explain;
        if ex.instances == 0 {
            return Err(CliError::Config("explain.instances must be at least 1".into()));
        }
        if ex.background_size == 0 {
            return Err(CliError::Config("explain.background_size must be at least 1".into()));
        }
        if ex.method.is_sampled() && ex.permutations == 0 {
            return Err(CliError::Config("explain.permutations must be at least 1".into()));
        }
        Ok(self)
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
