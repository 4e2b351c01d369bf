//! Flat parameter vectors, their tensor layout, initialization and the
//! binary model format.
//!
//! The serialized form is a fixed 64-byte header followed by the values as
//! little-endian `f64`:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `SILOHWN\0`                       |
//! | 8      | 4    | format version (1)                      |
//! | 12     | 4    | architecture (0 highway, 1 plain)       |
//! | 16     | 8    | input dim                               |
//! | 24     | 8    | hidden width                            |
//! | 32     | 8    | block count                             |
//! | 40     | 8    | value count                             |
//! | 48     | 8    | tensor count                            |
//! | 56     | 8    | reserved, zero                          |
//!
//! The tensor table is a pure function of the architecture fields, so the
//! header carries the dimensions and the reader rebuilds the table.

use rand::Rng;
use serde::Serialize;

use super::config::{Architecture, HighwayNetConfig};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const MAGIC: &[u8; 8] = b"SILOHWN\0";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TensorRole {
    Weight,
    /// Bias of the input projection, the head or a transform path.
    Bias,
    GateBias,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub role: TensorRole,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelLayout {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub hidden_width: usize,
    pub n_blocks: usize,
    pub tensors: Vec<TensorSpec>,
}

impl ModelLayout {
    pub fn new(
        architecture: Architecture,
        input_dim: usize,
        hidden_width: usize,
        n_blocks: usize,
    ) -> Self {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>, role: TensorRole| {
            let spec = TensorSpec {
                name,
                shape,
                offset,
                role,
            };
            offset += spec.len();
            tensors.push(spec);
        };
        let w = hidden_width;
        push("input.weight".into(), vec![input_dim, w], TensorRole::Weight);
        push("input.bias".into(), vec![w], TensorRole::Bias);
        for k in 0..n_blocks {
            push(format!("block{k}.transform.weight"), vec![w, w], TensorRole::Weight);
            push(format!("block{k}.transform.bias"), vec![w], TensorRole::Bias);
            if architecture == Architecture::Highway {
                push(format!("block{k}.gate.weight"), vec![w, w], TensorRole::Weight);
                push(format!("block{k}.gate.bias"), vec![w], TensorRole::GateBias);
            }
        }
        push("head.weight".into(), vec![w, 1], TensorRole::Weight);
        push("head.bias".into(), vec![1], TensorRole::Bias);
        ModelLayout {
            architecture,
            input_dim,
            hidden_width,
            n_blocks,
            tensors,
        }
    }

    pub fn from_config(config: &HighwayNetConfig) -> Self {
        Self::new(
            config.architecture,
            config.input_dim,
            config.hidden_width,
            config.n_blocks,
        )
    }

    pub fn total_len(&self) -> usize {
        self.tensors.last().map_or(0, |t| t.offset + t.len())
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Tensors per block (transform weight/bias, then gate weight/bias for highway).
    pub(crate) fn block_tensors(&self, block: usize) -> &[TensorSpec] {
        let per = self.tensors_per_block();
        &self.tensors[2 + block * per..2 + (block + 1) * per]
    }

    pub(crate) fn tensors_per_block(&self) -> usize {
        match self.architecture {
            Architecture::Highway => 4,
            Architecture::Plain => 2,
        }
    }

    pub(crate) fn head(&self) -> (&TensorSpec, &TensorSpec) {
        let n = self.tensors.len();
        (&self.tensors[n - 2], &self.tensors[n - 1])
    }

    pub fn matches(&self, config: &HighwayNetConfig) -> bool {
        self.architecture == config.architecture
            && self.input_dim == config.input_dim
            && self.hidden_width == config.hidden_width
            && self.n_blocks == config.n_blocks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub layout: ModelLayout,
}

impl ModelParams {
    pub fn new(layout: ModelLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::shape(
                format!("{} parameters", layout.total_len()),
                format!("{} parameters", values.len()),
            ));
        }
        Ok(ModelParams { values, layout })
    }

    pub fn zeros(layout: ModelLayout) -> Self {
        let values = vec![0.0; layout.total_len()];
        ModelParams { values, layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, spec: &TensorSpec) -> &[f64] {
        &self.values[spec.range()]
    }

    pub fn tensor_mut(&mut self, spec: &TensorSpec) -> &mut [f64] {
        let r = spec.range();
        &mut self.values[r]
    }

    pub fn named_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.layout.tensor(name)?.range();
        Some(&mut self.values[r])
    }

    pub fn same_layout(&self, other: &ModelParams) -> bool {
        self.layout == other.layout
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(serialized_len(self.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.layout.architecture.code().to_le_bytes());
        for v in [
            self.layout.input_dim,
            self.layout.hidden_width,
            self.layout.n_blocks,
            self.values.len(),
            self.layout.tensors.len(),
            0,
        ] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        debug_assert_eq!(out.len(), HEADER_LEN);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::IncompatibleModel(m.to_string());
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(bad("missing model header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()) as usize;
        if u32_at(8) != FORMAT_VERSION {
            return Err(bad("unsupported format version"));
        }
        let arch = Architecture::from_code(u32_at(12)).ok_or_else(|| bad("unknown architecture"))?;
        let layout = ModelLayout::new(arch, u64_at(16), u64_at(24), u64_at(32));
        let n = u64_at(40);
        if n != layout.total_len() || u64_at(48) != layout.tensors.len() {
            return Err(bad("tensor table does not match dimensions"));
        }
        if bytes.len() != serialized_len(n) {
            return Err(bad("truncated or oversized value section"));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ModelParams { values, layout })
    }
}

pub fn serialized_len(n_values: usize) -> usize {
    HEADER_LEN + 8 * n_values
}

/// Bytes one transfer of these parameters costs on the wire.
pub fn param_byte_size(params: &ModelParams) -> u64 {
    serialized_len(params.len()) as u64
}

/// Glorot-uniform weights, zero biases, gate biases at `gate_bias_init`.
pub fn init_model(config: &HighwayNetConfig) -> Result<ModelParams> {
    config.validate()?;
    let layout = ModelLayout::from_config(config);
    let mut values = vec![0.0; layout.total_len()];
    for (i, t) in layout.tensors.iter().enumerate() {
        let slice = &mut values[t.range()];
        match t.role {
            TensorRole::Weight => {
                let limit = (6.0 / (t.shape[0] + t.shape[1]) as f64).sqrt();
                let mut rng = rng_for(config.init_seed, "init", i as u64);
                slice
                    .iter_mut()
                    .for_each(|v| *v = rng.gen_range(-limit..=limit));
            }
            TensorRole::Bias => {}
            TensorRole::GateBias => slice.fill(config.gate_bias_init),
        }
    }
    Ok(ModelParams { values, layout })
}
