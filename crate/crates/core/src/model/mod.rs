//! Recurrent encoder/decoder, its parameters, optimizer and checkpoints.

mod adam;
mod adaptation;
mod checkpoint;
mod gradcheck;
mod gru;
mod network;
mod params;
mod tape;
mod tensor;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use adaptation::{apply_adaptation_policy, AdaptationPolicy, PolicyKind};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, Provenance, TrainingStage, CHECKPOINT_VERSION,
};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use network::{decode, encode};
pub use params::{init_model, Affine, Decoder, GruLayer, Parameters};
pub use tape::{compute_gradients, EmbeddingId, Gradients, OutputId, Tape};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("expected width {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input sequence")]
    EmptyInput,
    #[error("model has no decoder")]
    NoDecoder,
    #[error("parameter layout mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("unsupported checkpoint format version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("adaptation policy `{policy}` cannot be applied: {reason}")]
    PolicyMismatch { policy: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CellType {
    #[default]
    Gru,
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("gru")
    }
}

impl FromStr for CellType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gru" => Ok(Self::Gru),
            other => Err(format!("unknown cell type `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub embedding_dim: usize,
    pub cell: CellType,
    /// Whether the network carries a decoder (reconstruction objectives).
    pub decoder: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    /// Full-scale architecture: three 400-unit layers, 130-dim embeddings, 13-dim input.
    fn default() -> Self {
        Self {
            feature_dim: 13,
            hidden_dim: 400,
            n_layers: 3,
            embedding_dim: 130,
            cell: CellType::Gru,
            decoder: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.feature_dim == 0 || self.hidden_dim == 0 || self.n_layers == 0 || self.embedding_dim == 0
        {
            return Err(ModelError::InvalidConfig("all dimensions must be at least 1".into()));
        }
        Ok(())
    }
}
