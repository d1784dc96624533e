//! Training objectives and the batch samplers that feed them.

mod batches;
mod losses;
mod similarity;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;

pub(crate) use batches::epoch_seed;
pub use batches::{
    build_contrastive_batches, build_pk_batches, label_types, pair_components, ClaimSource,
    ContrastiveBatch, ContrastiveSampler, PkBatch, PkSampler, TypeSource,
};
pub use losses::{
    ae_loss, cae_loss, contrastive_batch_loss, contrastive_loss, contrastive_loss_with_grad,
    reconstruction_batch_loss, triplet_batch_loss, triplet_loss_batch_hard,
    triplet_loss_batch_hard_with_grad,
};
pub use similarity::{cosine_distance, cosine_similarity, cosine_similarity_grad};

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("label {0} has a single instance in the batch; batch-hard mining needs a positive")]
    SingletonLabel(String),
    #[error("batch holds a single label; batch-hard mining needs a negative")]
    SingleLabel,
    #[error("contrastive batch needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("contrastive batch must hold an even number of embeddings, got {0}")]
    OddBatch(usize),
    #[error("batch embeddings and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("need {needed} types with at least {per_type} instances, found {found}")]
    InsufficientInstances {
        needed: usize,
        per_type: usize,
        found: usize,
    },
    #[error("need {needed} pairs over distinct claimed types, found {found} distinct types")]
    TooFewTypes { needed: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Plain autoencoder reconstruction (the pretraining stage of `Cae`).
    Ae,
    /// Correspondence autoencoder: reconstruct the paired segment.
    Cae,
    /// Cosine triplet loss with online batch-hard mining.
    Triplet,
    /// Temperature-scaled softmax over in-batch negatives.
    Contrastive,
}

impl Objective {
    pub fn needs_decoder(self) -> bool {
        matches!(self, Self::Ae | Self::Cae)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ae => "ae",
            Self::Cae => "cae",
            Self::Triplet => "triplet",
            Self::Contrastive => "contrastive",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ae" => Ok(Self::Ae),
            "cae" => Ok(Self::Cae),
            "triplet" | "siamese" => Ok(Self::Triplet),
            "contrastive" => Ok(Self::Contrastive),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripletHyper {
    pub margin: f64,
}

impl Default for TripletHyper {
    fn default() -> Self {
        Self { margin: 0.25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContrastiveHyper {
    pub temperature: f64,
    pub pairs_per_batch: usize,
    /// Add the mirrored term with the positive as anchor. Off by default.
    pub symmetrize: bool,
}

impl Default for ContrastiveHyper {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            pairs_per_batch: 16,
            symmetrize: false,
        }
    }
}
