//! Same-different average precision, the DTW baseline, the speaker probe and
//! embedding export.

mod ap;
mod dtw;
mod embeddings;
mod probe;

use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;

pub use ap::{ap_from_distances, dtw_ap, same_different_ap, APResult, PairItem};
pub use dtw::dtw_distance;
pub use embeddings::{
    embed_all, export_embeddings, load_embeddings, mean_pooled_features, EmbeddingEntry,
    EmbeddingSet,
};
pub use probe::{probe_split, speaker_probe, ProbeConfig, ProbeResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 segments, got {0}")]
    TooFewSegments(usize),
    #[error("no positive pair under the {} regime", if *.cross_speaker { "cross-speaker" } else { "same-word" })]
    NoPositivePairs { cross_speaker: bool },
    #[error("segment `{0}` has no word label")]
    Unlabeled(String),
    #[error("sequence widths differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("empty sequence")]
    EmptySequence,
    #[error("embedding `{id}` has width {found}, expected {expected}")]
    WidthMismatch { id: String, expected: usize, found: usize },
    #[error("duplicate embedding id `{0}`")]
    DuplicateId(String),
    #[error("speaker probe needs at least 2 speakers, found {0}")]
    TooFewSpeakers(usize),
    #[error("invalid probe configuration: {0}")]
    InvalidProbeConfig(String),
    #[error("embedding file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
