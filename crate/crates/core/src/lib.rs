//! Acoustic word embeddings for zero-resource speech.
//!
//! Variable-length feature sequences are mapped to fixed-dimensional vectors by a
//! stacked GRU encoder. Three training objectives are provided (correspondence
//! reconstruction, batch-hard triplet, temperature-scaled contrastive), each usable
//! with ground-truth word pairs, discovered (noisy) pairs, pooled multilingual data,
//! or for unsupervised adaptation of a pretrained model.
//!
//! Embeddings are evaluated with cross-speaker same-different average precision, a
//! DTW baseline on the raw features, and a linear speaker-identity probe.

pub mod data;
pub mod eval;
pub mod model;
pub mod objectives;
pub mod training;

pub use data::{FeatureSegment, Frames, PairList, SegmentStore};
pub use model::{Checkpoint, ModelConfig, Parameters};
pub use objectives::Objective;
