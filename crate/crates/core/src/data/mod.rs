//! Word-segment feature data: storage, archives, synthetic corpora, splits and pairs.

mod archive;
mod pairs;
mod segment;
mod split;
mod synth;

use thiserror::Error;

pub use archive::{load_segments, save_segments, ARCHIVE_VERSION};
pub use pairs::{
    ground_truth_pairs, load_pairs, save_pairs, simulate_utd_pairs, PairList, PairProvenance,
};
pub use segment::{FeatureSegment, Frames, SegmentStore};
pub(crate) use split::apportion;
pub use split::{split, SplitSpec};
pub use synth::{generate_synthetic, SyntheticConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("segment `{id}` has width {found}, expected {expected}{}", record_suffix(.record))]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
        record: Option<usize>,
    },
    #[error("duplicate segment id `{id}`{}", record_suffix(.record))]
    DuplicateId { id: String, record: Option<usize> },
    #[error("segment `{0}` has no frames")]
    EmptySegment(String),
    #[error("segment `{0}` contains non-finite values")]
    NonFinite(String),
    #[error("malformed archive record {record}: {reason}")]
    Malformed { record: usize, reason: String },
    #[error("malformed archive header: {0}")]
    BadHeader(String),
    #[error("unsupported archive format version {0}")]
    UnsupportedVersion(u32),
    #[error("pair file line {line}: {reason}")]
    PairParse { line: usize, reason: String },
    #[error("unknown segment id `{0}`")]
    UnknownId(String),
    #[error("pair ({0}, {0}) links a segment to itself")]
    SelfPair(String),
    #[error("segment `{0}` has no word label")]
    Unlabeled(String),
    #[error("no valid same-type pair exists in the store")]
    NoValidPair,
    #[error("requested {requested} {kind} pairs but only {available} are available")]
    InsufficientPairs {
        kind: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("speaker-disjoint split needs at least 3 speakers, found {0}")]
    TooFewSpeakers(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn record_suffix(record: &Option<usize>) -> String {
    match record {
        Some(r) => format!(" (record {r})"),
        None => String::new(),
    }
}
