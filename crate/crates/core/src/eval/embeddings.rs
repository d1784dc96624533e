use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::data::SegmentStore;
use crate::model::{encode, Parameters};

use super::EvalError;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingEntry {
    pub id: String,
    pub embedding: Vec<f32>,
    pub word_label: Option<String>,
    pub speaker_id: String,
}

/// Embeddings of uniform width with unique ids.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct EmbeddingSet {
    entries: Vec<EmbeddingEntry>,
    dim: Option<usize>,
    ids: HashSet<String>,
}

impl EmbeddingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = EmbeddingEntry>) -> Result<Self, EvalError> {
        let mut set = Self::new();
        for e in entries {
            set.push(e)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, entry: EmbeddingEntry) -> Result<(), EvalError> {
        let width = entry.embedding.len();
        if let Some(dim) = self.dim.filter(|&d| d != width) {
            return Err(EvalError::WidthMismatch {
                id: entry.id,
                expected: dim,
                found: width,
            });
        }
        if !self.ids.insert(entry.id.clone()) {
            return Err(EvalError::DuplicateId(entry.id));
        }
        self.dim = Some(width);
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[EmbeddingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Embedding width, `None` while empty.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// A copy with every embedding multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            for v in &mut e.embedding {
                *v *= factor;
            }
        }
        out
    }
}

/// Encodes every segment of `store`; labels are carried through for evaluation.
pub fn embed_all(params: &Parameters<f32>, store: &SegmentStore) -> Result<EmbeddingSet, EvalError> {
    let embeddings: Vec<Vec<f32>> = store
        .segments()
        .par_iter()
        .map(|s| encode(params, &s.frames))
        .collect::<Result<_, _>>()?;
    EmbeddingSet::from_entries(store.iter().zip(embeddings).map(|(s, embedding)| EmbeddingEntry {
        id: s.id.clone(),
        embedding,
        word_label: s.word_label.clone(),
        speaker_id: s.speaker_id.clone(),
    }))
}

/// Per-segment mean of the raw feature frames, a fixed-width baseline
/// representation for the speaker probe.
pub fn mean_pooled_features(store: &SegmentStore) -> EmbeddingSet {
    EmbeddingSet::from_entries(store.iter().map(|s| EmbeddingEntry {
        id: s.id.clone(),
        embedding: s.frames.mean_frame(),
        word_label: s.word_label.clone(),
        speaker_id: s.speaker_id.clone(),
    }))
    .expect("store ids are unique and widths uniform")
}

/// Writes a tab-separated table: `id word_label speaker_id e0 e1 …`, one row per
/// entry, values with 9 significant digits. Missing labels are written empty.
pub fn export_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let mut out = String::from("id\tword_label\tspeaker_id");
    for k in 0..set.dim().unwrap_or(0) {
        write!(out, "\te{k}").unwrap();
    }
    out.push('\n');
    for e in set.entries() {
        out.push_str(&e.id);
        out.push('\t');
        out.push_str(e.word_label.as_deref().unwrap_or(""));
        out.push('\t');
        out.push_str(&e.speaker_id);
        for v in &e.embedding {
            write!(out, "\t{v:.8e}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet, EvalError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l)
        .ok_or(EvalError::Parse { line: 1, reason: "missing header".into() })?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 3 || cols[..3] != ["id", "word_label", "speaker_id"] {
        return Err(EvalError::Parse { line: 1, reason: "unexpected header".into() });
    }
    let width = cols.len() - 3;
    let mut set = EmbeddingSet::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width + 3 {
            return Err(EvalError::Parse {
                line: i + 1,
                reason: format!("expected {} columns, found {}", width + 3, fields.len()),
            });
        }
        let embedding = fields[3..]
            .iter()
            .map(|f| f.parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EvalError::Parse { line: i + 1, reason: e.to_string() })?;
        set.push(EmbeddingEntry {
            id: fields[0].to_string(),
            word_label: (!fields[1].is_empty()).then(|| fields[1].to_string()),
            speaker_id: fields[2].to_string(),
            embedding,
        })?;
    }
    Ok(set)
}
