use std::collections::{BTreeSet, HashMap};

use super::DataError;

/// A `rows × dim` block of feature frames, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Frames {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl Frames {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Self {
        assert_eq!(rows * dim, data.len(), "frame buffer does not match {rows}x{dim}");
        Self { rows, dim, data }
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self::new(rows, dim, vec![0.0; rows * dim])
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "ragged frame rows");
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    /// Number of frames (T).
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Width of each frame (D).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f32] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        // chunks_exact(0) panics; a zero-width block has no meaningful rows anyway.
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-dimension mean over frames.
    pub fn mean_frame(&self) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.dim];
        for row in self.iter_rows() {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v as f64;
            }
        }
        let n = self.rows.max(1) as f64;
        acc.into_iter().map(|a| (a / n) as f32).collect()
    }
}

/// One isolated word segment with its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSegment {
    pub id: String,
    pub frames: Frames,
    /// `None` for unlabeled (discovered or zero-resource) data.
    pub word_label: Option<String>,
    pub speaker_id: String,
    pub language_id: String,
}

/// An ordered collection of segments sharing one feature dimension, indexed by id.
#[derive(Clone, Debug)]
pub struct SegmentStore {
    feature_dim: usize,
    segments: Vec<FeatureSegment>,
    index: HashMap<String, usize>,
}

impl PartialEq for SegmentStore {
    fn eq(&self, other: &Self) -> bool {
        self.feature_dim == other.feature_dim && self.segments == other.segments
    }
}

impl SegmentStore {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            segments: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_segments(
        feature_dim: usize,
        segments: impl IntoIterator<Item = FeatureSegment>,
    ) -> Result<Self, DataError> {
        let mut store = Self::new(feature_dim);
        for seg in segments {
            store.push(seg)?;
        }
        Ok(store)
    }

    /// Appends a segment after validating width, length, finiteness and id uniqueness.
    pub fn push(&mut self, segment: FeatureSegment) -> Result<(), DataError> {
        if segment.frames.dim() != self.feature_dim {
            return Err(DataError::DimensionMismatch {
                id: segment.id,
                expected: self.feature_dim,
                found: segment.frames.dim(),
                record: None,
            });
        }
        if segment.frames.is_empty() {
            return Err(DataError::EmptySegment(segment.id));
        }
        if !segment.frames.is_finite() {
            return Err(DataError::NonFinite(segment.id));
        }
        if self.index.contains_key(&segment.id) {
            return Err(DataError::DuplicateId {
                id: segment.id,
                record: None,
            });
        }
        self.index.insert(segment.id.clone(), self.segments.len());
        self.segments.push(segment);
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[FeatureSegment] {
        &self.segments
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FeatureSegment> {
        self.segments.iter()
    }

    pub fn get(&self, id: &str) -> Option<&FeatureSegment> {
        self.index.get(id).map(|&i| &self.segments[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_labeled(&self) -> bool {
        self.segments.iter().all(|s| s.word_label.is_some())
    }

    /// First segment lacking a word label, if any.
    pub fn require_labels(&self) -> Result<(), DataError> {
        match self.segments.iter().find(|s| s.word_label.is_none()) {
            Some(s) => Err(DataError::Unlabeled(s.id.clone())),
            None => Ok(()),
        }
    }

    pub fn speakers(&self) -> BTreeSet<&str> {
        self.segments.iter().map(|s| s.speaker_id.as_str()).collect()
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.segments.iter().map(|s| s.language_id.as_str()).collect()
    }

    /// A copy with every word label removed; the view handed to unsupervised training.
    pub fn without_labels(&self) -> SegmentStore {
        let mut out = self.clone();
        for seg in &mut out.segments {
            seg.word_label = None;
        }
        out
    }

    /// Keeps the segments whose positions are listed, in the listed order.
    pub fn subset(&self, positions: &[usize]) -> SegmentStore {
        let mut out = SegmentStore::new(self.feature_dim);
        for &i in positions {
            out.index.insert(self.segments[i].id.clone(), out.segments.len());
            out.segments.push(self.segments[i].clone());
        }
        out
    }

    /// Concatenates stores with a shared feature dimension; ids must stay unique.
    pub fn concat(stores: &[&SegmentStore]) -> Result<SegmentStore, DataError> {
        let dim = stores.first().map_or(0, |s| s.feature_dim);
        let mut out = SegmentStore::new(dim);
        for store in stores {
            for seg in store.iter() {
                out.push(seg.clone())?;
            }
        }
        Ok(out)
    }
}

impl<'a> IntoIterator for &'a SegmentStore {
    type Item = &'a FeatureSegment;
    type IntoIter = std::slice::Iter<'a, FeatureSegment>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.iter()
    }
}
