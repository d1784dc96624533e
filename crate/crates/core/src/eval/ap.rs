use rayon::prelude::*;

use crate::data::SegmentStore;
use crate::objectives::cosine_distance;

use super::dtw::dtw_unchecked;
use super::{EmbeddingSet, EvalError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct APResult {
    pub ap: f64,
    pub n_positive_pairs: usize,
    pub n_total_pairs: usize,
    pub cross_speaker: bool,
}

/// Identity of one evaluation item.
#[derive(Clone, Copy, Debug)]
pub struct PairItem<'a> {
    pub id: &'a str,
    pub label: &'a str,
    pub speaker: &'a str,
}

/// `None` if the pair is left out of evaluation, else whether it is a positive.
/// Under cross-speaker scoring, same-word pairs from one speaker are excluded
/// rather than counted as negatives.
fn pair_role(a: &PairItem<'_>, b: &PairItem<'_>, cross_speaker: bool) -> Option<bool> {
    let same_word = a.label == b.label;
    let same_speaker = a.speaker == b.speaker;
    if cross_speaker && same_word && same_speaker {
        None
    } else {
        Some(same_word)
    }
}

fn ordered_ids<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Same-different AP for an arbitrary symmetric distance.
///
/// Pairs are ranked by ascending distance, ties broken by the lexicographic
/// `(smaller id, larger id)` pair; AP is the mean over positive ranks `k` of the
/// precision among the first `k` pairs.
pub fn ap_from_distances<D>(
    items: &[PairItem<'_>],
    cross_speaker: bool,
    distance: D,
) -> Result<APResult, EvalError>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    if items.len() < 2 {
        return Err(EvalError::TooFewSegments(items.len()));
    }
    let mut pairs: Vec<(usize, usize, bool)> = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if let Some(pos) = pair_role(&items[i], &items[j], cross_speaker) {
                pairs.push((i, j, pos));
            }
        }
    }
    let n_positive = pairs.iter().filter(|p| p.2).count();
    if n_positive == 0 {
        return Err(EvalError::NoPositivePairs { cross_speaker });
    }
    let mut ranked: Vec<(f64, (&str, &str), bool)> = pairs
        .par_iter()
        .map(|&(i, j, pos)| (distance(i, j), ordered_ids(items[i].id, items[j].id), pos))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut hits = 0usize;
    let mut total = 0.0f64;
    for (k, &(_, _, pos)) in ranked.iter().enumerate() {
        if pos {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(APResult {
        ap: total / n_positive as f64,
        n_positive_pairs: n_positive,
        n_total_pairs: ranked.len(),
        cross_speaker,
    })
}

fn labeled_items<'a, I>(it: I) -> Result<Vec<PairItem<'a>>, EvalError>
where
    I: Iterator<Item = (&'a str, Option<&'a str>, &'a str)>,
{
    it.map(|(id, label, speaker)| {
        let label = label.ok_or_else(|| EvalError::Unlabeled(id.to_string()))?;
        Ok(PairItem { id, label, speaker })
    })
    .collect()
}

/// AP of cosine distances between embeddings.
pub fn same_different_ap(set: &EmbeddingSet, cross_speaker: bool) -> Result<APResult, EvalError> {
    let items = labeled_items(
        set.entries()
            .iter()
            .map(|e| (e.id.as_str(), e.word_label.as_deref(), e.speaker_id.as_str())),
    )?;
    let vectors: Vec<Vec<f64>> = set
        .entries()
        .iter()
        .map(|e| e.embedding.iter().map(|&v| v as f64).collect())
        .collect();
    ap_from_distances(&items, cross_speaker, |i, j| cosine_distance(&vectors[i], &vectors[j]))
}

/// AP of DTW alignment costs on the raw feature frames.
pub fn dtw_ap(store: &SegmentStore, cross_speaker: bool) -> Result<APResult, EvalError> {
    let items = labeled_items(
        store
            .iter()
            .map(|s| (s.id.as_str(), s.word_label.as_deref(), s.speaker_id.as_str())),
    )?;
    let segs = store.segments();
    ap_from_distances(&items, cross_speaker, |i, j| {
        dtw_unchecked(&segs[i].frames, &segs[j].frames)
    })
}
