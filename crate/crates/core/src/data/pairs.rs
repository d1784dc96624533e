use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, SegmentStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairProvenance {
    GroundTruth,
    SimulatedUtd,
    ExternalFile,
}

impl fmt::Display for PairProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GroundTruth => "ground_truth",
            Self::SimulatedUtd => "simulated_utd",
            Self::ExternalFile => "external_file",
        })
    }
}

impl FromStr for PairProvenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ground_truth" => Ok(Self::GroundTruth),
            "simulated_utd" => Ok(Self::SimulatedUtd),
            "external_file" => Ok(Self::ExternalFile),
            other => Err(format!("unknown pair provenance `{other}`")),
        }
    }
}

/// Positive segment pairs: the only supervision the pair-driven objectives see.
#[derive(Clone, Debug, PartialEq)]
pub struct PairList {
    pub pairs: Vec<(String, String)>,
    pub provenance: PairProvenance,
    pub claimed_precision: Option<f64>,
}

impl PairList {
    pub fn new(pairs: Vec<(String, String)>, provenance: PairProvenance) -> Self {
        Self {
            pairs,
            provenance,
            claimed_precision: None,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Maps ids to store positions, rejecting unknown ids and self-pairs.
    pub fn resolve(&self, store: &SegmentStore) -> Result<Vec<(usize, usize)>, DataError> {
        self.pairs
            .iter()
            .map(|(a, b)| {
                if a == b {
                    return Err(DataError::SelfPair(a.clone()));
                }
                let ia = store.position(a).ok_or_else(|| DataError::UnknownId(a.clone()))?;
                let ib = store.position(b).ok_or_else(|| DataError::UnknownId(b.clone()))?;
                Ok((ia, ib))
            })
            .collect()
    }

    /// Fraction of pairs whose members share a word label. Audit helper; the
    /// training path never calls this.
    pub fn label_precision(&self, store: &SegmentStore) -> Result<f64, DataError> {
        let resolved = self.resolve(store)?;
        let mut same = 0usize;
        for (a, b) in &resolved {
            let la = label_of(store, *a)?;
            let lb = label_of(store, *b)?;
            same += usize::from(la == lb);
        }
        Ok(same as f64 / resolved.len().max(1) as f64)
    }
}

fn label_of(store: &SegmentStore, i: usize) -> Result<&str, DataError> {
    let seg = &store.segments()[i];
    seg.word_label
        .as_deref()
        .ok_or_else(|| DataError::Unlabeled(seg.id.clone()))
}

fn same_label_pairs(store: &SegmentStore) -> Result<Vec<(usize, usize)>, DataError> {
    store.require_labels()?;
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in store.iter().enumerate() {
        by_label.entry(s.word_label.as_deref().unwrap()).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for members in by_label.values() {
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                pairs.push((a, b));
            }
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

fn to_ids(store: &SegmentStore, pairs: &[(usize, usize)]) -> Vec<(String, String)> {
    let segs = store.segments();
    pairs
        .iter()
        .map(|&(a, b)| (segs[a].id.clone(), segs[b].id.clone()))
        .collect()
}

/// Samples same-label pairs uniformly without replacement, up to `max_pairs`
/// (`None` takes all of them).
pub fn ground_truth_pairs(
    store: &SegmentStore,
    max_pairs: Option<usize>,
    seed: u64,
) -> Result<PairList, DataError> {
    let mut pairs = same_label_pairs(store)?;
    if pairs.is_empty() {
        return Err(DataError::NoValidPair);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    if let Some(cap) = max_pairs {
        pairs.truncate(cap);
    }
    Ok(PairList {
        pairs: to_ids(store, &pairs),
        provenance: PairProvenance::GroundTruth,
        claimed_precision: Some(1.0),
    })
}

/// Stand-in for a term-discovery system: `round(precision * n_pairs)` distinct
/// same-type pairs plus distinct different-type pairs, shuffled and randomly
/// oriented. Labels are only consulted here; the returned list carries ids alone.
pub fn simulate_utd_pairs(
    store: &SegmentStore,
    n_pairs: usize,
    precision: f64,
    seed: u64,
) -> Result<PairList, DataError> {
    if !(0.0..=1.0).contains(&precision) {
        return Err(DataError::InvalidConfig(format!(
            "precision {precision} outside [0, 1]"
        )));
    }
    let same = same_label_pairs(store)?;
    let n_same = (precision * n_pairs as f64).round() as usize;
    let n_diff = n_pairs - n_same;
    if n_same > same.len() {
        return Err(DataError::InsufficientPairs {
            kind: "same-type",
            requested: n_same,
            available: same.len(),
        });
    }
    let n = store.len();
    let total = n * n.saturating_sub(1) / 2;
    let diff_available = total - same.len();
    if n_diff > diff_available {
        return Err(DataError::InsufficientPairs {
            kind: "different-type",
            requested: n_diff,
            available: diff_available,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<(usize, usize)> = index::sample(&mut rng, same.len(), n_same)
        .into_iter()
        .map(|k| same[k])
        .collect();

    let labels: Vec<&str> = store.iter().map(|s| s.word_label.as_deref().unwrap()).collect();
    if n_diff * 2 > diff_available {
        let mut diff = Vec::with_capacity(diff_available);
        for a in 0..n {
            for b in a + 1..n {
                if labels[a] != labels[b] {
                    diff.push((a, b));
                }
            }
        }
        chosen.extend(index::sample(&mut rng, diff.len(), n_diff).into_iter().map(|k| diff[k]));
    } else {
        let mut seen = HashSet::with_capacity(n_diff);
        while seen.len() < n_diff {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let key = (a.min(b), a.max(b));
            if a != b && labels[a] != labels[b] && seen.insert(key) {
                chosen.push(key);
            }
        }
    }

    chosen.shuffle(&mut rng);
    for p in &mut chosen {
        if rng.random_bool(0.5) {
            *p = (p.1, p.0);
        }
    }
    Ok(PairList {
        pairs: to_ids(store, &chosen),
        provenance: PairProvenance::SimulatedUtd,
        claimed_precision: Some(precision),
    })
}

/// Writes one `id_a<TAB>id_b` line per pair after a `#` metadata line.
pub fn save_pairs(pairs: &PairList, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = format!("# provenance={}", pairs.provenance);
    if let Some(p) = pairs.claimed_precision {
        out.push_str(&format!(" claimed_precision={p}"));
    }
    out.push('\n');
    for (a, b) in &pairs.pairs {
        out.push_str(a);
        out.push('\t');
        out.push_str(b);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a pair file. Pairs are whitespace-separated id tokens; `#` lines carry
/// optional metadata. Id resolution is deferred to [`PairList::resolve`].
pub fn load_pairs(path: impl AsRef<Path>) -> Result<PairList, DataError> {
    parse_pairs(&fs::read_to_string(path)?)
}

fn parse_pairs(text: &str) -> Result<PairList, DataError> {
    let mut list = PairList::new(Vec::new(), PairProvenance::ExternalFile);
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                let Some((k, v)) = kv.split_once('=') else { continue };
                let bad = |reason: String| DataError::PairParse { line: line_no, reason };
                match k {
                    "provenance" => list.provenance = v.parse().map_err(bad)?,
                    "claimed_precision" => {
                        list.claimed_precision = Some(
                            v.parse()
                                .map_err(|_| bad(format!("bad claimed_precision `{v}`")))?,
                        )
                    }
                    _ => {}
                }
            }
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(DataError::PairParse {
                line: line_no,
                reason: format!("expected 2 ids, found {}", tokens.len()),
            });
        }
        list.pairs.push((tokens[0].to_string(), tokens[1].to_string()));
    }
    Ok(list)
}
