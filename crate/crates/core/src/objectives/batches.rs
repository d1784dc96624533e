//! Batch construction: P×K batches for batch-hard triplet mining and distinct-type
//! pair batches for the contrastive loss.
//!
//! Without labels, a segment's claimed type is its connected component in the
//! graph whose edges are the positive pairs.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{PairList, SegmentStore};

use super::ObjectiveError;

/// Derives the RNG seed for one epoch of a sampler.
pub(crate) fn epoch_seed(seed: u64, epoch: u64) -> u64 {
    seed ^ epoch.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Type id per store position, from `(language_id, word_label)`; ids number the
/// distinct keys in sorted order.
pub fn label_types(store: &SegmentStore) -> Result<Vec<usize>, ObjectiveError> {
    store.require_labels()?;
    let keys: Vec<(&str, &str)> = store
        .iter()
        .map(|s| (s.language_id.as_str(), s.word_label.as_deref().unwrap()))
        .collect();
    let mut ids = BTreeMap::new();
    for k in &keys {
        ids.entry(*k).or_insert(0usize);
    }
    for (n, v) in ids.values_mut().enumerate() {
        *v = n;
    }
    Ok(keys.iter().map(|k| ids[k]).collect())
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Component id per segment position for segments touched by `pairs`
/// (`None` for untouched segments). Components are numbered by their smallest
/// member position.
pub fn pair_components(n_segments: usize, pairs: &[(usize, usize)]) -> Vec<Option<usize>> {
    let mut ds = DisjointSet::new(n_segments);
    let mut touched = vec![false; n_segments];
    for &(a, b) in pairs {
        ds.union(a, b);
        touched[a] = true;
        touched[b] = true;
    }
    let mut numbering = HashMap::new();
    (0..n_segments)
        .map(|i| {
            touched[i].then(|| {
                let root = ds.find(i);
                let next = numbering.len();
                *numbering.entry(root).or_insert(next)
            })
        })
        .collect()
}

/// Where P×K batches get their type claims.
pub enum TypeSource<'a> {
    /// Ground-truth word labels.
    Labels(&'a SegmentStore),
    /// Pair-graph components; only segments that occur in a pair participate.
    Pairs(&'a SegmentStore, &'a PairList),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PkBatch {
    /// Store positions, grouped by type: `K` consecutive entries per type.
    pub segments: Vec<usize>,
    pub types: Vec<usize>,
}

/// Reusable P×K sampler. Each epoch shuffles the eligible types, groups them P at
/// a time (dropping an incomplete last group) and draws K distinct instances per
/// type.
#[derive(Clone, Debug)]
pub struct PkSampler {
    groups: Vec<(usize, Vec<usize>)>,
    p: usize,
    k: usize,
    seed: u64,
}

impl PkSampler {
    /// `assignments` holds `(store position, type id)`.
    pub fn new(
        assignments: &[(usize, usize)],
        p: usize,
        k: usize,
        seed: u64,
    ) -> Result<Self, ObjectiveError> {
        let mut by_type: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(seg, ty) in assignments {
            by_type.entry(ty).or_default().push(seg);
        }
        let groups: Vec<(usize, Vec<usize>)> = by_type
            .into_iter()
            .filter(|(_, members)| members.len() >= k)
            .collect();
        if p < 2 || k < 2 || groups.len() < p {
            return Err(ObjectiveError::InsufficientInstances {
                needed: p.max(2),
                per_type: k.max(2),
                found: groups.len(),
            });
        }
        Ok(Self { groups, p, k, seed })
    }

    pub fn eligible_types(&self) -> usize {
        self.groups.len()
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.groups.len() / self.p
    }

    pub fn epoch(&self, epoch: u64) -> Vec<PkBatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(self.seed, epoch));
        let mut order: Vec<usize> = (0..self.groups.len()).collect();
        order.shuffle(&mut rng);
        order
            .chunks_exact(self.p)
            .map(|chunk| {
                let mut batch = PkBatch {
                    segments: Vec::with_capacity(self.p * self.k),
                    types: Vec::with_capacity(self.p * self.k),
                };
                for &g in chunk {
                    let (ty, members) = &self.groups[g];
                    for pick in index::sample(&mut rng, members.len(), self.k) {
                        batch.segments.push(members[pick]);
                        batch.types.push(*ty);
                    }
                }
                batch
            })
            .collect()
    }
}

pub fn build_pk_batches(
    source: TypeSource<'_>,
    p: usize,
    k: usize,
    seed: u64,
) -> Result<PkSampler, ObjectiveError> {
    let assignments: Vec<(usize, usize)> = match source {
        TypeSource::Labels(store) => label_types(store)?.into_iter().enumerate().collect(),
        TypeSource::Pairs(store, pairs) => {
            let resolved = pairs.resolve(store)?;
            pair_components(store.len(), &resolved)
                .into_iter()
                .enumerate()
                .filter_map(|(i, c)| c.map(|c| (i, c)))
                .collect()
        }
    };
    PkSampler::new(&assignments, p, k, seed)
}

/// Where contrastive batches get the type claim of each pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClaimSource {
    /// Component of the pair graph (unsupervised).
    PairGraph,
    /// Word label of the first member (supervised).
    Labels,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveBatch {
    /// `(anchor, positive)` store positions, one per distinct claimed type.
    pub pairs: Vec<(usize, usize)>,
}

impl ContrastiveBatch {
    /// `[a_0, p_0, a_1, p_1, …]`
    pub fn flatten(&self) -> Vec<usize> {
        self.pairs.iter().flat_map(|&(a, p)| [a, p]).collect()
    }
}

/// Reusable contrastive batch builder. Each epoch visits the pairs in shuffled
/// order and places every pair into the earliest open batch that has no pair of
/// the same claimed type; a batch is emitted once it holds N pairs. Batches left
/// incomplete at the end of the epoch are dropped.
#[derive(Clone, Debug)]
pub struct ContrastiveSampler {
    pairs: Vec<(usize, usize)>,
    claims: Vec<usize>,
    n: usize,
    seed: u64,
}

impl ContrastiveSampler {
    pub fn new(
        pairs: Vec<(usize, usize)>,
        claims: Vec<usize>,
        n: usize,
        seed: u64,
    ) -> Result<Self, ObjectiveError> {
        assert_eq!(pairs.len(), claims.len());
        let distinct: HashSet<usize> = claims.iter().copied().collect();
        if n < 2 || distinct.len() < n {
            return Err(ObjectiveError::TooFewTypes {
                needed: n.max(2),
                found: distinct.len(),
            });
        }
        Ok(Self { pairs, claims, n, seed })
    }

    pub fn pairs_per_batch(&self) -> usize {
        self.n
    }

    pub fn epoch(&self, epoch: u64) -> Vec<ContrastiveBatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(self.seed, epoch));
        let mut order: Vec<usize> = (0..self.pairs.len()).collect();
        order.shuffle(&mut rng);

        let mut open: Vec<(Vec<usize>, HashSet<usize>)> = Vec::new();
        let mut done = Vec::new();
        for idx in order {
            let claim = self.claims[idx];
            let slot = open.iter().position(|(_, used)| !used.contains(&claim));
            let slot = slot.unwrap_or_else(|| {
                open.push((Vec::with_capacity(self.n), HashSet::new()));
                open.len() - 1
            });
            let (members, used) = &mut open[slot];
            members.push(idx);
            used.insert(claim);
            if members.len() == self.n {
                let (members, _) = open.remove(slot);
                done.push(ContrastiveBatch {
                    pairs: members.into_iter().map(|i| self.pairs[i]).collect(),
                });
            }
        }
        done
    }
}

pub fn build_contrastive_batches(
    store: &SegmentStore,
    pairs: &PairList,
    source: ClaimSource,
    n: usize,
    seed: u64,
) -> Result<ContrastiveSampler, ObjectiveError> {
    let resolved = pairs.resolve(store)?;
    let claims = match source {
        ClaimSource::PairGraph => {
            let comp = pair_components(store.len(), &resolved);
            resolved.iter().map(|&(a, _)| comp[a].expect("paired")).collect()
        }
        ClaimSource::Labels => {
            let types = label_types(store)?;
            resolved.iter().map(|&(a, _)| types[a]).collect()
        }
    };
    ContrastiveSampler::new(resolved, claims, n, seed)
}
