use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, SegmentStore};

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    /// (train, dev, test); must sum to 1.
    pub fractions: [f64; 3],
    /// When set, every speaker lands in exactly one split.
    pub speaker_disjoint: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(DataError::InvalidConfig("split fractions must lie in [0, 1]".into()));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidConfig(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Partitions `store` into (train, dev, test). Segments keep their original order
/// inside each part.
pub fn split(
    store: &SegmentStore,
    spec: &SplitSpec,
) -> Result<(SegmentStore, SegmentStore, SegmentStore), DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assignment = vec![0usize; store.len()];

    if spec.speaker_disjoint {
        let mut speakers: Vec<&str> = store.speakers().into_iter().collect();
        if speakers.len() < 3 {
            return Err(DataError::TooFewSpeakers(speakers.len()));
        }
        speakers.shuffle(&mut rng);
        let counts = apportion(speakers.len(), &spec.fractions);
        let mut part_of = std::collections::HashMap::new();
        let mut cursor = 0;
        for (part, &n) in counts.iter().enumerate() {
            for spk in &speakers[cursor..cursor + n] {
                part_of.insert(*spk, part);
            }
            cursor += n;
        }
        for (slot, seg) in assignment.iter_mut().zip(store) {
            *slot = part_of[seg.speaker_id.as_str()];
        }
    } else {
        let mut order: Vec<usize> = (0..store.len()).collect();
        order.shuffle(&mut rng);
        let counts = apportion(store.len(), &spec.fractions);
        let mut cursor = 0;
        for (part, &n) in counts.iter().enumerate() {
            for &i in &order[cursor..cursor + n] {
                assignment[i] = part;
            }
            cursor += n;
        }
    }

    let pick = |part: usize| -> Vec<usize> {
        (0..store.len()).filter(|&i| assignment[i] == part).collect()
    };
    Ok((
        store.subset(&pick(0)),
        store.subset(&pick(1)),
        store.subset(&pick(2)),
    ))
}

/// Largest-remainder allocation of `n` items to the given fractions.
/// Splits `n` items by `fractions` (summing to 1) with largest-remainder rounding;
/// ties go to the earlier slot and zero fractions never receive items.
pub(crate) fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = vec![0usize; fractions.len()];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..fractions.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().cycle() {
        if left == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}
