use std::collections::BTreeMap;

use proptest::prelude::*;

use awe_core::data::{generate_synthetic, simulate_utd_pairs, SyntheticConfig};
use awe_core::objectives::{
    build_contrastive_batches, build_pk_batches, contrastive_loss, cosine_distance,
    pair_components, triplet_loss_batch_hard, ClaimSource, ContrastiveHyper, TripletHyper,
    TypeSource,
};

fn embeddings(max_items: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6).prop_flat_map(move |dim| {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), 4..=max_items)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The loss is zero exactly when every anchor's farthest positive sits at
    /// least a margin closer than its nearest negative.
    #[test]
    fn triplet_zero_iff_every_anchor_is_satisfied(embs in embeddings(10), margin in 0.0f64..0.5) {
        let labels: Vec<usize> = (0..embs.len()).map(|i| i % 2).collect();
        let hyper = TripletHyper { margin };
        let loss: f64 = triplet_loss_batch_hard(&embs, &labels, &hyper).unwrap();
        let mut satisfied = true;
        let mut brute = 0.0;
        for a in 0..embs.len() {
            let (mut far_pos, mut near_neg) = (f64::NEG_INFINITY, f64::INFINITY);
            for b in 0..embs.len() {
                if a == b {
                    continue;
                }
                let d = cosine_distance(&embs[a], &embs[b]);
                if labels[a] == labels[b] {
                    far_pos = far_pos.max(d);
                } else {
                    near_neg = near_neg.min(d);
                }
            }
            let term = (margin + far_pos - near_neg).max(0.0);
            satisfied &= term == 0.0;
            brute += term;
        }
        prop_assert!((loss - brute / embs.len() as f64).abs() < 1e-12);
        prop_assert_eq!(loss == 0.0, satisfied);
    }

    /// Pairs contribute additively, so their order in the batch is irrelevant.
    #[test]
    fn contrastive_is_invariant_to_pair_order(embs in embeddings(12), tau in 0.05f64..2.0, rot in 0usize..6) {
        let n = embs.len() / 2;
        prop_assume!(n >= 2);
        let embs = &embs[..2 * n];
        let hyper = ContrastiveHyper { temperature: tau, pairs_per_batch: n, symmetrize: false };
        let base: f64 = contrastive_loss(embs, &hyper).unwrap();
        let mut pairs: Vec<&[Vec<f64>]> = embs.chunks(2).collect();
        pairs.rotate_left(rot % n);
        let reordered: Vec<Vec<f64>> = pairs.concat();
        let moved: f64 = contrastive_loss(&reordered, &hyper).unwrap();
        prop_assert!((base - moved).abs() < 1e-9 * base.abs().max(1.0));
        prop_assert!(base >= 0.0);
    }
}

#[test]
fn samplers_over_discovered_pairs_respect_components() {
    let store = generate_synthetic(&SyntheticConfig {
        n_word_types: 10,
        n_speakers: 3,
        instances_per_type_per_speaker: 2,
        template_length_range: (5, 8),
        feature_dim: 3,
        seed: 8,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let pairs = simulate_utd_pairs(&store, 30, 0.8, 8).unwrap();
    let resolved = pairs.resolve(&store).unwrap();
    let components = pair_components(store.len(), &resolved);

    let sampler = build_pk_batches(TypeSource::Pairs(&store, &pairs), 3, 2, 1).unwrap();
    for epoch in 0..3 {
        for batch in sampler.epoch(epoch) {
            assert_eq!(batch.segments.len(), 6);
            let mut per_type: BTreeMap<usize, usize> = BTreeMap::new();
            for (&seg, &ty) in batch.segments.iter().zip(&batch.types) {
                assert_eq!(components[seg], Some(ty));
                *per_type.entry(ty).or_default() += 1;
            }
            assert_eq!(per_type.len(), 3);
            assert!(per_type.values().all(|&k| k == 2));
        }
    }

    let contrastive = build_contrastive_batches(&store, &pairs, ClaimSource::PairGraph, 4, 1).unwrap();
    for batch in contrastive.epoch(0) {
        assert_eq!(batch.pairs.len(), 4);
        let mut seen = Vec::new();
        for &(a, b) in &batch.pairs {
            assert_eq!(components[a], components[b]);
            assert!(!seen.contains(&components[a]), "component repeated within a batch");
            seen.push(components[a]);
        }
    }
}
