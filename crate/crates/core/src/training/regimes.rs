use std::collections::{BTreeMap, BTreeSet};

use crate::data::{apportion, ground_truth_pairs, PairList, PairProvenance, SegmentStore};
use crate::model::{
    apply_adaptation_policy, init_model, AdaptationPolicy, Checkpoint, ModelConfig, ModelError,
    Parameters, Provenance, TrainingStage,
};
use crate::objectives::{build_contrastive_batches, build_pk_batches, ClaimSource, Objective, TypeSource};

use super::fit::{stream_seed, Fitter, Plan, MAIN_STREAM, PRETRAIN_STREAM};
use super::{TrainConfig, TrainError, TrainReport};

fn model_config(config: &TrainConfig, feature_dim: usize) -> ModelConfig {
    ModelConfig {
        feature_dim,
        decoder: config.model.decoder || config.objective.needs_decoder(),
        seed: config.seed,
        ..config.model.clone()
    }
}

/// Trains `params` on `pairs` over `store`. Type claims come from word labels
/// when `supervised`, otherwise from connected components of the pair graph.
fn fit_on_pairs(
    params: Parameters<f32>,
    store: &SegmentStore,
    pairs: &PairList,
    supervised: bool,
    config: &TrainConfig,
    dev: Option<&SegmentStore>,
) -> Result<(Parameters<f32>, TrainReport), TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyPairs);
    }
    let resolved = pairs.resolve(store)?;
    let paired: Vec<usize> = resolved
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let main_seed = stream_seed(config.seed, MAIN_STREAM);
    let autoencode = |seed| Plan::Reconstruction {
        examples: paired.iter().map(|&i| (i, i)).collect(),
        seed,
    };
    let mut pretrain = None;
    let plan = match config.objective {
        Objective::Ae => autoencode(main_seed),
        Objective::Cae => {
            pretrain = Some(autoencode(stream_seed(config.seed, PRETRAIN_STREAM)));
            Plan::Reconstruction {
                examples: resolved.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect(),
                seed: main_seed,
            }
        }
        Objective::Triplet => {
            let source = if supervised {
                TypeSource::Labels(store)
            } else {
                TypeSource::Pairs(store, pairs)
            };
            Plan::Triplet(build_pk_batches(source, config.pk_types, config.pk_instances, main_seed)?)
        }
        Objective::Contrastive => {
            let claims = if supervised { ClaimSource::Labels } else { ClaimSource::PairGraph };
            Plan::Contrastive(build_contrastive_batches(
                store,
                pairs,
                claims,
                config.contrastive.pairs_per_batch,
                main_seed,
            )?)
        }
    };
    let mut fitter = Fitter::new(params, store, config);
    if let Some(pre) = &pretrain {
        fitter.pretrain(pre, config.ae_pretrain_epochs)?;
    }
    fitter.train(&plan, dev)
}

fn languages(store: &SegmentStore) -> Vec<String> {
    store.languages().into_iter().map(String::from).collect()
}

/// Unsupervised training on `pairs` (ground truth or discovered). Word labels in
/// `store` are never consulted: training runs on a label-stripped copy. `dev`, if
/// given, must be labeled and selects the best epoch by same-different AP.
pub fn train_monolingual(
    store: &SegmentStore,
    pairs: &PairList,
    config: &TrainConfig,
    dev: Option<&SegmentStore>,
) -> Result<(Checkpoint, TrainReport), TrainError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(TrainError::EmptyPairs);
    }
    let view = store.without_labels();
    let params = init_model(&model_config(config, view.feature_dim()))?;
    let (params, report) = fit_on_pairs(params, &view, pairs, false, config, dev)?;
    let provenance = Provenance {
        objective: config.objective,
        stage: TrainingStage::Monolingual,
        source_languages: languages(&view),
        pair_provenance: Some(pairs.provenance),
        seed: config.seed,
    };
    Ok((Checkpoint { params, provenance }, report))
}

fn same_label_pair_count(store: &SegmentStore) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in store.iter() {
        *counts.entry(s.word_label.as_deref().unwrap_or_default()).or_default() += 1;
    }
    counts.values().map(|&n| n * (n - 1) / 2).sum()
}

fn check_stores(stores: &[&SegmentStore]) -> Result<(), TrainError> {
    let first = stores.first().ok_or(TrainError::NoStores)?;
    for s in stores {
        s.require_labels()?;
        if s.feature_dim() != first.feature_dim() {
            return Err(TrainError::MixedFeatureDim(first.feature_dim(), s.feature_dim()));
        }
    }
    Ok(())
}

/// Pools the stores and samples ground-truth pairs from each, with per-store
/// quotas proportional to the number of same-label pairs it holds and a total of
/// `min(cap, available)`.
pub fn pooled_ground_truth_pairs(
    stores: &[&SegmentStore],
    cap: usize,
    seed: u64,
) -> Result<(SegmentStore, PairList), TrainError> {
    check_stores(stores)?;
    let available: Vec<usize> = stores.iter().map(|s| same_label_pair_count(s)).collect();
    let total: usize = available.iter().sum();
    if total == 0 {
        return Err(crate::data::DataError::NoValidPair.into());
    }
    let weights: Vec<f64> = available.iter().map(|&a| a as f64 / total as f64).collect();
    let quotas = apportion(cap.min(total), &weights);
    let mut pooled = Vec::new();
    for (k, (store, &quota)) in stores.iter().zip(&quotas).enumerate() {
        if quota > 0 {
            let drawn = ground_truth_pairs(store, Some(quota), stream_seed(seed, k as u64 + 1))?;
            pooled.extend(drawn.pairs);
        }
    }
    let store = SegmentStore::concat(stores)?;
    Ok((store, PairList::new(pooled, PairProvenance::GroundTruth)))
}

fn train_supervised(
    stores: &[&SegmentStore],
    config: &TrainConfig,
    dev: Option<&SegmentStore>,
    stage: TrainingStage,
) -> Result<(Checkpoint, TrainReport), TrainError> {
    config.validate()?;
    let (pooled, pairs) = pooled_ground_truth_pairs(stores, config.pair_cap, config.seed)?;
    let params = init_model(&model_config(config, pooled.feature_dim()))?;
    let (params, report) = fit_on_pairs(params, &pooled, &pairs, true, config, dev)?;
    let provenance = Provenance {
        objective: config.objective,
        stage,
        source_languages: languages(&pooled),
        pair_provenance: Some(PairProvenance::GroundTruth),
        seed: config.seed,
    };
    Ok((Checkpoint { params, provenance }, report))
}

/// Supervised training on ground-truth pairs pooled from several labeled
/// languages, validated on a held-out language.
pub fn train_multilingual(
    stores: &[&SegmentStore],
    config: &TrainConfig,
    dev_language: &SegmentStore,
) -> Result<(Checkpoint, TrainReport), TrainError> {
    check_stores(stores)?;
    let train_langs: BTreeSet<&str> = stores.iter().flat_map(|s| s.languages()).collect();
    if let Some(lang) = dev_language.languages().into_iter().find(|l| train_langs.contains(l)) {
        return Err(TrainError::DevLanguageOverlap(lang.to_string()));
    }
    train_supervised(stores, config, Some(dev_language), TrainingStage::Multilingual)
}

/// Supervised single-language training on ground-truth pairs (a topline for the
/// unsupervised regimes). `dev` may come from the same language.
pub fn train_supervised_monolingual(
    store: &SegmentStore,
    config: &TrainConfig,
    dev: Option<&SegmentStore>,
) -> Result<(Checkpoint, TrainReport), TrainError> {
    train_supervised(&[store], config, dev, TrainingStage::Monolingual)
}

fn compatible(trained: Objective, requested: Objective) -> bool {
    trained == requested || (trained.needs_decoder() && requested.needs_decoder())
}

/// Adapts a pretrained checkpoint to a target language with unsupervised pairs:
/// applies `policy`, then runs the monolingual loop with a fresh optimizer on a
/// label-stripped copy of `target_store`.
pub fn adapt(
    checkpoint: &Checkpoint,
    target_store: &SegmentStore,
    target_pairs: &PairList,
    policy: &AdaptationPolicy,
    config: &TrainConfig,
    dev: Option<&SegmentStore>,
) -> Result<(Checkpoint, TrainReport), TrainError> {
    config.validate()?;
    let trained = checkpoint.provenance.objective;
    if !compatible(trained, config.objective) {
        return Err(TrainError::ObjectiveMismatch {
            checkpoint: trained,
            requested: config.objective,
        });
    }
    if target_pairs.is_empty() {
        return Err(TrainError::EmptyPairs);
    }
    let view = target_store.without_labels();
    let expected = checkpoint.config().feature_dim;
    if view.feature_dim() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            found: view.feature_dim(),
        }
        .into());
    }
    let params = apply_adaptation_policy(checkpoint, policy)?;
    if config.objective.needs_decoder() && params.decoder.is_none() {
        return Err(ModelError::NoDecoder.into());
    }
    let (params, report) = fit_on_pairs(params, &view, target_pairs, false, config, dev)?;
    let provenance = Provenance {
        objective: config.objective,
        stage: TrainingStage::Adapted,
        source_languages: checkpoint.provenance.source_languages.clone(),
        pair_provenance: Some(target_pairs.provenance),
        seed: config.seed,
    };
    Ok((Checkpoint { params, provenance }, report))
}
