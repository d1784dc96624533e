//! Training loops: unsupervised monolingual training on discovered pairs,
//! supervised (pooled multilingual or single-language) training on ground-truth
//! pairs, and adaptation of a pretrained checkpoint.

mod fit;
mod regimes;

use std::time::Duration;

use thiserror::Error;

use crate::data::DataError;
use crate::eval::EvalError;
use crate::model::{AdamConfig, ModelConfig, ModelError};
use crate::objectives::{ContrastiveHyper, Objective, ObjectiveError, TripletHyper};

pub use regimes::{
    adapt, pooled_ground_truth_pairs, train_monolingual, train_multilingual,
    train_supervised_monolingual,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("pair list is empty")]
    EmptyPairs,
    #[error("training diverged (non-finite loss or parameters) in epoch {epoch}{}", if *.pretraining { " of autoencoder pretraining" } else { "" })]
    Diverged { epoch: usize, pretraining: bool },
    #[error("no training stores given")]
    NoStores,
    #[error("stores disagree on feature dimension ({0} vs {1})")]
    MixedFeatureDim(usize, usize),
    #[error("development language `{0}` also appears in the training data")]
    DevLanguageOverlap(String),
    #[error("checkpoint trained with `{checkpoint}` cannot be adapted with `{requested}`")]
    ObjectiveMismatch {
        checkpoint: Objective,
        requested: Objective,
    },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub objective: Objective,
    pub epochs: usize,
    /// Autoencoder epochs run before correspondence training (`cae` only).
    pub ae_pretrain_epochs: usize,
    /// Examples per step for the reconstruction objectives.
    pub batch_size: usize,
    /// Types per triplet batch (P).
    pub pk_types: usize,
    /// Instances per type in a triplet batch (K).
    pub pk_instances: usize,
    pub triplet: TripletHyper,
    /// Temperature, pairs per batch (N) and symmetrization.
    pub contrastive: ContrastiveHyper,
    pub adam: AdamConfig,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Stop after this many dev evaluations without improvement.
    pub patience: Option<usize>,
    /// Dev AP uses cross-speaker positives.
    pub cross_speaker: bool,
    /// Upper bound on pooled ground-truth pairs for supervised training.
    pub pair_cap: usize,
    pub seed: u64,
    /// Architecture. `feature_dim` is taken from the training data and a decoder
    /// is added whenever the objective needs one.
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Contrastive,
            epochs: 20,
            ae_pretrain_epochs: 5,
            batch_size: 32,
            pk_types: 8,
            pk_instances: 4,
            triplet: TripletHyper::default(),
            contrastive: ContrastiveHyper::default(),
            adam: AdamConfig::default(),
            clip_norm: Some(5.0),
            patience: Some(5),
            cross_speaker: true,
            pair_cap: 300_000,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.pk_types < 2 || self.pk_instances < 2 {
            return bad("triplet batches need P ≥ 2 types and K ≥ 2 instances");
        }
        if self.contrastive.pairs_per_batch < 2 {
            return bad("contrastive batches need at least 2 pairs");
        }
        if !(self.contrastive.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if !(self.triplet.margin >= 0.0) {
            return bad("margin must be non-negative");
        }
        if !(self.adam.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip norm must be positive");
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1");
        }
        if self.pair_cap == 0 {
            return bad("pair cap must be at least 1");
        }
        let mut model = self.model.clone();
        model.feature_dim = model.feature_dim.max(1);
        model.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss per main-phase epoch actually run.
    pub epoch_losses: Vec<f64>,
    /// Dev AP after each main-phase epoch (empty without a dev set).
    pub dev_ap: Vec<f64>,
    /// Mean batch loss per autoencoder pretraining epoch.
    pub pretrain_losses: Vec<f64>,
    /// Optimizer steps over both phases.
    pub steps: usize,
    /// Epoch (0-based) whose parameters were returned, when chosen on dev AP.
    pub best_epoch: Option<usize>,
    pub wall_clock: Duration,
}
