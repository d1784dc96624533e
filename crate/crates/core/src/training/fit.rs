use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Frames, SegmentStore};
use crate::eval::{embed_all, same_different_ap};
use crate::model::{adam_step, compute_gradients, AdamState, ModelError, Parameters, Tape};
use crate::objectives::{
    contrastive_batch_loss, reconstruction_batch_loss, triplet_batch_loss, ContrastiveSampler,
    ObjectiveError, PkSampler,
};

use super::{TrainConfig, TrainError, TrainReport};

/// Stream offsets so that the samplers of different phases never share a seed.
pub(crate) const PRETRAIN_STREAM: u64 = 0x5052_4554;
pub(crate) const MAIN_STREAM: u64 = 0x4d41_494e;

pub(crate) fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ stream
}

/// What one epoch iterates over.
pub(crate) enum Plan {
    /// `(input, target)` store positions, shuffled each epoch and cut into batches.
    Reconstruction { examples: Vec<(usize, usize)>, seed: u64 },
    Triplet(PkSampler),
    Contrastive(ContrastiveSampler),
}

pub(crate) struct Fitter<'a> {
    pub params: Parameters<f32>,
    adam: AdamState<f32>,
    config: &'a TrainConfig,
    store: &'a SegmentStore,
    report: TrainReport,
    started: Instant,
}

impl<'a> Fitter<'a> {
    pub fn new(params: Parameters<f32>, store: &'a SegmentStore, config: &'a TrainConfig) -> Self {
        let adam = AdamState::new(&params, config.adam);
        Self {
            params,
            adam,
            config,
            store,
            report: TrainReport::default(),
            started: Instant::now(),
        }
    }

    fn frames(&self, i: usize) -> &'a Frames {
        &self.store.segments()[i].frames
    }

    fn step<L>(&mut self, epoch: usize, pretraining: bool, loss_fn: L) -> Result<f64, TrainError>
    where
        L: FnOnce(&mut Tape<'_, f32>) -> Result<f32, ObjectiveError>,
    {
        let diverged = TrainError::Diverged { epoch, pretraining };
        let (loss, mut grads) = match compute_gradients(&self.params, loss_fn) {
            Err(ObjectiveError::Model(ModelError::NonFiniteLoss(_))) => return Err(diverged),
            other => other?,
        };
        if !grads.is_finite() {
            return Err(diverged);
        }
        if let Some(max) = self.config.clip_norm {
            grads.clip_global_norm(max);
        }
        adam_step(&mut self.params, &grads, &mut self.adam)?;
        if !self.params.is_finite() {
            return Err(diverged);
        }
        self.report.steps += 1;
        Ok(loss as f64)
    }

    fn run_epoch(&mut self, plan: &Plan, epoch: usize, pretraining: bool) -> Result<f64, TrainError> {
        let mut losses = Vec::new();
        match plan {
            Plan::Reconstruction { examples, seed } => {
                let mut order = examples.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(crate::objectives::epoch_seed(*seed, epoch as u64));
                order.shuffle(&mut rng);
                for chunk in order.chunks(self.config.batch_size) {
                    let batch: Vec<(&Frames, &Frames)> =
                        chunk.iter().map(|&(x, t)| (self.frames(x), self.frames(t))).collect();
                    losses.push(self.step(epoch, pretraining, |tape| {
                        reconstruction_batch_loss(tape, &batch)
                    })?);
                }
            }
            Plan::Triplet(sampler) => {
                let hyper = self.config.triplet;
                for batch in sampler.epoch(epoch as u64) {
                    let frames: Vec<&Frames> = batch.segments.iter().map(|&i| self.frames(i)).collect();
                    losses.push(self.step(epoch, pretraining, |tape| {
                        triplet_batch_loss(tape, &frames, &batch.types, &hyper)
                    })?);
                }
            }
            Plan::Contrastive(sampler) => {
                let hyper = self.config.contrastive;
                for batch in sampler.epoch(epoch as u64) {
                    let frames: Vec<&Frames> = batch.flatten().into_iter().map(|i| self.frames(i)).collect();
                    losses.push(self.step(epoch, pretraining, |tape| {
                        contrastive_batch_loss(tape, &frames, &hyper)
                    })?);
                }
            }
        }
        if losses.is_empty() {
            return Err(TrainError::InvalidConfig(format!(
                "epoch {epoch} produced no batches"
            )));
        }
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Autoencoder pretraining; no dev evaluation.
    pub fn pretrain(&mut self, plan: &Plan, epochs: usize) -> Result<(), TrainError> {
        for epoch in 0..epochs {
            let loss = self.run_epoch(plan, epoch, true)?;
            self.report.pretrain_losses.push(loss);
        }
        Ok(())
    }

    /// Main phase. With a dev set, AP is measured after every epoch and the
    /// best-scoring parameters are returned (first epoch wins ties); training stops
    /// once `patience` evaluations pass without improvement.
    pub fn train(
        mut self,
        plan: &Plan,
        dev: Option<&SegmentStore>,
    ) -> Result<(Parameters<f32>, TrainReport), TrainError> {
        let mut best: Option<(f64, usize, Parameters<f32>)> = None;
        let mut since_best = 0;
        for epoch in 0..self.config.epochs {
            let loss = self.run_epoch(plan, epoch, false)?;
            self.report.epoch_losses.push(loss);
            let Some(dev) = dev else { continue };
            let ap = same_different_ap(&embed_all(&self.params, dev)?, self.config.cross_speaker)?.ap;
            self.report.dev_ap.push(ap);
            if best.as_ref().is_none_or(|(b, _, _)| ap > *b) {
                best = Some((ap, epoch, self.params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if self.config.patience.is_some_and(|p| since_best >= p) {
                    break;
                }
            }
        }
        let params = match best {
            Some((_, epoch, params)) => {
                self.report.best_epoch = Some(epoch);
                params
            }
            None => self.params,
        };
        self.report.wall_clock = self.started.elapsed();
        Ok((params, self.report))
    }
}
