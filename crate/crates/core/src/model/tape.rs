//! Reverse-mode differentiation over a batch of encoder/decoder calls.
//!
//! A loss closure records network calls on a [`Tape`], reads their values, and
//! seeds the gradient of its scalar loss with respect to each embedding or decoder
//! output it used. [`compute_gradients`] then backpropagates those seeds through
//! every recorded call and sums parameter gradients in recording order, so the
//! result does not depend on how many threads did the work.

use rayon::prelude::*;

use crate::data::Frames;

use super::network::{
    decode_backward, decode_traced, encode_backward, encode_traced, DecoderTrace, EncoderTrace,
};
use super::params::Parameters;
use super::tensor::{Scalar, Tensor};
use super::ModelError;

/// Items per parallel work unit during backpropagation. Fixed so that the
/// summation tree, and therefore the floating-point result, never changes.
const REDUCE_CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputId(usize);

struct EncodeNode<F> {
    trace: EncoderTrace<F>,
    embedding: Vec<F>,
    grad: Vec<F>,
}

struct DecodeNode<F> {
    input: EmbeddingId,
    trace: DecoderTrace<F>,
    outputs: Vec<Vec<F>>,
    grad: Vec<Vec<F>>,
}

pub struct Tape<'p, F: Scalar> {
    params: &'p Parameters<F>,
    encodes: Vec<EncodeNode<F>>,
    decodes: Vec<DecodeNode<F>>,
}

impl<'p, F: Scalar> Tape<'p, F> {
    fn new(params: &'p Parameters<F>) -> Self {
        Self {
            params,
            encodes: Vec::new(),
            decodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &Parameters<F> {
        self.params
    }

    pub fn encode(&mut self, frames: &Frames) -> Result<EmbeddingId, ModelError> {
        Ok(self.encode_many(&[frames])?[0])
    }

    /// Encodes several segments (in parallel); ids follow input order.
    pub fn encode_many(&mut self, frames: &[&Frames]) -> Result<Vec<EmbeddingId>, ModelError> {
        let params = self.params;
        let traced: Vec<_> = frames
            .par_iter()
            .map(|f| encode_traced(params, f))
            .collect::<Result<_, _>>()?;
        let first = self.encodes.len();
        for (embedding, trace) in traced {
            let grad = vec![F::zero(); embedding.len()];
            self.encodes.push(EncodeNode { trace, embedding, grad });
        }
        Ok((first..self.encodes.len()).map(EmbeddingId).collect())
    }

    pub fn embedding(&self, id: EmbeddingId) -> &[F] {
        &self.encodes[id.0].embedding
    }

    pub fn decode(&mut self, input: EmbeddingId, steps: usize) -> Result<OutputId, ModelError> {
        Ok(self.decode_many(&[(input, steps)])?[0])
    }

    pub fn decode_many(
        &mut self,
        requests: &[(EmbeddingId, usize)],
    ) -> Result<Vec<OutputId>, ModelError> {
        let params = self.params;
        let encodes = &self.encodes;
        let traced: Vec<_> = requests
            .par_iter()
            .map(|&(id, steps)| decode_traced(params, &encodes[id.0].embedding, steps))
            .collect::<Result<_, _>>()?;
        let first = self.decodes.len();
        for ((outputs, trace), &(input, _)) in traced.into_iter().zip(requests) {
            let dim = outputs.first().map_or(0, Vec::len);
            let grad = vec![vec![F::zero(); dim]; outputs.len()];
            self.decodes.push(DecodeNode { input, trace, outputs, grad });
        }
        Ok((first..self.decodes.len()).map(OutputId).collect())
    }

    pub fn output(&self, id: OutputId) -> &[Vec<F>] {
        &self.decodes[id.0].outputs
    }

    /// Adds `∂loss/∂embedding` for a recorded encode.
    pub fn add_embedding_grad(&mut self, id: EmbeddingId, grad: &[F]) {
        for (a, &g) in self.encodes[id.0].grad.iter_mut().zip(grad) {
            *a += g;
        }
    }

    /// Adds `∂loss/∂output` for every frame of a recorded decode.
    pub fn add_output_grad(&mut self, id: OutputId, grad: &[Vec<F>]) {
        for (row, g) in self.decodes[id.0].grad.iter_mut().zip(grad) {
            for (a, &b) in row.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    fn backward(mut self) -> Parameters<F> {
        let params = self.params;
        let mut total = params.zeros_like();

        let decoded: Vec<(Parameters<F>, Vec<(EmbeddingId, Vec<F>)>)> = self
            .decodes
            .par_chunks(REDUCE_CHUNK)
            .map(|chunk| {
                let mut g = params.zeros_like();
                let d_embs = chunk
                    .iter()
                    .map(|node| (node.input, decode_backward(params, &node.trace, &node.grad, &mut g)))
                    .collect();
                (g, d_embs)
            })
            .collect();
        for (g, d_embs) in decoded {
            accumulate(&mut total, &g);
            for (id, d) in d_embs {
                self.add_embedding_grad(id, &d);
            }
        }

        let encoded: Vec<Parameters<F>> = self
            .encodes
            .par_chunks(REDUCE_CHUNK)
            .map(|chunk| {
                let mut g = params.zeros_like();
                for node in chunk {
                    if node.grad.iter().any(|v| *v != F::zero()) {
                        encode_backward(params, &node.trace, &node.grad, &mut g);
                    }
                }
                g
            })
            .collect();
        for g in &encoded {
            accumulate(&mut total, g);
        }
        total
    }
}

fn accumulate<F: Scalar>(total: &mut Parameters<F>, part: &Parameters<F>) {
    for ((_, t), (_, p)) in total.tensors_mut().into_iter().zip(part.tensors()) {
        t.add_assign(p);
    }
}

/// Gradients for the trainable tensors of a [`Parameters`] value.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<F> {
    inner: Parameters<F>,
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_for(params: &Parameters<F>) -> Self {
        Self {
            inner: params.zeros_like(),
        }
    }

    /// `None` for frozen or unknown tensors.
    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        if !self.inner.is_trainable(name) {
            return None;
        }
        self.inner.get(name)
    }

    /// Trainable tensors in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (String, &Tensor<F>)> {
        self.inner
            .tensors()
            .into_iter()
            .filter(|(n, _)| self.inner.is_trainable(n))
    }

    pub fn global_norm(&self) -> f64 {
        self.iter()
            .flat_map(|(_, t)| t.data().iter().map(|v| v.as_f64().powi(2)).collect::<Vec<_>>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: F) {
        for (_, t) in self.inner.tensors_mut() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(F::of(max_norm / norm));
        }
        norm
    }

    pub fn add(&mut self, other: &Gradients<F>) {
        accumulate(&mut self.inner, &other.inner);
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|(_, t)| t.data().iter().all(|v| v.is_finite()))
    }

    /// Wraps raw per-tensor gradients laid out like `raw`'s parameters.
    #[cfg(test)]
    pub(crate) fn from_raw(raw: Parameters<F>) -> Self {
        Self { inner: raw }
    }

    pub(crate) fn layout(&self) -> &Parameters<F> {
        &self.inner
    }
}

/// Runs `loss_fn` against a fresh tape and backpropagates the gradients it seeded.
///
/// Gradients of frozen tensors are computed but hidden by [`Gradients`] and never
/// applied by the optimizer.
pub fn compute_gradients<F, L, E>(
    params: &Parameters<F>,
    loss_fn: L,
) -> Result<(F, Gradients<F>), E>
where
    F: Scalar,
    L: FnOnce(&mut Tape<'_, F>) -> Result<F, E>,
    E: From<ModelError>,
{
    let mut tape = Tape::new(params);
    let loss = loss_fn(&mut tape)?;
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteLoss(loss.as_f64()).into());
    }
    let inner = tape.backward();
    Ok((loss, Gradients { inner }))
}
