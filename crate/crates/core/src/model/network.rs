//! Encoder and decoder passes over [`Parameters`].

use crate::data::Frames;

use super::gru::LayerTrace;
use super::params::{Affine, Parameters};
use super::tensor::{gemv_acc, gemv_t_acc, outer_acc, Scalar};
use super::ModelError;

pub(crate) struct EncoderTrace<F> {
    layers: Vec<LayerTrace<F>>,
}

pub(crate) struct DecoderTrace<F> {
    layers: Vec<LayerTrace<F>>,
}

fn frames_as<F: Scalar>(frames: &Frames) -> Vec<Vec<F>> {
    frames
        .iter_rows()
        .map(|r| r.iter().map(|&v| F::of(v as f64)).collect())
        .collect()
}

fn check_frames<F: Scalar>(params: &Parameters<F>, frames: &Frames) -> Result<(), ModelError> {
    if frames.dim() != params.config.feature_dim {
        return Err(ModelError::DimensionMismatch {
            expected: params.config.feature_dim,
            found: frames.dim(),
        });
    }
    if frames.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    Ok(())
}

fn affine<F: Scalar>(a: &Affine<F>, x: &[F]) -> Vec<F> {
    let mut y = a.bias.data().to_vec();
    gemv_acc(a.weight.data(), a.weight.cols(), x, &mut y);
    y
}

fn affine_backward<F: Scalar>(a: &Affine<F>, x: &[F], dy: &[F], grads: &mut Affine<F>) -> Vec<F> {
    outer_acc(grads.weight.data_mut(), dy, x);
    for (b, &g) in grads.bias.data_mut().iter_mut().zip(dy) {
        *b += g;
    }
    let mut dx = vec![F::zero(); x.len()];
    gemv_t_acc(a.weight.data(), a.weight.cols(), dy, &mut dx);
    dx
}

/// Embeds a segment: stacked GRUs from a zero state, then an affine projection of
/// the top layer's final hidden state. No padding, no output nonlinearity.
pub fn encode<F: Scalar>(params: &Parameters<F>, frames: &Frames) -> Result<Vec<F>, ModelError> {
    check_frames(params, frames)?;
    let mut seq = frames_as(frames);
    for layer in &params.encoder {
        seq = layer.run(&seq);
    }
    Ok(affine(&params.projection, seq.last().expect("non-empty")))
}

pub(crate) fn encode_traced<F: Scalar>(
    params: &Parameters<F>,
    frames: &Frames,
) -> Result<(Vec<F>, EncoderTrace<F>), ModelError> {
    check_frames(params, frames)?;
    let mut layers: Vec<LayerTrace<F>> = Vec::with_capacity(params.encoder.len());
    let input = frames_as(frames);
    for layer in &params.encoder {
        let trace = layer.run_traced(layers.last().map_or(&input, |t| &t.outputs));
        layers.push(trace);
    }
    let last = layers.last().unwrap().outputs.last().expect("non-empty");
    let emb = affine(&params.projection, last);
    Ok((emb, EncoderTrace { layers }))
}

pub(crate) fn encode_backward<F: Scalar>(
    params: &Parameters<F>,
    trace: &EncoderTrace<F>,
    d_embedding: &[F],
    grads: &mut Parameters<F>,
) {
    let top = trace.layers.last().unwrap();
    let steps = top.outputs.len();
    let d_last = affine_backward(
        &params.projection,
        top.outputs.last().unwrap(),
        d_embedding,
        &mut grads.projection,
    );
    let hd = params.config.hidden_dim;
    let mut d_out = vec![vec![F::zero(); hd]; steps];
    d_out[steps - 1] = d_last;
    for l in (0..trace.layers.len()).rev() {
        d_out = params.encoder[l].backward(&trace.layers[l], &d_out, &mut grads.encoder[l]);
    }
}

fn decoder_of<F: Scalar>(params: &Parameters<F>) -> Result<&super::params::Decoder<F>, ModelError> {
    params.decoder.as_ref().ok_or(ModelError::NoDecoder)
}

fn check_embedding<F: Scalar>(params: &Parameters<F>, embedding: &[F], steps: usize) -> Result<(), ModelError> {
    if embedding.len() != params.config.embedding_dim {
        return Err(ModelError::DimensionMismatch {
            expected: params.config.embedding_dim,
            found: embedding.len(),
        });
    }
    if steps == 0 {
        return Err(ModelError::EmptyInput);
    }
    Ok(())
}

/// Unrolls the decoder for `steps` frames. The embedding is the input at every
/// step; previous outputs are never fed back.
pub fn decode<F: Scalar>(
    params: &Parameters<F>,
    embedding: &[F],
    steps: usize,
) -> Result<Vec<Vec<F>>, ModelError> {
    let dec = decoder_of(params)?;
    check_embedding(params, embedding, steps)?;
    let mut seq = vec![embedding.to_vec(); steps];
    for layer in &dec.layers {
        seq = layer.run(&seq);
    }
    Ok(seq.iter().map(|h| affine(&dec.head, h)).collect())
}

pub(crate) fn decode_traced<F: Scalar>(
    params: &Parameters<F>,
    embedding: &[F],
    steps: usize,
) -> Result<(Vec<Vec<F>>, DecoderTrace<F>), ModelError> {
    let dec = decoder_of(params)?;
    check_embedding(params, embedding, steps)?;
    let input = vec![embedding.to_vec(); steps];
    let mut layers: Vec<LayerTrace<F>> = Vec::with_capacity(dec.layers.len());
    for layer in &dec.layers {
        let trace = layer.run_traced(layers.last().map_or(&input, |t| &t.outputs));
        layers.push(trace);
    }
    let out = layers
        .last()
        .unwrap()
        .outputs
        .iter()
        .map(|h| affine(&dec.head, h))
        .collect();
    Ok((out, DecoderTrace { layers }))
}

/// Returns the gradient with respect to the (shared) decoder input embedding.
pub(crate) fn decode_backward<F: Scalar>(
    params: &Parameters<F>,
    trace: &DecoderTrace<F>,
    d_outputs: &[Vec<F>],
    grads: &mut Parameters<F>,
) -> Vec<F> {
    let dec = params.decoder.as_ref().expect("traced decode implies decoder");
    let gdec = grads.decoder.as_mut().expect("gradient layout mirrors parameters");
    let top = trace.layers.last().unwrap();
    let mut d_out: Vec<Vec<F>> = top
        .outputs
        .iter()
        .zip(d_outputs)
        .map(|(h, dy)| affine_backward(&dec.head, h, dy, &mut gdec.head))
        .collect();
    for l in (0..trace.layers.len()).rev() {
        d_out = dec.layers[l].backward(&trace.layers[l], &d_out, &mut gdec.layers[l]);
    }
    let mut d_emb = vec![F::zero(); params.config.embedding_dim];
    for d in &d_out {
        for (a, &b) in d_emb.iter_mut().zip(d) {
            *a += b;
        }
    }
    d_emb
}
