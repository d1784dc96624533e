use crate::data::Frames;
use crate::model::{decode, encode, Parameters, Scalar, Tape};

use super::similarity::{cosine_similarity, cosine_similarity_grad};
use super::{ContrastiveHyper, ObjectiveError, TripletHyper};

fn squared_error<F: Scalar>(target: &Frames, output: &[Vec<F>]) -> F {
    let mut acc = F::zero();
    for (t, y) in target.iter_rows().zip(output) {
        for (&x, &o) in t.iter().zip(y) {
            let d = F::of(x as f64) - o;
            acc += d * d;
        }
    }
    acc
}

/// `Σ_t ‖x′_t − f_t(X)‖²` with the decoder unrolled for `T′ = len(target)` steps.
/// No length normalization.
pub fn cae_loss<F: Scalar>(
    params: &Parameters<F>,
    input: &Frames,
    target: &Frames,
) -> Result<F, ObjectiveError> {
    let z = encode(params, input)?;
    let out = decode(params, &z, target.len())?;
    Ok(squared_error(target, &out))
}

/// Autoencoder loss: [`cae_loss`] with the input as its own target.
pub fn ae_loss<F: Scalar>(params: &Parameters<F>, input: &Frames) -> Result<F, ObjectiveError> {
    cae_loss(params, input, input)
}

/// Mean correspondence loss over `(input, target)` examples, recorded on `tape`.
pub fn reconstruction_batch_loss<F: Scalar>(
    tape: &mut Tape<'_, F>,
    examples: &[(&Frames, &Frames)],
) -> Result<F, ObjectiveError> {
    if examples.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let inputs: Vec<&Frames> = examples.iter().map(|(x, _)| *x).collect();
    let ids = tape.encode_many(&inputs)?;
    let requests: Vec<_> = ids
        .iter()
        .zip(examples)
        .map(|(&id, (_, t))| (id, t.len()))
        .collect();
    let outs = tape.decode_many(&requests)?;
    let scale = F::one() / F::of(examples.len() as f64);
    let two = F::of(2.0);
    let mut total = F::zero();
    for (&out, (_, target)) in outs.iter().zip(examples) {
        let y = tape.output(out);
        total += squared_error(target, y);
        let grad: Vec<Vec<F>> = target
            .iter_rows()
            .zip(y)
            .map(|(t, yr)| {
                t.iter()
                    .zip(yr)
                    .map(|(&x, &o)| -two * (F::of(x as f64) - o) * scale)
                    .collect()
            })
            .collect();
        tape.add_output_grad(out, &grad);
    }
    Ok(total * scale)
}

fn validate_labels<L: PartialEq + std::fmt::Debug>(labels: &[L]) -> Result<(), ObjectiveError> {
    let mut distinct = 0;
    for (i, l) in labels.iter().enumerate() {
        let count = labels.iter().filter(|m| *m == l).count();
        if count < 2 {
            return Err(ObjectiveError::SingletonLabel(format!("{l:?}")));
        }
        if labels[..i].iter().all(|m| m != l) {
            distinct += 1;
        }
    }
    if distinct < 2 {
        return Err(ObjectiveError::SingleLabel);
    }
    Ok(())
}

struct Hardest {
    anchor: usize,
    positive: usize,
    negative: usize,
    loss: f64,
}

fn mine_batch_hard<F: Scalar, L: PartialEq + std::fmt::Debug>(
    embeddings: &[Vec<F>],
    labels: &[L],
    hyper: &TripletHyper,
) -> Result<Vec<Hardest>, ObjectiveError> {
    if embeddings.len() != labels.len() {
        return Err(ObjectiveError::LengthMismatch(embeddings.len(), labels.len()));
    }
    if embeddings.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    validate_labels(labels)?;
    let n = embeddings.len();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = 1.0 - cosine_similarity(&embeddings[i], &embeddings[j]).as_f64();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok((0..n)
        .map(|a| {
            let mut pos = None::<(usize, f64)>;
            let mut neg = None::<(usize, f64)>;
            for j in 0..n {
                if j == a {
                    continue;
                }
                let d = dist[a * n + j];
                if labels[j] == labels[a] {
                    if pos.is_none_or(|(_, best)| d > best) {
                        pos = Some((j, d));
                    }
                } else if neg.is_none_or(|(_, best)| d < best) {
                    neg = Some((j, d));
                }
            }
            let (p, dp) = pos.expect("validated");
            let (q, dn) = neg.expect("validated");
            Hardest {
                anchor: a,
                positive: p,
                negative: q,
                loss: (hyper.margin + dp - dn).max(0.0),
            }
        })
        .collect())
}

/// Batch-hard triplet loss: for every anchor, the farthest same-label item and the
/// closest different-label item under cosine distance give
/// `max(0, m + d(a, p*) − d(a, n*))`; the result is the mean over anchors.
pub fn triplet_loss_batch_hard<F: Scalar, L: PartialEq + std::fmt::Debug>(
    embeddings: &[Vec<F>],
    labels: &[L],
    hyper: &TripletHyper,
) -> Result<F, ObjectiveError> {
    let mined = mine_batch_hard(embeddings, labels, hyper)?;
    let total: f64 = mined.iter().map(|h| h.loss).sum();
    Ok(F::of(total / mined.len() as f64))
}

/// [`triplet_loss_batch_hard`] plus its (sub)gradient with respect to each embedding,
/// holding the mined positive/negative selections fixed.
pub fn triplet_loss_batch_hard_with_grad<F: Scalar, L: PartialEq + std::fmt::Debug>(
    embeddings: &[Vec<F>],
    labels: &[L],
    hyper: &TripletHyper,
) -> Result<(F, Vec<Vec<F>>), ObjectiveError> {
    let mined = mine_batch_hard(embeddings, labels, hyper)?;
    let n = mined.len();
    let w = F::of(1.0 / n as f64);
    let mut grads: Vec<Vec<F>> = embeddings.iter().map(|e| vec![F::zero(); e.len()]).collect();
    let mut total = 0.0;
    for h in &mined {
        total += h.loss;
        if h.loss <= 0.0 {
            continue;
        }
        // loss = m + (1 − sim_ap) − (1 − sim_an)  ⇒  ∂/∂sim_ap = −1, ∂/∂sim_an = +1
        for (other, sign) in [(h.positive, -w), (h.negative, w)] {
            let (ga, go) = cosine_similarity_grad(&embeddings[h.anchor], &embeddings[other]);
            for (g, v) in grads[h.anchor].iter_mut().zip(ga) {
                *g += sign * v;
            }
            for (g, v) in grads[other].iter_mut().zip(go) {
                *g += sign * v;
            }
        }
    }
    Ok((F::of(total / n as f64), grads))
}

fn contrastive_core<F: Scalar>(
    embeddings: &[Vec<F>],
    hyper: &ContrastiveHyper,
    want_grad: bool,
) -> Result<(F, Vec<Vec<F>>), ObjectiveError> {
    if embeddings.len() % 2 != 0 {
        return Err(ObjectiveError::OddBatch(embeddings.len()));
    }
    let n_pairs = embeddings.len() / 2;
    if n_pairs < 2 {
        return Err(ObjectiveError::TooFewPairs(n_pairs));
    }
    let m = embeddings.len();
    let inv_tau = 1.0 / hyper.temperature;
    let mut sim = vec![0.0f64; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let s = cosine_similarity(&embeddings[i], &embeddings[j]).as_f64();
            sim[i * m + j] = s;
            sim[j * m + i] = s;
        }
    }

    let mut terms: Vec<(usize, usize)> = (0..n_pairs).map(|i| (2 * i, 2 * i + 1)).collect();
    if hyper.symmetrize {
        terms.extend((0..n_pairs).map(|i| (2 * i + 1, 2 * i)));
    }

    // ∂loss/∂sim(i, j), accumulated symmetrically
    let mut dsim = vec![0.0f64; m * m];
    let mut total = 0.0f64;
    for &(a, p) in &terms {
        let logits: Vec<(usize, f64)> = (0..m)
            .filter(|&j| j != a)
            .map(|j| (j, sim[a * m + j] * inv_tau))
            .collect();
        let max = logits.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|&(_, l)| (l - max).exp()).sum();
        let lse = max + z.ln();
        total += lse - sim[a * m + p] * inv_tau;
        if want_grad {
            for &(j, l) in &logits {
                let soft = (l - max).exp() / z;
                let g = (soft - f64::from(u8::from(j == p))) * inv_tau;
                dsim[a * m + j] += g;
            }
        }
    }

    let mut grads: Vec<Vec<F>> = embeddings.iter().map(|e| vec![F::zero(); e.len()]).collect();
    if want_grad {
        for i in 0..m {
            for j in 0..m {
                let g = dsim[i * m + j];
                if i == j || g == 0.0 {
                    continue;
                }
                let (gi, gj) = cosine_similarity_grad(&embeddings[i], &embeddings[j]);
                let g = F::of(g);
                for (acc, v) in grads[i].iter_mut().zip(gi) {
                    *acc += g * v;
                }
                for (acc, v) in grads[j].iter_mut().zip(gj) {
                    *acc += g * v;
                }
            }
        }
    }
    Ok((F::of(total), grads))
}

/// Contrastive loss over a batch laid out as `[a_0, p_0, a_1, p_1, …]`. For pair
/// `i` the anchor is `a_i`, the positive `p_i`, and the other `2(N−1)` items are
/// negatives; each term is
/// `−log( exp(sim(a,p)/τ) / Σ_{j ≠ a} exp(sim(a,j)/τ) )`. Returns the sum over pairs.
pub fn contrastive_loss<F: Scalar>(
    embeddings: &[Vec<F>],
    hyper: &ContrastiveHyper,
) -> Result<F, ObjectiveError> {
    contrastive_core(embeddings, hyper, false).map(|(l, _)| l)
}

pub fn contrastive_loss_with_grad<F: Scalar>(
    embeddings: &[Vec<F>],
    hyper: &ContrastiveHyper,
) -> Result<(F, Vec<Vec<F>>), ObjectiveError> {
    contrastive_core(embeddings, hyper, true)
}

/// Encodes `segments` on the tape and seeds the triplet-loss gradient.
pub fn triplet_batch_loss<F: Scalar, L: PartialEq + std::fmt::Debug>(
    tape: &mut Tape<'_, F>,
    segments: &[&Frames],
    labels: &[L],
    hyper: &TripletHyper,
) -> Result<F, ObjectiveError> {
    let ids = tape.encode_many(segments)?;
    let embs: Vec<Vec<F>> = ids.iter().map(|&id| tape.embedding(id).to_vec()).collect();
    let (loss, grads) = triplet_loss_batch_hard_with_grad(&embs, labels, hyper)?;
    for (id, g) in ids.into_iter().zip(&grads) {
        tape.add_embedding_grad(id, g);
    }
    Ok(loss)
}

/// Encodes a `[a_0, p_0, …]` batch on the tape and seeds the contrastive gradient.
pub fn contrastive_batch_loss<F: Scalar>(
    tape: &mut Tape<'_, F>,
    segments: &[&Frames],
    hyper: &ContrastiveHyper,
) -> Result<F, ObjectiveError> {
    let ids = tape.encode_many(segments)?;
    let embs: Vec<Vec<F>> = ids.iter().map(|&id| tape.embedding(id).to_vec()).collect();
    let (loss, grads) = contrastive_loss_with_grad(&embs, hyper)?;
    for (id, g) in ids.into_iter().zip(&grads) {
        tape.add_embedding_grad(id, g);
    }
    Ok(loss)
}
