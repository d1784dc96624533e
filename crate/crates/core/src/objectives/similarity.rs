//! Cosine similarity and distance. A zero vector has similarity 0 with anything
//! (distance 1) and contributes no gradient.

use crate::model::Scalar;

fn norm<F: Scalar>(u: &[F]) -> F {
    u.iter().map(|&x| x * x).sum::<F>().sqrt()
}

pub fn cosine_similarity<F: Scalar>(u: &[F], v: &[F]) -> F {
    let nu = norm(u);
    let nv = norm(v);
    if nu == F::zero() || nv == F::zero() {
        return F::zero();
    }
    let dot: F = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    // rounding can push |sim| a hair past 1
    (dot / (nu * nv)).max(-F::one()).min(F::one())
}

pub fn cosine_distance<F: Scalar>(u: &[F], v: &[F]) -> F {
    F::one() - cosine_similarity(u, v)
}

/// `(∂sim/∂u, ∂sim/∂v)`.
pub fn cosine_similarity_grad<F: Scalar>(u: &[F], v: &[F]) -> (Vec<F>, Vec<F>) {
    let nu = norm(u);
    let nv = norm(v);
    if nu == F::zero() || nv == F::zero() {
        return (vec![F::zero(); u.len()], vec![F::zero(); v.len()]);
    }
    let dot: F = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    let sim = dot / (nu * nv);
    let inv = F::one() / (nu * nv);
    let gu = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| b * inv - sim * a / (nu * nu))
        .collect();
    let gv = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| a * inv - sim * b / (nv * nv))
        .collect();
    (gu, gv)
}
