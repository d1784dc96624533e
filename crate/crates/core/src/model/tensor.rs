use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type for network computation. Training runs in `f32`;
/// gradient verification runs in `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense row-major tensor. Weights are `[out, in]`, biases `[out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape mismatch");
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Columns of a matrix (`shape[1]`), or 1 for vectors.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &Tensor<F>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }
}

/// `out += W x` for `W: rows × cols`.
pub(crate) fn gemv_acc<F: Scalar>(w: &[F], cols: usize, x: &[F], out: &mut [F]) {
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ y` for `W: rows × cols`.
pub(crate) fn gemv_t_acc<F: Scalar>(w: &[F], cols: usize, y: &[F], out: &mut [F]) {
    debug_assert_eq!(out.len(), cols);
    for (&yi, row) in y.iter().zip(w.chunks_exact(cols)) {
        if yi == F::zero() {
            continue;
        }
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += wij * yi;
        }
    }
}

/// `dw += y xᵀ`.
pub(crate) fn outer_acc<F: Scalar>(dw: &mut [F], y: &[F], x: &[F]) {
    let cols = x.len();
    for (&yi, row) in y.iter().zip(dw.chunks_exact_mut(cols)) {
        if yi == F::zero() {
            continue;
        }
        for (d, &xj) in row.iter_mut().zip(x) {
            *d += yi * xj;
        }
    }
}

pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub(crate) fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}
