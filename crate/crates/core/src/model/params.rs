use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Scalar, Tensor};
use super::{ModelConfig, ModelError};

/// One GRU layer. Gate rows are stacked `[reset; update; candidate]`:
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// z  = σ(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruLayer<F> {
    /// `[3H, in]`
    pub w_ih: Tensor<F>,
    /// `[3H, H]`
    pub w_hh: Tensor<F>,
    pub b_ih: Tensor<F>,
    pub b_hh: Tensor<F>,
}

impl<F: Scalar> GruLayer<F> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(&[3 * hidden_dim, input_dim]),
            w_hh: Tensor::zeros(&[3 * hidden_dim, hidden_dim]),
            b_ih: Tensor::zeros(&[3 * hidden_dim]),
            b_hh: Tensor::zeros(&[3 * hidden_dim]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.cols()
    }

    fn tensors(&self) -> [(&'static str, &Tensor<F>); 4] {
        [
            ("w_ih", &self.w_ih),
            ("w_hh", &self.w_hh),
            ("b_ih", &self.b_ih),
            ("b_hh", &self.b_hh),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<F>); 4] {
        [
            ("w_ih", &mut self.w_ih),
            ("w_hh", &mut self.w_hh),
            ("b_ih", &mut self.b_ih),
            ("b_hh", &mut self.b_hh),
        ]
    }
}

/// `y = W x + b`
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Affine<F> {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output_dim, input_dim]),
            bias: Tensor::zeros(&[output_dim]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoder<F> {
    pub layers: Vec<GruLayer<F>>,
    /// Maps the top decoder state to a feature frame.
    pub head: Affine<F>,
}

/// All network weights plus the set of tensor names excluded from optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters<F> {
    pub config: ModelConfig,
    pub encoder: Vec<GruLayer<F>>,
    pub projection: Affine<F>,
    pub decoder: Option<Decoder<F>>,
    frozen: BTreeSet<String>,
}

impl<F: Scalar> Parameters<F> {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.hidden_dim;
        let encoder = (0..config.n_layers)
            .map(|l| GruLayer::zeros(if l == 0 { config.feature_dim } else { h }, h))
            .collect();
        let decoder = config.decoder.then(|| Decoder {
            layers: (0..config.n_layers)
                .map(|l| GruLayer::zeros(if l == 0 { config.embedding_dim } else { h }, h))
                .collect(),
            head: Affine::zeros(h, config.feature_dim),
        });
        Self {
            config: config.clone(),
            encoder,
            projection: Affine::zeros(h, config.embedding_dim),
            decoder,
            frozen: BTreeSet::new(),
        }
    }

    /// Zero tensors with the same layout; used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(&self.config);
        z.frozen = self.frozen.clone();
        z
    }

    /// Named tensors in a fixed canonical order.
    pub fn tensors(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = Vec::new();
        for (l, layer) in self.encoder.iter().enumerate() {
            for (n, t) in layer.tensors() {
                out.push((format!("encoder.{l}.{n}"), t));
            }
        }
        out.push(("projection.weight".into(), &self.projection.weight));
        out.push(("projection.bias".into(), &self.projection.bias));
        if let Some(dec) = &self.decoder {
            for (l, layer) in dec.layers.iter().enumerate() {
                for (n, t) in layer.tensors() {
                    out.push((format!("decoder.{l}.{n}"), t));
                }
            }
            out.push(("head.weight".into(), &dec.head.weight));
            out.push(("head.bias".into(), &dec.head.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut out = Vec::new();
        for (l, layer) in self.encoder.iter_mut().enumerate() {
            for (n, t) in layer.tensors_mut() {
                out.push((format!("encoder.{l}.{n}"), t));
            }
        }
        out.push(("projection.weight".into(), &mut self.projection.weight));
        out.push(("projection.bias".into(), &mut self.projection.bias));
        if let Some(dec) = &mut self.decoder {
            for (l, layer) in dec.layers.iter_mut().enumerate() {
                for (n, t) in layer.tensors_mut() {
                    out.push((format!("decoder.{l}.{n}"), t));
                }
            }
            out.push(("head.weight".into(), &mut dec.head.weight));
            out.push(("head.bias".into(), &mut dec.head.bias));
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.tensors().into_iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        !self.frozen.contains(name)
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) {
        if trainable {
            self.frozen.remove(name);
        } else {
            self.frozen.insert(name.to_string());
        }
    }

    pub fn set_all_trainable(&mut self) {
        self.frozen.clear();
    }

    pub fn frozen(&self) -> impl Iterator<Item = &str> {
        self.frozen.iter().map(String::as_str)
    }

    pub fn num_elements(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.data().iter().all(|v| v.is_finite()))
    }

    pub fn cast<G: Scalar>(&self) -> Parameters<G> {
        let mut out = Parameters::<G>::zeros(&self.config);
        for ((_, dst), (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        out.frozen = self.frozen.clone();
        out
    }

    /// Checks that `other` has exactly this tensor layout.
    pub fn check_layout<G: Scalar>(&self, other: &Parameters<G>) -> Result<(), ModelError> {
        let a = self.tensors();
        let b = other.tensors();
        if a.len() != b.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} tensors vs {}",
                a.len(),
                b.len()
            )));
        }
        for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
            if na != nb || ta.shape() != tb.shape() {
                return Err(ModelError::ShapeMismatch(format!(
                    "{na} {:?} vs {nb} {:?}",
                    ta.shape(),
                    tb.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Weights ~ U(−1/√fan_in, 1/√fan_in) with `fan_in` the number of input columns;
/// biases zero; everything trainable. Deterministic per `config.seed`.
pub fn init_model<F: Scalar>(config: &ModelConfig) -> Result<Parameters<F>, ModelError> {
    config.validate()?;
    let mut params = Parameters::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (_, t) in params.tensors_mut() {
        init_tensor(t, &mut rng);
    }
    Ok(params)
}

/// Re-draws every decoder tensor (recurrent layers and output head) from `seed`.
pub(crate) fn reinit_decoder<F: Scalar>(params: &mut Parameters<F>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in params.tensors_mut() {
        if is_decoder_tensor(&name) {
            init_tensor(t, &mut rng);
        }
    }
}

pub(crate) fn is_encoder_tensor(name: &str) -> bool {
    name.starts_with("encoder.")
}

pub(crate) fn is_decoder_tensor(name: &str) -> bool {
    name.starts_with("decoder.") || name.starts_with("head.")
}

fn init_tensor<F: Scalar>(t: &mut Tensor<F>, rng: &mut ChaCha8Rng) {
    if t.shape().len() < 2 {
        t.fill(F::zero());
        return;
    }
    let bound = 1.0 / (t.cols() as f64).sqrt();
    for v in t.data_mut() {
        *v = F::of(rng.random_range(-bound..bound));
    }
}
