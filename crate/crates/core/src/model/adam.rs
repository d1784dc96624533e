use super::params::Parameters;
use super::tape::Gradients;
use super::tensor::Scalar;
use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators mirroring the parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    pub step: u64,
    pub config: AdamConfig,
    m: Parameters<F>,
    v: Parameters<F>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &Parameters<F>, config: AdamConfig) -> Self {
        Self {
            step: 0,
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update of the trainable tensors:
///
/// ```text
/// m ← β1 m + (1−β1) g        v ← β2 v + (1−β2) g²
/// θ ← θ − lr · (m / (1−β1ᵗ)) / (√(v / (1−β2ᵗ)) + ε)
/// ```
pub fn adam_step<F: Scalar>(
    params: &mut Parameters<F>,
    grads: &Gradients<F>,
    state: &mut AdamState<F>,
) -> Result<(), ModelError> {
    params.check_layout(grads.layout())?;
    params.check_layout(&state.m)?;
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let b1 = F::of(c.beta1);
    let b2 = F::of(c.beta2);
    let bc1 = F::of(1.0 - c.beta1.powi(t));
    let bc2 = F::of(1.0 - c.beta2.powi(t));
    let lr = F::of(c.lr);
    let eps = F::of(c.eps);

    let trainable: Vec<bool> = params
        .tensors()
        .iter()
        .map(|(n, _)| params.is_trainable(n))
        .collect();
    let grad_tensors = grads.layout().tensors();
    let moments = state.m.tensors_mut().into_iter().zip(state.v.tensors_mut());
    for ((((_, p), (_, g)), ((_, m), (_, v))), train) in params
        .tensors_mut()
        .into_iter()
        .zip(grad_tensors)
        .zip(moments)
        .zip(trainable)
    {
        if !train {
            continue;
        }
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = b1 * *m + (F::one() - b1) * g;
            *v = b2 * *v + (F::one() - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ModelConfig};

    fn params() -> Parameters<f64> {
        init_model(&ModelConfig {
            feature_dim: 2,
            hidden_dim: 3,
            n_layers: 1,
            embedding_dim: 2,
            decoder: false,
            seed: 3,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    /// 0.5 on every projection-bias element, zero elsewhere.
    fn bias_grads(p: &Parameters<f64>) -> Gradients<f64> {
        let mut raw = p.zeros_like();
        raw.projection.bias.fill(0.5);
        Gradients::from_raw(raw)
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut p = params();
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let g = Gradients::zeros_for(&p);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let mut p = params();
        let before = p.clone();
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        let mut st = AdamState::new(&p, cfg);
        let g = bias_grads(&p);
        adam_step(&mut p, &g, &mut st).unwrap();
        // m̂ = g, v̂ = g², so Δ = −lr·g/(|g|+ε)
        let gval = 0.5f64;
        let m = (1.0 - cfg.beta1) * gval / (1.0 - cfg.beta1);
        let v = (1.0 - cfg.beta2) * gval * gval / (1.0 - cfg.beta2);
        let expected = -cfg.lr * m / (v.sqrt() + cfg.eps);
        for (a, b) in p
            .projection
            .bias
            .data()
            .iter()
            .zip(before.projection.bias.data())
        {
            assert!((a - b - expected).abs() < 1e-15, "{} vs {}", a - b, expected);
        }
        assert_eq!(p.projection.weight, before.projection.weight);
    }

    #[test]
    fn frozen_tensors_never_move() {
        let mut p = params();
        p.set_trainable("projection.bias", false);
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let g = bias_grads(&p);
        for _ in 0..10 {
            adam_step(&mut p, &g, &mut st).unwrap();
        }
        assert_eq!(p.projection.bias, before.projection.bias);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = params();
        let other: Parameters<f64> = init_model(&ModelConfig { hidden_dim: 4, ..p.config.clone() }).unwrap();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let g = Gradients::zeros_for(&other);
        assert!(matches!(adam_step(&mut p, &g, &mut st), Err(ModelError::ShapeMismatch(_))));
    }
}
