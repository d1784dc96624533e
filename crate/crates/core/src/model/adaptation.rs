use std::fmt;
use std::str::FromStr;

use super::checkpoint::Checkpoint;
use super::params::{is_encoder_tensor, reinit_decoder, Parameters};
use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Freeze the encoder RNN, train the projection, re-initialize the decoder.
    CaePolicy,
    /// Every tensor trainable, values untouched.
    FullFinetune,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CaePolicy => "cae",
            Self::FullFinetune => "full",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cae" | "cae_policy" => Ok(Self::CaePolicy),
            "full" | "full_finetune" => Ok(Self::FullFinetune),
            other => Err(format!("unknown adaptation policy `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdaptationPolicy {
    pub kind: PolicyKind,
    pub reinit_seed: u64,
}

/// Prepares a pretrained model for adaptation to a new language.
pub fn apply_adaptation_policy(
    checkpoint: &Checkpoint,
    policy: &AdaptationPolicy,
) -> Result<Parameters<f32>, ModelError> {
    let mut params = checkpoint.params.clone();
    params.set_all_trainable();
    match policy.kind {
        PolicyKind::FullFinetune => {}
        PolicyKind::CaePolicy => {
            if params.decoder.is_none() {
                return Err(ModelError::PolicyMismatch {
                    policy: policy.kind.to_string(),
                    reason: "checkpoint was trained without a decoder".into(),
                });
            }
            reinit_decoder(&mut params, policy.reinit_seed);
            let encoder: Vec<String> = params
                .tensors()
                .into_iter()
                .map(|(n, _)| n)
                .filter(|n| is_encoder_tensor(n))
                .collect();
            for name in encoder {
                params.set_trainable(&name, false);
            }
        }
    }
    Ok(params)
}
