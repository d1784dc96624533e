//! Versioned binary checkpoints.
//!
//! ```text
//! b"AWEC" | u32 format_version | u32 header_len | header (UTF-8 `key=value` lines)
//! u32 n_tensors, then per tensor:
//!   u32 name_len | name | u8 trainable | u32 rank | rank × u32 dims | f32 LE data
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::PairProvenance;
use crate::objectives::Objective;

use super::params::Parameters;
use super::{ModelConfig, ModelError};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"AWEC";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrainingStage {
    Untrained,
    Monolingual,
    Multilingual,
    Adapted,
}

impl fmt::Display for TrainingStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Untrained => "untrained",
            Self::Monolingual => "monolingual",
            Self::Multilingual => "multilingual",
            Self::Adapted => "adapted",
        })
    }
}

impl FromStr for TrainingStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "untrained" => Ok(Self::Untrained),
            "monolingual" => Ok(Self::Monolingual),
            "multilingual" => Ok(Self::Multilingual),
            "adapted" => Ok(Self::Adapted),
            other => Err(format!("unknown training stage `{other}`")),
        }
    }
}

/// How a checkpoint came to be.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub objective: Objective,
    pub stage: TrainingStage,
    pub source_languages: Vec<String>,
    pub pair_provenance: Option<PairProvenance>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: Parameters<f32>,
    pub provenance: Provenance,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, encode_checkpoint(ckpt))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, ModelError> {
    decode_checkpoint(&fs::read(path)?)
}

fn header_text(ckpt: &Checkpoint) -> String {
    let c = ckpt.config();
    let p = &ckpt.provenance;
    let mut lines = vec![
        format!("feature_dim={}", c.feature_dim),
        format!("hidden_dim={}", c.hidden_dim),
        format!("n_layers={}", c.n_layers),
        format!("embedding_dim={}", c.embedding_dim),
        format!("cell={}", c.cell),
        format!("decoder={}", c.decoder),
        format!("model_seed={}", c.seed),
        format!("objective={}", p.objective),
        format!("stage={}", p.stage),
        format!("source_languages={}", p.source_languages.join(",")),
        format!("seed={}", p.seed),
    ];
    if let Some(pp) = p.pair_provenance {
        lines.push(format!("pair_provenance={pp}"));
    }
    lines.join("\n") + "\n"
}

fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let header = header_text(ckpt);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    let tensors = ckpt.params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(u8::from(ckpt.params.is_trainable(&name)));
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::Corrupt("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn str(&mut self) -> Result<&'a str, ModelError> {
        let n = self.u32()? as usize;
        std::str::from_utf8(self.take(n)?).map_err(|_| ModelError::Corrupt("invalid UTF-8".into()))
    }
}

fn parse_header(text: &str) -> Result<(ModelConfig, Provenance), ModelError> {
    let kv: BTreeMap<&str, &str> = text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split_once('=').ok_or_else(|| ModelError::Corrupt(format!("bad header line `{l}`"))))
        .collect::<Result<_, _>>()?;
    fn field<T: FromStr>(kv: &BTreeMap<&str, &str>, key: &str) -> Result<T, ModelError> {
        let raw = kv
            .get(key)
            .ok_or_else(|| ModelError::Corrupt(format!("header lacks `{key}`")))?;
        raw.parse()
            .map_err(|_| ModelError::Corrupt(format!("bad value for `{key}`: `{raw}`")))
    }
    let config = ModelConfig {
        feature_dim: field(&kv, "feature_dim")?,
        hidden_dim: field(&kv, "hidden_dim")?,
        n_layers: field(&kv, "n_layers")?,
        embedding_dim: field(&kv, "embedding_dim")?,
        cell: field(&kv, "cell")?,
        decoder: field(&kv, "decoder")?,
        seed: field(&kv, "model_seed")?,
    };
    config
        .validate()
        .map_err(|e| ModelError::Corrupt(e.to_string()))?;
    let langs: String = field(&kv, "source_languages")?;
    let provenance = Provenance {
        objective: field(&kv, "objective")?,
        stage: field(&kv, "stage")?,
        source_languages: langs
            .split(',')
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect(),
        pair_provenance: match kv.get("pair_provenance") {
            Some(_) => Some(field(&kv, "pair_provenance")?),
            None => None,
        },
        seed: field(&kv, "seed")?,
    };
    Ok((config, provenance))
}

fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, ModelError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(ModelError::Corrupt("not a checkpoint file".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::UnsupportedVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let (config, provenance) = parse_header(cur.str()?)?;
    let mut params = Parameters::<f32>::zeros(&config);
    let expected = params.tensors().len();
    let count = cur.u32()? as usize;
    if count != expected {
        return Err(ModelError::Corrupt(format!(
            "{count} tensors stored, configuration implies {expected}"
        )));
    }
    let mut frozen = Vec::new();
    for _ in 0..count {
        let name = cur.str()?.to_string();
        let trainable = match cur.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(ModelError::Corrupt(format!("bad trainable flag {b}"))),
        };
        let rank = cur.u32()? as usize;
        if rank > 4 {
            return Err(ModelError::Corrupt(format!("tensor `{name}` has rank {rank}")));
        }
        let dims: Vec<usize> = (0..rank)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<_, _>>()?;
        let mut slot = None;
        for (n, t) in params.tensors_mut() {
            if n == name {
                slot = Some(t);
            }
        }
        let t = slot.ok_or_else(|| ModelError::Corrupt(format!("unexpected tensor `{name}`")))?;
        if t.shape() != dims.as_slice() {
            return Err(ModelError::Corrupt(format!(
                "tensor `{name}` has shape {dims:?}, expected {:?}",
                t.shape()
            )));
        }
        let raw = cur.take(t.len() * 4)?;
        for (v, c) in t.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        }
        if !trainable {
            frozen.push(name);
        }
    }
    if cur.pos != bytes.len() {
        return Err(ModelError::Corrupt("trailing bytes".into()));
    }
    for name in frozen {
        params.set_trainable(&name, false);
    }
    Ok(Checkpoint { params, provenance })
}
