//! Seeded synthetic word-segment corpora.
//!
//! Every word type owns one smooth template (a Gaussian random walk passed through a
//! short moving average). Instances are produced by linearly resampling the template
//! to a jittered length, applying a per-speaker per-dimension affine map and adding
//! white frame noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, FeatureSegment, Frames, SegmentStore};

const WALK_STEP_SIGMA: f64 = 0.45;
const SMOOTHING_RADIUS: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_word_types: usize,
    pub n_speakers: usize,
    pub instances_per_type_per_speaker: usize,
    /// Inclusive range of template lengths in frames.
    pub template_length_range: (usize, usize),
    /// Instance length is drawn uniformly from `[T(1-j), T(1+j)]`.
    pub length_jitter: f64,
    pub noise_sigma: f64,
    pub speaker_gain_sigma: f64,
    pub speaker_offset_sigma: f64,
    pub feature_dim: usize,
    pub language_id: String,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_word_types: 20,
            n_speakers: 5,
            instances_per_type_per_speaker: 8,
            template_length_range: (15, 30),
            length_jitter: 0.2,
            noise_sigma: 0.3,
            speaker_gain_sigma: 0.3,
            speaker_offset_sigma: 0.5,
            feature_dim: 13,
            language_id: "synth".into(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.into()));
        if self.n_word_types == 0 || self.n_speakers == 0 || self.instances_per_type_per_speaker == 0
        {
            return bad("type, speaker and instance counts must be at least 1");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be at least 1");
        }
        let (lo, hi) = self.template_length_range;
        if lo == 0 || lo > hi {
            return bad("template_length_range must satisfy 1 <= min <= max");
        }
        if !(0.0..1.0).contains(&self.length_jitter) {
            return bad("length_jitter must lie in [0, 1)");
        }
        for (name, s) in [
            ("noise_sigma", self.noise_sigma),
            ("speaker_gain_sigma", self.speaker_gain_sigma),
            ("speaker_offset_sigma", self.speaker_offset_sigma),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(DataError::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        self.n_word_types * self.n_speakers * self.instances_per_type_per_speaker
    }
}

struct SpeakerMap {
    gain: Vec<f64>,
    offset: Vec<f64>,
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SegmentStore, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.feature_dim;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let templates: Vec<Vec<Vec<f64>>> = (0..config.n_word_types)
        .map(|_| {
            let len = rng.random_range(config.template_length_range.0..=config.template_length_range.1);
            template(&mut rng, len, dim, &std_normal)
        })
        .collect();

    let speakers: Vec<SpeakerMap> = (0..config.n_speakers)
        .map(|_| SpeakerMap {
            gain: (0..dim)
                .map(|_| 1.0 + config.speaker_gain_sigma * std_normal.sample(&mut rng))
                .collect(),
            offset: (0..dim)
                .map(|_| config.speaker_offset_sigma * std_normal.sample(&mut rng))
                .collect(),
        })
        .collect();

    let lang = &config.language_id;
    let mut store = SegmentStore::new(dim);
    for (w, tmpl) in templates.iter().enumerate() {
        for (s, spk) in speakers.iter().enumerate() {
            for i in 0..config.instances_per_type_per_speaker {
                let len = jittered_length(&mut rng, tmpl.len(), config.length_jitter);
                let mut data = Vec::with_capacity(len * dim);
                for frame in resample(tmpl, len) {
                    for (d, v) in frame.into_iter().enumerate() {
                        let noise = config.noise_sigma * std_normal.sample(&mut rng);
                        data.push((spk.gain[d] * v + spk.offset[d] + noise) as f32);
                    }
                }
                store.push(FeatureSegment {
                    id: format!("{lang}_w{w:03}_s{s:02}_{i:03}"),
                    frames: Frames::new(len, dim, data),
                    word_label: Some(format!("{lang}_w{w:03}")),
                    speaker_id: format!("{lang}_spk{s:02}"),
                    language_id: lang.clone(),
                })?;
            }
        }
    }
    Ok(store)
}

fn template(rng: &mut ChaCha8Rng, len: usize, dim: usize, n: &Normal<f64>) -> Vec<Vec<f64>> {
    let mut walk = Vec::with_capacity(len);
    let mut cur: Vec<f64> = (0..dim).map(|_| n.sample(rng)).collect();
    for _ in 0..len {
        walk.push(cur.clone());
        for c in &mut cur {
            *c += WALK_STEP_SIGMA * n.sample(rng);
        }
    }
    (0..len)
        .map(|t| {
            let lo = t.saturating_sub(SMOOTHING_RADIUS);
            let hi = (t + SMOOTHING_RADIUS).min(len - 1);
            let k = (hi - lo + 1) as f64;
            (0..dim)
                .map(|d| walk[lo..=hi].iter().map(|f| f[d]).sum::<f64>() / k)
                .collect()
        })
        .collect()
}

fn jittered_length(rng: &mut ChaCha8Rng, base: usize, jitter: f64) -> usize {
    if jitter == 0.0 {
        return base;
    }
    let lo = base as f64 * (1.0 - jitter);
    let hi = base as f64 * (1.0 + jitter);
    (rng.random_range(lo..=hi).round() as usize).max(1)
}

/// Monotonic linear resampling of `frames` to `len` frames.
fn resample(frames: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    let src = frames.len();
    if len == src {
        return frames.to_vec();
    }
    (0..len)
        .map(|i| {
            let pos = if len == 1 {
                (src - 1) as f64 / 2.0
            } else {
                i as f64 * (src - 1) as f64 / (len - 1) as f64
            };
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            let w = pos - lo as f64;
            frames[lo]
                .iter()
                .zip(&frames[hi])
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect()
        })
        .collect()
}
