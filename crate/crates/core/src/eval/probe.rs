use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingSet, EvalError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    pub train_fraction: f64,
    /// Full-batch gradient descent iterations.
    pub steps: usize,
    pub learning_rate: f64,
    /// Weight of the `½‖W‖²` penalty (biases are not penalized).
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            steps: 500,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeResult {
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_speakers: usize,
}

/// Per-speaker split: each speaker's items are shuffled and the first
/// `round(fraction · n)` go to training, keeping at least one on each side when
/// the speaker has two or more items.
fn stratified_split(speakers: &[usize], n_speakers: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = vec![Vec::new(); n_speakers];
    for (i, &s) in speakers.iter().enumerate() {
        groups[s].push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut g in groups {
        g.shuffle(&mut rng);
        let n = g.len();
        let mut k = (fraction * n as f64).round() as usize;
        k = k.max(1);
        if n >= 2 {
            k = k.min(n - 1);
        }
        train.extend_from_slice(&g[..k.min(n)]);
        test.extend_from_slice(&g[k.min(n)..]);
    }
    (train, test)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = k;
        }
    }
    best
}

fn speaker_classes(set: &EmbeddingSet) -> (Vec<usize>, usize) {
    let mut speaker_ids = BTreeMap::new();
    for e in set.entries() {
        let next = speaker_ids.len();
        speaker_ids.entry(e.speaker_id.as_str()).or_insert(next);
    }
    let y = set.entries().iter().map(|e| speaker_ids[e.speaker_id.as_str()]).collect();
    (y, speaker_ids.len())
}

/// The `(train, test)` entry positions [`speaker_probe`] uses for `config`.
pub fn probe_split(set: &EmbeddingSet, config: &ProbeConfig) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(EvalError::InvalidProbeConfig(format!(
            "train fraction {} must lie strictly between 0 and 1",
            config.train_fraction
        )));
    }
    let (y, n_classes) = speaker_classes(set);
    if n_classes < 2 {
        return Err(EvalError::TooFewSpeakers(n_classes));
    }
    Ok(stratified_split(&y, n_classes, config.train_fraction, config.seed))
}

/// Linear speaker-identity probe: multinomial logistic regression on
/// standardized embeddings, scored on a held-out stratified split.
///
/// Feature means and standard deviations come from the training split only.
pub fn speaker_probe(set: &EmbeddingSet, config: &ProbeConfig) -> Result<ProbeResult, EvalError> {
    let (train, test) = probe_split(set, config)?;
    let (y, n_classes) = speaker_classes(set);
    let mut present = vec![false; n_classes];
    for &i in &train {
        present[y[i]] = true;
    }
    assert!(present.iter().all(|&p| p), "stratified split lost a speaker");

    let dim = set.dim().unwrap_or(0);
    let raw: Vec<Vec<f64>> = set
        .entries()
        .iter()
        .map(|e| e.embedding.iter().map(|&v| v as f64).collect())
        .collect();
    let mut mean = vec![0.0; dim];
    for &i in &train {
        for (m, v) in mean.iter_mut().zip(&raw[i]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= train.len() as f64);
    let mut std = vec![0.0; dim];
    for &i in &train {
        for ((s, v), m) in std.iter_mut().zip(&raw[i]).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / train.len() as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let x: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| r.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    let mut w = vec![vec![0.0; dim]; n_classes];
    let mut b = vec![0.0; n_classes];
    let logits = |w: &[Vec<f64>], b: &[f64], xi: &[f64]| -> Vec<f64> {
        w.iter()
            .zip(b)
            .map(|(row, bk)| bk + row.iter().zip(xi).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    };
    let inv_n = 1.0 / train.len() as f64;
    for _ in 0..config.steps {
        let mut gw = vec![vec![0.0; dim]; n_classes];
        let mut gb = vec![0.0; n_classes];
        for &i in &train {
            let mut p = logits(&w, &b, &x[i]);
            softmax_in_place(&mut p);
            p[y[i]] -= 1.0;
            for k in 0..n_classes {
                gb[k] += p[k] * inv_n;
                for (g, xv) in gw[k].iter_mut().zip(&x[i]) {
                    *g += p[k] * xv * inv_n;
                }
            }
        }
        for k in 0..n_classes {
            b[k] -= config.learning_rate * gb[k];
            for (wv, g) in w[k].iter_mut().zip(&gw[k]) {
                *wv -= config.learning_rate * (g + config.l2 * *wv);
            }
        }
    }

    let correct = test
        .iter()
        .filter(|&&i| argmax(&logits(&w, &b, &x[i])) == y[i])
        .count();
    Ok(ProbeResult {
        accuracy: if test.is_empty() { 0.0 } else { correct as f64 / test.len() as f64 },
        n_train: train.len(),
        n_test: test.len(),
        n_speakers: n_classes,
    })
}
