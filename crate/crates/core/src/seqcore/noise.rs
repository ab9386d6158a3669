//! The five denoising corruptions: token masking, token deletion, text
//! infilling, sentence permutation and document rotation. Every transform
//! is a pure function of its inputs and the seed carried by the spec.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("span mean {0} must be positive")]
    NonPositiveSpanMean(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    TokenMask,
    TokenDelete,
    TextInfill,
    SentencePermute,
    DocumentRotate,
}

/// Which corruption to apply and with what parameters. `rate` drives
/// mask/delete/infill; `span_mean` is the mean infill span length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub span_mean: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const DEFAULT_SPAN_MEAN: f64 = 3.0;

    pub fn new(kind: NoiseKind, rate: f64, span_mean: f64, seed: u64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(NoiseError::RateOutOfRange(rate));
        }
        if !(span_mean > 0.0) {
            return Err(NoiseError::NonPositiveSpanMean(span_mean));
        }
        Ok(NoiseSpec {
            kind,
            rate,
            span_mean,
            seed,
        })
    }
}

/// Dispatch one corruption. For `SentencePermute` the items are
/// sentences; for every other kind they are tokens. `mask` is the mask
/// marker inserted by mask/infill. Empty input comes back unchanged.
pub fn apply_noise<T: Clone>(items: &[T], spec: &NoiseSpec, mask: T) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        NoiseKind::TokenMask => token_mask(items, spec.rate, mask, &mut rng),
        NoiseKind::TokenDelete => token_delete(items, spec.rate, &mut rng),
        NoiseKind::TextInfill => text_infill(items, spec.rate, spec.span_mean, mask, &mut rng),
        NoiseKind::SentencePermute => sentence_permute(items, &mut rng),
        NoiseKind::DocumentRotate => document_rotate(items, &mut rng),
    }
}

/// Each token is independently replaced by the mask marker with
/// probability `rate`.
pub fn token_mask<T: Clone>(tokens: &[T], rate: f64, mask: T, rng: &mut impl Rng) -> Vec<T> {
    tokens
        .iter()
        .map(|t| {
            if rate > 0.0 && rng.random_bool(rate) {
                mask.clone()
            } else {
                t.clone()
            }
        })
        .collect()
}

/// Each token is independently removed with probability `rate`.
pub fn token_delete<T: Clone>(tokens: &[T], rate: f64, rng: &mut impl Rng) -> Vec<T> {
    tokens
        .iter()
        .filter(|_| !(rate > 0.0 && rng.random_bool(rate)))
        .cloned()
        .collect()
}

/// Knuth's inversion sampler; adequate for the small means used here.
fn poisson(rng: &mut impl Rng, mean: f64) -> usize {
    let limit = libm::exp(-mean);
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.random::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

/// Replace non-overlapping spans (lengths Poisson-distributed around
/// `span_mean`, at least 1) with a single mask marker each, until about
/// `rate·len` tokens are corrupted.
pub fn text_infill<T: Clone>(
    tokens: &[T],
    rate: f64,
    span_mean: f64,
    mask: T,
    rng: &mut impl Rng,
) -> Vec<T> {
    let len = tokens.len();
    let target = libm::round(rate * len as f64) as usize;
    if len == 0 || target == 0 {
        return tokens.to_vec();
    }
    // 0 = keep, 1 = span start (emits one mask), 2 = span continuation.
    let mut state = alloc::vec![0u8; len];
    let mut corrupted = 0usize;
    let mut attempts = 0usize;
    while corrupted < target && attempts < 4 * len + 16 {
        attempts += 1;
        let span = poisson(rng, span_mean).max(1);
        let start = rng.random_range(0..len);
        let end = (start + span).min(len);
        if state[start..end].iter().any(|s| *s != 0) {
            continue;
        }
        state[start] = 1;
        for s in &mut state[start + 1..end] {
            *s = 2;
        }
        corrupted += end - start;
    }
    let mut out = Vec::with_capacity(len);
    for (token, s) in tokens.iter().zip(&state) {
        match s {
            0 => out.push(token.clone()),
            1 => out.push(mask.clone()),
            _ => {}
        }
    }
    out
}

/// Uniformly shuffle the sentence order.
pub fn sentence_permute<T: Clone>(sentences: &[T], rng: &mut impl Rng) -> Vec<T> {
    let mut out = sentences.to_vec();
    out.shuffle(rng);
    out
}

/// Rotate about a uniformly chosen index so that it becomes the start.
pub fn document_rotate<T: Clone>(tokens: &[T], rng: &mut impl Rng) -> Vec<T> {
    if tokens.is_empty() {
        return Vec::new();
    }
    rotate_at(tokens, rng.random_range(0..tokens.len()))
}

/// Deterministic rotation helper: `tokens[idx..] ++ tokens[..idx]`.
pub fn rotate_at<T: Clone>(tokens: &[T], idx: usize) -> Vec<T> {
    let idx = if tokens.is_empty() { 0 } else { idx % tokens.len() };
    let mut out = Vec::with_capacity(tokens.len());
    out.extend_from_slice(&tokens[idx..]);
    out.extend_from_slice(&tokens[..idx]);
    out
}
