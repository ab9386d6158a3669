//! Beam-search decoding with length-penalised scoring and no-repeat
//! n-gram blocking.
//!
//! Candidate score is `Σ token logprobs / |y|^α`; with `α > 1` and
//! negative mean logprob the divisor rewards longer sequences. Before
//! each selection, any continuation that would recreate an n-gram already
//! present in that candidate is banned. Choosing the end token finishes a
//! beam without emitting it, so the end marker is exempt from blocking
//! (the emitted sequence cannot repeat through it).

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    InvalidConfig(&'static str),
    #[error("scorer returned a positive log-probability for token {token} at step {step}")]
    PositiveLogProb { step: usize, token: usize },
    #[error("scorer returned an empty distribution at step {step}")]
    EmptyDistribution { step: usize },
}

/// Context-window caps and decoding constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Encoder window in tokens.
    pub max_in: usize,
    /// Decoder emission cap in tokens.
    pub max_out: usize,
    /// Length-penalty exponent α.
    pub length_penalty_alpha: f64,
    /// Size of the n-gram that may never repeat within one output.
    pub no_repeat_ngram: usize,
    /// Beam candidate count.
    pub beam_width: usize,
}

impl DecodeConfig {
    pub fn new(
        max_in: usize,
        max_out: usize,
        length_penalty_alpha: f64,
        no_repeat_ngram: usize,
        beam_width: usize,
    ) -> Result<Self, DecodeError> {
        if max_in == 0 || max_out == 0 {
            return Err(DecodeError::InvalidConfig("window caps must be >= 1"));
        }
        if !(length_penalty_alpha > 0.0) {
            return Err(DecodeError::InvalidConfig("alpha must be positive"));
        }
        if no_repeat_ngram == 0 {
            return Err(DecodeError::InvalidConfig("no_repeat_ngram must be >= 1"));
        }
        if beam_width == 0 {
            return Err(DecodeError::InvalidConfig("beam_width must be >= 1"));
        }
        Ok(DecodeConfig {
            max_in,
            max_out,
            length_penalty_alpha,
            no_repeat_ngram,
            beam_width,
        })
    }

    /// Enlarged encoder window with the decoder capped at the same
    /// length: 384/384, α = 1.1, trigram blocking.
    pub fn proposed() -> Self {
        DecodeConfig::new(384, 384, 1.1, 3, 4).unwrap()
    }

    /// Stock configuration: 256 in, 448 out.
    pub fn baseline() -> Self {
        DecodeConfig::new(256, 448, 1.1, 3, 4).unwrap()
    }
}

/// Source of next-token log-distributions given the emitted prefix.
pub trait NextTokenScorer {
    fn log_probs(&self, prefix: &[u32]) -> Vec<f64>;
}

impl<F: Fn(&[u32]) -> Vec<f64>> NextTokenScorer for F {
    fn log_probs(&self, prefix: &[u32]) -> Vec<f64> {
        self(prefix)
    }
}

/// `sum_logprob / len^α`. Larger is better; for equal mean logprob
/// `m < 0` and `α > 1` the longer sequence wins since `m·L^{1-α}`
/// increases with `L`.
pub fn length_penalized_score(sum_logprob: f64, len: usize, alpha: f64) -> f64 {
    if len == 0 {
        return 0.0;
    }
    sum_logprob / libm::pow(len as f64, alpha)
}

/// Tokens banned as the next emission: any `v` such that the last
/// `n-1` emitted tokens followed by `v` already occur in the sequence.
fn banned_next_tokens(tokens: &[u32], n: usize) -> BTreeSet<u32> {
    let mut banned = BTreeSet::new();
    if n == 0 || tokens.len() + 1 < n {
        return banned;
    }
    let prefix = &tokens[tokens.len() + 1 - n..];
    for window in tokens.windows(n) {
        if &window[..n - 1] == prefix {
            banned.insert(window[n - 1]);
        }
    }
    banned
}

#[derive(Debug, Clone)]
struct Beam {
    tokens: Vec<u32>,
    sum_logprob: f64,
    /// Emitted length plus one for the end marker once finished.
    penalty_len: usize,
    finished: bool,
}

impl Beam {
    fn score(&self, alpha: f64) -> f64 {
        length_penalized_score(self.sum_logprob, self.penalty_len.max(1), alpha)
    }
}

/// Beam search over the scorer's distributions. The returned sequence
/// contains no repeated n-gram of the configured size and is at most
/// `max_out` tokens long; the end marker, when chosen, is not emitted.
pub fn decode(
    scorer: &dyn NextTokenScorer,
    cfg: &DecodeConfig,
    end_token: Option<u32>,
) -> Result<Vec<u32>, DecodeError> {
    let mut beams = alloc::vec![Beam {
        tokens: Vec::new(),
        sum_logprob: 0.0,
        penalty_len: 0,
        finished: false,
    }];
    for step in 0..cfg.max_out {
        if beams.iter().all(|b| b.finished) {
            break;
        }
        let mut pool: Vec<Beam> = beams.iter().filter(|b| b.finished).cloned().collect();
        for beam in beams.iter().filter(|b| !b.finished) {
            let log_probs = scorer.log_probs(&beam.tokens);
            if log_probs.is_empty() {
                return Err(DecodeError::EmptyDistribution { step });
            }
            if let Some(token) = log_probs.iter().position(|lp| *lp > 0.0) {
                return Err(DecodeError::PositiveLogProb { step, token });
            }
            let banned = banned_next_tokens(&beam.tokens, cfg.no_repeat_ngram);
            let mut expanded = false;
            for (token, lp) in log_probs.iter().enumerate() {
                let token = token as u32;
                if Some(token) == end_token {
                    pool.push(Beam {
                        tokens: beam.tokens.clone(),
                        sum_logprob: beam.sum_logprob + lp,
                        penalty_len: beam.tokens.len() + 1,
                        finished: true,
                    });
                    expanded = true;
                    continue;
                }
                if banned.contains(&token) {
                    continue;
                }
                let mut tokens = beam.tokens.clone();
                tokens.push(token);
                let penalty_len = tokens.len();
                pool.push(Beam {
                    tokens,
                    sum_logprob: beam.sum_logprob + lp,
                    penalty_len,
                    finished: penalty_len == cfg.max_out,
                });
                expanded = true;
            }
            if !expanded {
                // Every continuation banned: the candidate ends here.
                let mut done = beam.clone();
                done.finished = true;
                pool.push(done);
            }
        }
        pool.sort_by(|a, b| {
            b.score(cfg.length_penalty_alpha)
                .total_cmp(&a.score(cfg.length_penalty_alpha))
        });
        pool.truncate(cfg.beam_width);
        beams = pool;
    }
    let best = beams
        .into_iter()
        .max_by(|a, b| {
            a.score(cfg.length_penalty_alpha)
                .total_cmp(&b.score(cfg.length_penalty_alpha))
        })
        .expect("at least one beam");
    Ok(best.tokens)
}
