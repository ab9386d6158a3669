//! Add-k smoothed unigram language model.
//!
//! Serves as the log-probability source for the perplexity metric when no
//! neural model is available. Probabilities over the observed vocabulary
//! are `(c(w) + k) / (N + k·V)`; an unknown token is scored with the
//! add-k floor mass `k / (N + k·V)`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textmetrics::{MetricsError, TokenLogProbSeries, TokenizedText};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnigramError {
    #[error("training corpus has no tokens")]
    EmptyCorpus,
    #[error("smoothing constant must be non-negative")]
    NegativeSmoothing,
    #[error("unknown token `{0}` cannot be scored with k = 0")]
    UnknownWithoutSmoothing(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnigramLm {
    counts: BTreeMap<String, u64>,
    total: u64,
    smoothing: f64,
}

impl UnigramLm {
    pub fn fit<'a, I>(texts: I, smoothing: f64) -> Result<Self, UnigramError>
    where
        I: IntoIterator<Item = &'a TokenizedText>,
    {
        if smoothing < 0.0 {
            return Err(UnigramError::NegativeSmoothing);
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut total = 0u64;
        for text in texts {
            for token in text.tokens() {
                *counts.entry(token.clone()).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(UnigramError::EmptyCorpus);
        }
        Ok(UnigramLm {
            counts,
            total,
            smoothing,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    fn denominator(&self) -> f64 {
        self.total as f64 + self.smoothing * self.vocab_size() as f64
    }

    /// Probability of one token; `None` for an unknown token when k = 0.
    pub fn probability(&self, token: &str) -> Option<f64> {
        match self.counts.get(token) {
            Some(c) => Some((*c as f64 + self.smoothing) / self.denominator()),
            None if self.smoothing > 0.0 => Some(self.smoothing / self.denominator()),
            None => None,
        }
    }

    /// Natural-log probability of every token in the text, ready for the
    /// cross-entropy / perplexity metrics.
    pub fn score_text(&self, text: &TokenizedText) -> Result<TokenLogProbSeries, UnigramError> {
        let mut logprobs = Vec::with_capacity(text.len());
        for token in text.tokens() {
            let p = self
                .probability(token)
                .ok_or_else(|| UnigramError::UnknownWithoutSmoothing(token.clone()))?;
            // p <= 1 by construction; clamp guards rounding at p == 1.
            logprobs.push(libm::log(p).min(0.0));
        }
        Ok(TokenLogProbSeries::new(logprobs)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmetrics::{cross_entropy, perplexity};
    use alloc::format;

    #[test]
    fn repeated_token_without_smoothing_has_ppl_one() {
        let text = TokenizedText::standard("go go go go");
        let lm = UnigramLm::fit([&text], 0.0).unwrap();
        let series = lm.score_text(&TokenizedText::standard("go go")).unwrap();
        assert_eq!(cross_entropy(&series), 0.0);
        assert_eq!(perplexity(&series), 1.0);
    }

    #[test]
    fn uniform_sixteen_types_ppl_near_sixteen() {
        let corpus: String = (0..16).map(|i| format!("t{i} ")).collect();
        let text = TokenizedText::standard(&corpus);
        let lm = UnigramLm::fit([&text], 1e-9).unwrap();
        let series = lm.score_text(&TokenizedText::standard("t3 t7 t11")).unwrap();
        assert!((perplexity(&series) - 16.0).abs() < 1e-5);
    }

    #[test]
    fn hand_corpus_add_one() {
        let text = TokenizedText::standard("a a a b");
        let lm = UnigramLm::fit([&text], 1.0).unwrap();
        assert!((lm.probability("a").unwrap() - 4.0 / 6.0).abs() < 1e-12);
        assert!((lm.probability("b").unwrap() - 2.0 / 6.0).abs() < 1e-12);
        let series = lm.score_text(&TokenizedText::standard("a b")).unwrap();
        let expected = libm::exp(-(libm::log(4.0 / 6.0) + libm::log(2.0 / 6.0)) / 2.0);
        assert!((perplexity(&series) - expected).abs() < 1e-12);
        assert!((perplexity(&series) - 2.1213203435596424).abs() < 1e-9);
    }

    #[test]
    fn unknown_token_uses_floor_mass() {
        let text = TokenizedText::standard("a a a b");
        let lm = UnigramLm::fit([&text], 1.0).unwrap();
        assert!((lm.probability("zzz").unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_token_without_smoothing_errors() {
        let text = TokenizedText::standard("a b");
        let lm = UnigramLm::fit([&text], 0.0).unwrap();
        assert!(matches!(
            lm.score_text(&TokenizedText::standard("c")),
            Err(UnigramError::UnknownWithoutSmoothing(_))
        ));
    }

    #[test]
    fn empty_corpus_rejected() {
        let text = TokenizedText::standard("");
        assert_eq!(
            UnigramLm::fit([&text], 1.0).unwrap_err(),
            UnigramError::EmptyCorpus
        );
    }
}
