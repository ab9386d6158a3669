//! Text-quality metrics over word-token sequences.
//!
//! ROUGE-L (LCS based), sentence-level BLEU with clipped n-gram precision
//! and brevity penalty, length ratio, and the cross-entropy / perplexity
//! pair over per-token log-probability series. All logarithms are natural,
//! so perplexity is `e^CE`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("reference text has no tokens")]
    EmptyReference,
    #[error("log-probability series is empty")]
    EmptySeries,
    #[error("log-probability at index {index} is positive ({value})")]
    PositiveLogProb { index: usize, value: f64 },
    #[error("log-probability at index {index} is not finite")]
    NonFiniteLogProb { index: usize },
}

/// Normalisation rules applied when turning raw text into tokens.
///
/// Recorded on every [`TokenizedText`] so two texts are only ever compared
/// under identical rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalization {
    /// Lowercase every token.
    pub lowercase: bool,
    /// Strip leading/trailing non-alphanumeric characters from each token.
    pub strip_edge_punctuation: bool,
}

impl Normalization {
    /// The default metric rule: lowercase, whitespace split, edge
    /// punctuation stripped.
    pub fn standard() -> Self {
        Normalization {
            lowercase: true,
            strip_edge_punctuation: true,
        }
    }

    /// No transformation beyond whitespace splitting.
    pub fn identity() -> Self {
        Normalization {
            lowercase: false,
            strip_edge_punctuation: false,
        }
    }
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::standard()
    }
}

/// A text reduced to an ordered list of word tokens.
///
/// Tokens are never empty: a token that normalises to the empty string
/// (e.g. a lone em-dash) is dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    tokens: Vec<String>,
    normalization: Normalization,
}

impl TokenizedText {
    pub fn new(text: &str, normalization: Normalization) -> Self {
        let tokens = text
            .split_whitespace()
            .filter_map(|raw| {
                let stripped = if normalization.strip_edge_punctuation {
                    raw.trim_matches(|c: char| !c.is_alphanumeric())
                } else {
                    raw
                };
                if stripped.is_empty() {
                    return None;
                }
                Some(if normalization.lowercase {
                    stripped.to_lowercase()
                } else {
                    String::from(stripped)
                })
            })
            .collect();
        TokenizedText {
            tokens,
            normalization,
        }
    }

    pub fn standard(text: &str) -> Self {
        TokenizedText::new(text, Normalization::standard())
    }

    /// Wrap pre-split tokens. Empty strings are dropped to keep the
    /// no-empty-token invariant.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenizedText {
            tokens: tokens
                .into_iter()
                .map(Into::into)
                .filter(|t| !t.is_empty())
                .collect(),
            normalization: Normalization::identity(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Length of the longest common subsequence of the two token lists.
///
/// Two-row dynamic programme, `O(|a|·|b|)` time, `O(min)` extra space.
pub fn lcs_length(a: &TokenizedText, b: &TokenizedText) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    if m == 0 {
        return 0;
    }
    let mut prev = vec![0usize; m + 1];
    let mut curr = vec![0usize; m + 1];
    for row in long.tokens() {
        for (j, col) in short.tokens().iter().enumerate() {
            curr[j + 1] = if row == col {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        core::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// ROUGE-L: LCS-based precision/recall/F1.
///
/// An empty candidate scores all zeros; an empty reference is an error.
pub fn rouge_l(
    candidate: &TokenizedText,
    reference: &TokenizedText,
) -> Result<RougeScore, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(RougeScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        });
    }
    let lcs = lcs_length(candidate, reference) as f64;
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(RougeScore {
        precision,
        recall,
        f1,
    })
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU with clipped n-gram precision for `n = 1..=max_n`
/// and the standard brevity penalty.
///
/// No smoothing is applied: any zero n-gram precision (including a
/// candidate shorter than `n`, which has no n-grams at all) collapses the
/// score to 0. An empty candidate scores 0; an empty reference is an error.
pub fn bleu(
    candidate: &TokenizedText,
    reference: &TokenizedText,
    max_n: usize,
) -> Result<f64, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    if candidate.is_empty() || max_n == 0 {
        return Ok(0.0);
    }
    let mut log_precision_sum = 0.0;
    for n in 1..=max_n {
        let cand_grams = ngram_counts(candidate.tokens(), n);
        if cand_grams.is_empty() {
            return Ok(0.0);
        }
        let ref_grams = ngram_counts(reference.tokens(), n);
        let clipped: usize = cand_grams
            .iter()
            .map(|(gram, count)| (*count).min(ref_grams.get(gram).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return Ok(0.0);
        }
        let total: usize = cand_grams.values().sum();
        log_precision_sum += libm::log(clipped as f64 / total as f64);
    }
    let geo_mean = libm::exp(log_precision_sum / max_n as f64);
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let brevity = if c > r { 1.0 } else { libm::exp(1.0 - r / c) };
    Ok(brevity * geo_mean)
}

/// Candidate length divided by reference length, in word tokens.
pub fn length_ratio(
    candidate: &TokenizedText,
    reference: &TokenizedText,
) -> Result<f64, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    Ok(candidate.len() as f64 / reference.len() as f64)
}

/// Natural-log probabilities for each target token of one sequence.
///
/// Construction enforces the invariants: at least one entry, every entry
/// finite and `<= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbSeries {
    logprobs: Vec<f64>,
}

impl TokenLogProbSeries {
    pub fn new(logprobs: Vec<f64>) -> Result<Self, MetricsError> {
        if logprobs.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        for (index, &value) in logprobs.iter().enumerate() {
            if !value.is_finite() {
                return Err(MetricsError::NonFiniteLogProb { index });
            }
            if value > 0.0 {
                return Err(MetricsError::PositiveLogProb { index, value });
            }
        }
        Ok(TokenLogProbSeries { logprobs })
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Concatenate two series; useful for corpus-level perplexity.
    pub fn concat(&self, other: &TokenLogProbSeries) -> TokenLogProbSeries {
        let mut logprobs = self.logprobs.clone();
        logprobs.extend_from_slice(&other.logprobs);
        TokenLogProbSeries { logprobs }
    }
}

/// Mean negative log-likelihood per token.
pub fn cross_entropy(series: &TokenLogProbSeries) -> f64 {
    let total: f64 = series.logprobs.iter().sum();
    -total / series.len() as f64
}

/// `exp` of the mean negative log-likelihood; always `>= 1`.
pub fn perplexity(series: &TokenLogProbSeries) -> f64 {
    libm::exp(cross_entropy(series))
}

/// One row of the evaluation table: the four reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge_l: f64,
    pub bleu: f64,
    pub length_ratio: f64,
    pub perplexity: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> TokenizedText {
        TokenizedText::standard(text)
    }

    #[test]
    fn tokenize_strips_edge_punctuation_and_lowercases() {
        let t = toks("Hello, World! (don't) --- [2]");
        assert_eq!(t.tokens(), &["hello", "world", "don't", "2"]);
    }

    #[test]
    fn tokenize_never_yields_empty_tokens() {
        let t = toks("--- ... !!");
        assert!(t.is_empty());
    }

    #[test]
    fn lcs_identical_texts() {
        let a = toks("one two three four five six");
        assert_eq!(lcs_length(&a, &a), 6);
    }

    #[test]
    fn lcs_disjoint_vocabularies() {
        assert_eq!(lcs_length(&toks("a b c"), &toks("x y z")), 0);
    }

    #[test]
    fn lcs_hand_traced_example() {
        let a = toks("the cat sat on the mat");
        let b = toks("the cat on mat");
        assert_eq!(lcs_length(&a, &b), 4);
    }

    #[test]
    fn rouge_identical_is_one() {
        let a = toks("the quick brown fox");
        let s = rouge_l(&a, &a).unwrap();
        assert_eq!(s.f1, 1.0);
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn rouge_cat_mat_example() {
        let candidate = toks("the cat on mat");
        let reference = toks("the cat sat on the mat");
        let s = rouge_l(&candidate, &reference).unwrap();
        assert!((s.precision - 1.0).abs() < 1e-9);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-9);
        assert!((s.f1 - 0.8).abs() < 1e-9);
    }

    #[test]
    fn rouge_empty_candidate_is_zero() {
        let s = rouge_l(&toks(""), &toks("a b")).unwrap();
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn rouge_empty_reference_errors() {
        assert_eq!(
            rouge_l(&toks("a"), &toks("")),
            Err(MetricsError::EmptyReference)
        );
    }

    #[test]
    fn bleu_identical_is_one() {
        let a = toks("alpha beta gamma delta epsilon");
        assert_eq!(bleu(&a, &a, 4).unwrap(), 1.0);
    }

    #[test]
    fn bleu_contiguous_half_is_brevity_penalty() {
        // 20 distinct reference tokens; candidate is the first 10. Every
        // candidate n-gram occurs in the reference, so the precision term
        // is exactly 1 and only BP = exp(1 - 20/10) remains.
        let reference_tokens: Vec<String> =
            (0..20).map(|i| alloc::format!("tok{i}")).collect();
        let candidate_tokens = reference_tokens[..10].to_vec();
        let reference = TokenizedText::from_tokens(reference_tokens);
        let candidate = TokenizedText::from_tokens(candidate_tokens);
        let score = bleu(&candidate, &reference, 4).unwrap();
        assert!((score - libm::exp(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn bleu_no_fourgram_overlap_is_zero() {
        let candidate = toks("a b c d e");
        let reference = toks("a x b y c z d w e");
        assert_eq!(bleu(&candidate, &reference, 4).unwrap(), 0.0);
    }

    #[test]
    fn bleu_empty_candidate_is_zero_not_error() {
        assert_eq!(bleu(&toks(""), &toks("a b"), 4).unwrap(), 0.0);
    }

    #[test]
    fn bleu_candidate_shorter_than_n_is_zero() {
        let candidate = toks("a b");
        let reference = toks("a b c d");
        assert_eq!(bleu(&candidate, &reference, 4).unwrap(), 0.0);
    }

    #[test]
    fn length_ratio_examples() {
        let r100: Vec<String> = (0..100).map(|i| alloc::format!("w{i}")).collect();
        let r110: Vec<String> = (0..110).map(|i| alloc::format!("w{i}")).collect();
        let a = TokenizedText::from_tokens(r110);
        let b = TokenizedText::from_tokens(r100);
        assert!((length_ratio(&a, &b).unwrap() - 1.1).abs() < 1e-12);
        assert_eq!(length_ratio(&b, &b).unwrap(), 1.0);
    }

    #[test]
    fn cross_entropy_all_certain_is_zero() {
        let s = TokenLogProbSeries::new(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&s), 0.0);
        assert_eq!(perplexity(&s), 1.0);
    }

    #[test]
    fn cross_entropy_uniform_sixteen() {
        let lp = libm::log(1.0 / 16.0);
        let s = TokenLogProbSeries::new(vec![lp; 5]).unwrap();
        assert!((cross_entropy(&s) - libm::log(16.0)).abs() < 1e-12);
        assert!((perplexity(&s) - 16.0).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_mixed_series() {
        let s =
            TokenLogProbSeries::new(vec![libm::log(0.5), libm::log(0.25)]).unwrap();
        let expected = (0.5f64.ln().abs() + 0.25f64.ln().abs()) / 2.0;
        assert!((cross_entropy(&s) - expected).abs() < 1e-12);
        assert!((cross_entropy(&s) - 1.0397207708399179).abs() < 1e-9);
    }

    #[test]
    fn positive_logprob_rejected() {
        assert!(matches!(
            TokenLogProbSeries::new(vec![0.1]),
            Err(MetricsError::PositiveLogProb { index: 0, .. })
        ));
        assert!(matches!(
            TokenLogProbSeries::new(vec![f64::NEG_INFINITY]),
            Err(MetricsError::NonFiniteLogProb { index: 0 })
        ));
        assert_eq!(
            TokenLogProbSeries::new(vec![]),
            Err(MetricsError::EmptySeries)
        );
    }

    #[test]
    fn concat_cross_entropy_is_length_weighted_mean() {
        let a = TokenLogProbSeries::new(vec![-1.0, -2.0]).unwrap();
        let b = TokenLogProbSeries::new(vec![-4.0]).unwrap();
        let joined = a.concat(&b);
        let expected = (2.0 * cross_entropy(&a) + 1.0 * cross_entropy(&b)) / 3.0;
        assert!((cross_entropy(&joined) - expected).abs() < 1e-12);
    }
}
