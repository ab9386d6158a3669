//! Citation-visibility scoring of generative answers.
//!
//! An answer is segmented into sentences, each sentence carries the set of
//! numerically cited sources, and a source's visibility within the answer
//! is `wc` (total words of sentences citing it) and `wc_adj` (the same sum
//! with each sentence weighted by `1 - pos/|S|`, position 0-based, so the
//! first sentence weighs 1 and the last `1/|S|`). A sentence citing
//! several sources credits each of them in full.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of sources presented per query; citation indices are 1-based
/// into this range.
pub const SOURCES_PER_QUERY: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisibilityError {
    #[error("response has no sentences")]
    EmptyResponse,
    #[error("no queries survived exclusion")]
    AllExcluded,
    #[error("source index {0} outside 1..={SOURCES_PER_QUERY}")]
    BadSourceIndex(usize),
}

/// Sentence terminators that are really abbreviations; a trailing token
/// equal to one of these (case-insensitive) suppresses the split.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "etc.", "vs.", "dr.", "mr.", "mrs.", "ms.", "prof.", "st.",
    "no.", "approx.", "dept.", "fig.", "inc.", "jr.", "sr.",
];

/// Split text into sentences on `.`/`!`/`?` followed by whitespace or end
/// of text. Abbreviations from the list never split; empty segments are
/// dropped. Joining the segments preserves all non-whitespace characters.
pub fn segment_sentences(text: &str, abbreviations: &[&str]) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let boundary_end = i + c.len_utf8();
        let next_is_break = iter.peek().is_none_or(|(_, n)| n.is_whitespace());
        if !next_is_break {
            continue;
        }
        if c == '.' && trailing_token_is_abbreviation(&text[start..boundary_end], abbreviations)
        {
            continue;
        }
        let segment = text[start..boundary_end].trim();
        if !segment.is_empty() {
            sentences.push(segment.to_string());
        }
        start = boundary_end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

fn trailing_token_is_abbreviation(upto: &str, abbreviations: &[&str]) -> bool {
    let token = upto
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or(upto)
        .to_lowercase();
    abbreviations.iter().any(|a| a.to_lowercase() == token)
}

/// Outcome of scanning one sentence for numeric citation markers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CitationScan {
    /// In-range source indices (1-based).
    pub indices: BTreeSet<usize>,
    /// Bracketed integers outside `1..=max_index`, surfaced as warnings.
    pub ignored: Vec<usize>,
}

/// Parse every bracketed integer group in the sentence: `[2]`, `[1][3]`,
/// `[1, 3]` and `[1-3]` (ranges expanded). Indices outside `1..=max_index`
/// are collected separately rather than silently dropped.
pub fn extract_citations(sentence: &str, max_index: usize) -> CitationScan {
    let mut scan = CitationScan::default();
    for group in bracket_groups(sentence) {
        let Some(numbers) = parse_citation_group(&group) else {
            continue;
        };
        for n in numbers {
            if n >= 1 && n <= max_index {
                scan.indices.insert(n);
            } else {
                scan.ignored.push(n);
            }
        }
    }
    scan
}

/// Byte ranges of `[...]` groups whose content parses as a numeric
/// citation list.
fn citation_marker_spans(sentence: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in sentence.char_indices() {
        match c {
            '[' => open = Some(i),
            ']' => {
                if let Some(start) = open.take() {
                    let inner = &sentence[start + 1..i];
                    if parse_citation_group(inner).is_some() {
                        spans.push((start, i + 1));
                    }
                }
            }
            _ => {}
        }
    }
    spans
}

fn bracket_groups(sentence: &str) -> Vec<String> {
    citation_marker_spans(sentence)
        .into_iter()
        .map(|(s, e)| sentence[s + 1..e - 1].to_string())
        .collect()
}

/// A comma-separated list of integers or `a-b` ranges; anything else is
/// not a citation group.
fn parse_citation_group(inner: &str) -> Option<Vec<usize>> {
    let inner = inner.trim();
    if inner.is_empty() {
        return None;
    }
    let mut numbers = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: usize = lo.trim().parse().ok()?;
            let hi: usize = hi.trim().parse().ok()?;
            numbers.extend(lo..=hi);
        } else {
            numbers.push(part.parse().ok()?);
        }
    }
    Some(numbers)
}

/// Words of a sentence: whitespace-separated tokens containing at least
/// one alphanumeric character, after citation markers are removed.
pub fn count_words(sentence: &str) -> usize {
    let mut stripped = String::with_capacity(sentence.len());
    let mut last = 0usize;
    for (start, end) in citation_marker_spans(sentence) {
        stripped.push_str(&sentence[last..start]);
        stripped.push(' ');
        last = end;
    }
    stripped.push_str(&sentence[last..]);
    stripped
        .split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count()
}

/// One sentence of a parsed response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    /// 0-based position within the response.
    pub pos: usize,
    /// Word count with citation markers excluded.
    pub word_count: usize,
    /// Cited source indices, each in `1..=SOURCES_PER_QUERY`.
    pub citations: BTreeSet<usize>,
}

/// A generative answer decomposed into ordered, citation-tagged sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub sentences: Vec<Sentence>,
    pub total: usize,
}

impl ParsedResponse {
    /// Segment, count and scan an answer text. Out-of-range citation
    /// indices found along the way are returned for warning surfaces.
    pub fn parse(answer: &str, abbreviations: &[&str]) -> (Self, Vec<usize>) {
        let mut ignored = Vec::new();
        let sentences: Vec<Sentence> = segment_sentences(answer, abbreviations)
            .into_iter()
            .enumerate()
            .map(|(pos, text)| {
                let scan = extract_citations(&text, SOURCES_PER_QUERY);
                ignored.extend(scan.ignored);
                Sentence {
                    word_count: count_words(&text),
                    citations: scan.indices,
                    pos,
                    text,
                }
            })
            .collect();
        let total = sentences.len();
        (ParsedResponse { sentences, total }, ignored)
    }

    /// Total words across all sentences (the share-of-voice denominator).
    pub fn total_words(&self) -> usize {
        self.sentences.iter().map(|s| s.word_count).sum()
    }
}

/// wc: total words of the sentences citing source `i`.
pub fn word_count_metric(parsed: &ParsedResponse, source_index: usize) -> u64 {
    parsed
        .sentences
        .iter()
        .filter(|s| s.citations.contains(&source_index))
        .map(|s| s.word_count as u64)
        .sum()
}

/// wc_adj: as `wc` with each citing sentence weighted by `1 - pos/|S|`.
pub fn adjusted_word_count_metric(
    parsed: &ParsedResponse,
    source_index: usize,
) -> Result<f64, VisibilityError> {
    if parsed.total == 0 {
        return Err(VisibilityError::EmptyResponse);
    }
    let total = parsed.total as f64;
    Ok(parsed
        .sentences
        .iter()
        .filter(|s| s.citations.contains(&source_index))
        .map(|s| s.word_count as f64 * (1.0 - s.pos as f64 / total))
        .sum())
}

/// Both visibility metrics for one source within one response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityScore {
    pub source_index: usize,
    pub wc: u64,
    pub wc_adj: f64,
}

pub fn score_source(
    parsed: &ParsedResponse,
    source_index: usize,
) -> Result<VisibilityScore, VisibilityError> {
    if source_index == 0 || source_index > SOURCES_PER_QUERY {
        return Err(VisibilityError::BadSourceIndex(source_index));
    }
    Ok(VisibilityScore {
        source_index,
        wc: word_count_metric(parsed, source_index),
        wc_adj: adjusted_word_count_metric(parsed, source_index)?,
    })
}

/// Why a query was excluded from the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// The baseline response never cites the target source.
    BaselineZero,
    /// Modified z-score of the wc improvement beyond the threshold.
    OutlierWc,
    /// Modified z-score of the wc_adj improvement beyond the threshold.
    OutlierWcAdj,
}

/// Relative improvements of the treated condition over the baseline for
/// one query, computed on share-of-voice-normalised scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryComparison {
    pub query_id: String,
    pub target: usize,
    pub baseline: VisibilityScore,
    pub treated: VisibilityScore,
    /// `wc / total_words` for each condition.
    pub baseline_share: f64,
    pub treated_share: f64,
    /// Relative improvements, absent when the baseline never cites the
    /// target (baseline-zero exclusion).
    pub wc_improvement: Option<f64>,
    pub wc_adj_improvement: Option<f64>,
}

impl QueryComparison {
    pub fn is_baseline_zero(&self) -> bool {
        self.wc_improvement.is_none()
    }
}

/// Compare the two experimental conditions for one query. Scores are
/// normalised by each response's total word count before the relative
/// improvement is taken, so answers of different lengths compare fairly.
pub fn compare_conditions(
    query_id: &str,
    baseline: &ParsedResponse,
    treated: &ParsedResponse,
    target: usize,
) -> Result<QueryComparison, VisibilityError> {
    let base = score_source(baseline, target)?;
    let treat = score_source(treated, target)?;
    let share = |wc: u64, words: usize| {
        if words == 0 {
            0.0
        } else {
            wc as f64 / words as f64
        }
    };
    let adj_share = |wc_adj: f64, words: usize| {
        if words == 0 {
            0.0
        } else {
            wc_adj / words as f64
        }
    };
    let baseline_share = share(base.wc, baseline.total_words());
    let treated_share = share(treat.wc, treated.total_words());
    let (wc_improvement, wc_adj_improvement) = if base.wc == 0 {
        (None, None)
    } else {
        let base_adj_share = adj_share(base.wc_adj, baseline.total_words());
        let treat_adj_share = adj_share(treat.wc_adj, treated.total_words());
        (
            Some((treated_share - baseline_share) / baseline_share),
            Some((treat_adj_share - base_adj_share) / base_adj_share),
        )
    };
    Ok(QueryComparison {
        query_id: query_id.to_string(),
        target,
        baseline: base,
        treated: treat,
        baseline_share,
        treated_share,
        wc_improvement,
        wc_adj_improvement,
    })
}

/// Outlier-exclusion policy for the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPolicy {
    /// Exclude queries whose improvement has |modified z-score| above the
    /// threshold (median/MAD based, 3.5 by convention).
    ModifiedZScore { threshold: f64 },
    None,
}

impl OutlierPolicy {
    pub fn mad_default() -> Self {
        OutlierPolicy::ModifiedZScore { threshold: 3.5 }
    }
}

/// Mean relative improvements over the surviving queries plus the full
/// exclusion trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub per_query: Vec<QueryComparison>,
    pub aggregate_wc: f64,
    pub aggregate_wc_adj: f64,
    pub excluded: Vec<(String, ExclusionReason)>,
    pub surviving: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Modified z-scores per Iglewicz–Hoaglin: `0.6745·(x−med)/MAD`, falling
/// back to the mean absolute deviation (`(x−med)/(1.253314·MeanAD)`) when
/// the MAD is zero. All-identical values yield all-zero scores.
fn modified_z_scores(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    let mut sorted_dev = deviations.clone();
    sorted_dev.sort_by(f64::total_cmp);
    let mad = median(&sorted_dev);
    if mad > 0.0 {
        return values.iter().map(|v| 0.6745 * (v - med) / mad).collect();
    }
    let mean_ad = deviations.iter().sum::<f64>() / deviations.len() as f64;
    if mean_ad > 0.0 {
        return values
            .iter()
            .map(|v| (v - med) / (1.253314 * mean_ad))
            .collect();
    }
    deviations.iter_mut().for_each(|d| *d = 0.0);
    deviations
}

/// Fold per-query comparisons into the aggregate improvement report.
/// Baseline-zero queries are excluded first, then the outlier policy runs
/// over the remaining improvements (a query is excluded when either
/// metric flags it). Errors if nothing survives.
pub fn aggregate(
    comparisons: Vec<QueryComparison>,
    policy: OutlierPolicy,
) -> Result<ImprovementReport, VisibilityError> {
    let mut excluded: Vec<(String, ExclusionReason)> = Vec::new();
    let mut candidates: Vec<usize> = Vec::new();
    for (i, c) in comparisons.iter().enumerate() {
        if c.is_baseline_zero() {
            excluded.push((c.query_id.clone(), ExclusionReason::BaselineZero));
        } else {
            candidates.push(i);
        }
    }
    if candidates.is_empty() {
        return Err(VisibilityError::AllExcluded);
    }
    let survivors: Vec<usize> = match policy {
        OutlierPolicy::None => candidates,
        OutlierPolicy::ModifiedZScore { threshold } => {
            let wc_values: Vec<f64> = candidates
                .iter()
                .map(|&i| comparisons[i].wc_improvement.unwrap())
                .collect();
            let adj_values: Vec<f64> = candidates
                .iter()
                .map(|&i| comparisons[i].wc_adj_improvement.unwrap())
                .collect();
            let wc_z = modified_z_scores(&wc_values);
            let adj_z = modified_z_scores(&adj_values);
            let mut keep = Vec::new();
            for (k, &i) in candidates.iter().enumerate() {
                if wc_z[k].abs() > threshold {
                    excluded.push((comparisons[i].query_id.clone(), ExclusionReason::OutlierWc));
                } else if adj_z[k].abs() > threshold {
                    excluded.push((
                        comparisons[i].query_id.clone(),
                        ExclusionReason::OutlierWcAdj,
                    ));
                } else {
                    keep.push(i);
                }
            }
            keep
        }
    };
    if survivors.is_empty() {
        return Err(VisibilityError::AllExcluded);
    }
    let n = survivors.len() as f64;
    let aggregate_wc = survivors
        .iter()
        .map(|&i| comparisons[i].wc_improvement.unwrap())
        .sum::<f64>()
        / n;
    let aggregate_wc_adj = survivors
        .iter()
        .map(|&i| comparisons[i].wc_adj_improvement.unwrap())
        .sum::<f64>()
        / n;
    Ok(ImprovementReport {
        surviving: survivors.len(),
        per_query: comparisons,
        aggregate_wc,
        aggregate_wc_adj,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    #[test]
    fn segments_plain_sentences() {
        assert_eq!(
            segment_sentences("A b. C d!", DEFAULT_ABBREVIATIONS),
            vec!["A b.", "C d!"]
        );
    }

    #[test]
    fn abbreviations_suppress_splits() {
        assert_eq!(
            segment_sentences("See Dr. Smith. Go.", DEFAULT_ABBREVIATIONS),
            vec!["See Dr. Smith.", "Go."]
        );
        assert_eq!(
            segment_sentences("Pack shoes, e.g. sandals. Then rest.", DEFAULT_ABBREVIATIONS),
            vec!["Pack shoes, e.g. sandals.", "Then rest."]
        );
    }

    #[test]
    fn decimals_and_tight_punctuation_do_not_split() {
        assert_eq!(
            segment_sentences("It rates 4.5 stars today. Wow!", DEFAULT_ABBREVIATIONS),
            vec!["It rates 4.5 stars today.", "Wow!"]
        );
    }

    #[test]
    fn trailing_text_without_terminator_is_a_sentence() {
        assert_eq!(
            segment_sentences("First one. trailing bit", DEFAULT_ABBREVIATIONS),
            vec!["First one.", "trailing bit"]
        );
    }

    #[test]
    fn segmentation_preserves_non_whitespace() {
        let text = "One two. Three four! Five? Six.";
        let joined: String = segment_sentences(text, DEFAULT_ABBREVIATIONS).join(" ");
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(squash(&joined), squash(text));
    }

    #[test]
    fn citation_forms() {
        let one = extract_citations("Beaches are warm [2].", 5);
        assert_eq!(one.indices, BTreeSet::from([2]));
        let adjacent = extract_citations("Both agree [1][3].", 5);
        assert_eq!(adjacent.indices, BTreeSet::from([1, 3]));
        let mixed = extract_citations("Sources [1, 3] and [2-4].", 5);
        assert_eq!(mixed.indices, BTreeSet::from([1, 2, 3, 4]));
    }

    #[test]
    fn out_of_range_citations_are_warned_not_kept() {
        let scan = extract_citations("Cited [7] and [2].", 5);
        assert_eq!(scan.indices, BTreeSet::from([2]));
        assert_eq!(scan.ignored, vec![7]);
    }

    #[test]
    fn non_numeric_brackets_ignored() {
        let scan = extract_citations("Left [sic] as is [see 2].", 5);
        assert!(scan.indices.is_empty());
        assert!(scan.ignored.is_empty());
    }

    #[test]
    fn word_count_excludes_markers_and_bare_punctuation() {
        assert_eq!(count_words("Beaches are warm [2]."), 3);
        assert_eq!(count_words("Seven words make a fine test sentence."), 7);
        assert_eq!(count_words("[1][2]"), 0);
        assert_eq!(count_words("Keep [sic] words"), 3);
    }

    fn fixture_response() -> ParsedResponse {
        // Four sentences of 10/8/12/6 words; source 2 cited at pos 0 and 2.
        let text = "One two three four five six seven eight nine ten [2]. \
                    Alpha beta gamma delta epsilon zeta eta theta [1]. \
                    Uno dos tres cuatro cinco seis siete ocho nueve diez once doce [2][3]. \
                    Red green blue cyan magenta yellow [4].";
        let (parsed, ignored) = ParsedResponse::parse(text, DEFAULT_ABBREVIATIONS);
        assert!(ignored.is_empty());
        assert_eq!(parsed.total, 4);
        assert_eq!(
            parsed.sentences.iter().map(|s| s.word_count).collect::<Vec<_>>(),
            vec![10, 8, 12, 6]
        );
        parsed
    }

    #[test]
    fn wc_fixture_is_22() {
        let parsed = fixture_response();
        assert_eq!(word_count_metric(&parsed, 2), 22);
        assert_eq!(word_count_metric(&parsed, 5), 0);
        assert_eq!(word_count_metric(&parsed, 1), 8);
    }

    #[test]
    fn wc_adj_fixture_is_16() {
        let parsed = fixture_response();
        let adj = adjusted_word_count_metric(&parsed, 2).unwrap();
        assert!((adj - 16.0).abs() < 1e-9);
    }

    #[test]
    fn single_sentence_weight_is_one() {
        let (parsed, _) = ParsedResponse::parse(
            "Seven words form this one whole sentence [3].",
            DEFAULT_ABBREVIATIONS,
        );
        assert_eq!(parsed.total, 1);
        assert_eq!(word_count_metric(&parsed, 3), 7);
        assert_eq!(adjusted_word_count_metric(&parsed, 3).unwrap(), 7.0);
    }

    #[test]
    fn four_sentences_pos_one_weight() {
        let text = "Zero filler words here [1]. \
                    One two three four five six seven eight nine ten [2]. \
                    Nothing cited here now. And nothing here either.";
        let (parsed, _) = ParsedResponse::parse(text, DEFAULT_ABBREVIATIONS);
        assert_eq!(parsed.total, 4);
        let adj = adjusted_word_count_metric(&parsed, 2).unwrap();
        assert!((adj - 7.5).abs() < 1e-9);
    }

    #[test]
    fn empty_response_errors_for_adjusted() {
        let (parsed, _) = ParsedResponse::parse("", DEFAULT_ABBREVIATIONS);
        assert_eq!(
            adjusted_word_count_metric(&parsed, 1),
            Err(VisibilityError::EmptyResponse)
        );
        assert_eq!(word_count_metric(&parsed, 1), 0);
    }

    fn response_citing(words_per_sentence: &[(usize, Option<usize>)]) -> ParsedResponse {
        let text: Vec<String> = words_per_sentence
            .iter()
            .map(|(words, cite)| {
                let body = (0..*words).map(|w| format!("w{w}")).collect::<Vec<_>>().join(" ");
                match cite {
                    Some(c) => format!("{body} [{c}]."),
                    None => format!("{body}."),
                }
            })
            .collect();
        let (parsed, _) = ParsedResponse::parse(&text.join(" "), DEFAULT_ABBREVIATIONS);
        parsed
    }

    #[test]
    fn identical_conditions_zero_improvement() {
        let r = response_citing(&[(5, Some(1)), (4, Some(2)), (3, None)]);
        let cmp = compare_conditions("q1", &r, &r, 1).unwrap();
        assert_eq!(cmp.wc_improvement, Some(0.0));
        assert_eq!(cmp.wc_adj_improvement, Some(0.0));
    }

    #[test]
    fn moving_citation_first_raises_only_adjusted() {
        let baseline = response_citing(&[(6, None), (6, None), (6, Some(2))]);
        let treated = response_citing(&[(6, Some(2)), (6, None), (6, None)]);
        let cmp = compare_conditions("q1", &baseline, &treated, 2).unwrap();
        assert_eq!(cmp.wc_improvement, Some(0.0));
        assert!(cmp.wc_adj_improvement.unwrap() > 0.0);
    }

    #[test]
    fn baseline_zero_is_excluded_not_error() {
        let baseline = response_citing(&[(5, None), (4, Some(2))]);
        let treated = response_citing(&[(5, Some(1)), (4, Some(2))]);
        let cmp = compare_conditions("q1", &baseline, &treated, 1).unwrap();
        assert!(cmp.is_baseline_zero());
        let report = aggregate(vec![cmp], OutlierPolicy::mad_default());
        assert_eq!(report, Err(VisibilityError::AllExcluded));
    }

    fn synthetic_comparison(query: &str, wc_imp: f64, adj_imp: f64) -> QueryComparison {
        QueryComparison {
            query_id: query.to_string(),
            target: 1,
            baseline: VisibilityScore {
                source_index: 1,
                wc: 10,
                wc_adj: 10.0,
            },
            treated: VisibilityScore {
                source_index: 1,
                wc: 12,
                wc_adj: 12.0,
            },
            baseline_share: 0.2,
            treated_share: 0.25,
            wc_improvement: Some(wc_imp),
            wc_adj_improvement: Some(adj_imp),
        }
    }

    #[test]
    fn aggregate_of_equal_improvements_is_that_value() {
        let comparisons: Vec<QueryComparison> = (0..10)
            .map(|i| synthetic_comparison(&format!("q{i}"), 0.1, 0.2))
            .collect();
        let report = aggregate(comparisons, OutlierPolicy::mad_default()).unwrap();
        assert!((report.aggregate_wc - 0.1).abs() < 1e-12);
        assert!((report.aggregate_wc_adj - 0.2).abs() < 1e-12);
        assert!(report.excluded.is_empty());
        assert_eq!(report.surviving, 10);
    }

    #[test]
    fn extreme_value_is_excluded_by_mad_policy() {
        let mut comparisons: Vec<QueryComparison> = (0..49)
            .map(|i| synthetic_comparison(&format!("q{i:02}"), 0.10, 0.10))
            .collect();
        comparisons.push(synthetic_comparison("q49", 40.0, 40.0));
        let report = aggregate(comparisons, OutlierPolicy::mad_default()).unwrap();
        assert_eq!(report.excluded.len(), 1);
        assert_eq!(report.excluded[0].0, "q49");
        assert!((report.aggregate_wc - 0.10).abs() < 1e-9);
        assert_eq!(report.surviving, 49);
    }

    #[test]
    fn none_policy_keeps_everything() {
        let mut comparisons: Vec<QueryComparison> = (0..5)
            .map(|i| synthetic_comparison(&format!("q{i}"), 0.1, 0.1))
            .collect();
        comparisons.push(synthetic_comparison("q5", 10.0, 10.0));
        let report = aggregate(comparisons, OutlierPolicy::None).unwrap();
        assert_eq!(report.surviving, 6);
        assert!(report.aggregate_wc > 1.0);
    }

    #[test]
    fn wc_adj_bounded_by_wc() {
        let parsed = fixture_response();
        for i in 1..=SOURCES_PER_QUERY {
            let score = score_source(&parsed, i).unwrap();
            assert!(score.wc_adj <= score.wc as f64 + 1e-12);
            assert!(score.wc_adj >= 0.0);
            assert_eq!(score.wc == 0, score.wc_adj == 0.0);
        }
    }
}
