//! Brute-force oracle equivalence and position properties for the
//! visibility metrics, driven through the full text parser.

use std::collections::BTreeSet;

use geobench_core::visibility::{
    adjusted_word_count_metric, segment_sentences, word_count_metric, ParsedResponse,
    DEFAULT_ABBREVIATIONS, SOURCES_PER_QUERY,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const WORDS: [&str; 12] = [
    "coast", "museum", "harbour", "market", "trail", "castle", "garden", "ferry", "plaza",
    "vineyard", "lagoon", "bridge",
];

/// A synthetic response with known ground truth per sentence.
struct SyntheticResponse {
    text: String,
    truth: Vec<(usize, BTreeSet<usize>)>,
}

fn random_response(rng: &mut StdRng) -> SyntheticResponse {
    let n_sentences = rng.random_range(1..=8);
    let mut truth = Vec::with_capacity(n_sentences);
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let n_words = rng.random_range(1..=12);
        let words: Vec<&str> = (0..n_words)
            .map(|_| WORDS[rng.random_range(0..WORDS.len())])
            .collect();
        let mut citations = BTreeSet::new();
        for source in 1..=SOURCES_PER_QUERY {
            if rng.random_bool(0.35) {
                citations.insert(source);
            }
        }
        let markers: String = citations.iter().map(|c| format!("[{c}]")).collect();
        let sentence = if markers.is_empty() {
            format!("{}.", words.join(" "))
        } else {
            format!("{} {markers}.", words.join(" "))
        };
        truth.push((n_words, citations));
        sentences.push(sentence);
    }
    SyntheticResponse {
        text: sentences.join(" "),
        truth,
    }
}

/// Independent enumerator over (sentence, source) pairs.
fn oracle_scores(truth: &[(usize, BTreeSet<usize>)], source: usize) -> (u64, f64) {
    let total = truth.len() as f64;
    let mut wc = 0u64;
    let mut wc_adj = 0.0;
    for (pos, (words, citations)) in truth.iter().enumerate() {
        if citations.contains(&source) {
            wc += *words as u64;
            wc_adj += *words as f64 * (1.0 - pos as f64 / total);
        }
    }
    (wc, wc_adj)
}

#[test]
fn parser_and_metrics_match_oracle_on_random_responses() {
    let mut rng = StdRng::seed_from_u64(0x51b);
    for trial in 0..500 {
        let synthetic = random_response(&mut rng);
        let (parsed, ignored) = ParsedResponse::parse(&synthetic.text, DEFAULT_ABBREVIATIONS);
        assert!(ignored.is_empty());
        assert_eq!(
            parsed.total,
            synthetic.truth.len(),
            "trial {trial}: segmentation diverged on {:?}",
            synthetic.text
        );
        for source in 1..=SOURCES_PER_QUERY {
            let (expected_wc, expected_adj) = oracle_scores(&synthetic.truth, source);
            assert_eq!(word_count_metric(&parsed, source), expected_wc);
            let adj = adjusted_word_count_metric(&parsed, source).unwrap();
            assert!(
                (adj - expected_adj).abs() < 1e-9,
                "trial {trial} source {source}: {adj} vs {expected_adj}"
            );
        }
    }
}

#[test]
fn moving_a_citing_sentence_earlier_raises_wc_adj() {
    let mut rng = StdRng::seed_from_u64(0xadf);
    let mut exercised = 0usize;
    while exercised < 200 {
        let synthetic = random_response(&mut rng);
        let truth = &synthetic.truth;
        let target = rng.random_range(1..=SOURCES_PER_QUERY);
        // A citing sentence whose predecessor does not cite the target.
        let Some(pos) = (1..truth.len()).find(|&p| {
            truth[p].1.contains(&target) && !truth[p - 1].1.contains(&target)
        }) else {
            continue;
        };
        let (wc_before, adj_before) = oracle_scores(truth, target);
        let mut moved = truth.clone();
        moved.swap(pos - 1, pos);
        let (wc_after, adj_after) = oracle_scores(&moved, target);
        assert_eq!(wc_before, wc_after);
        assert!(
            adj_after > adj_before,
            "moving pos {pos} earlier should raise wc_adj ({adj_before} -> {adj_after})"
        );
        // And the parser agrees with the mutated layout.
        let rebuilt: Vec<String> = moved
            .iter()
            .map(|(words, cits)| {
                let body = vec!["word"; *words].join(" ");
                let markers: String = cits.iter().map(|c| format!("[{c}]")).collect();
                if markers.is_empty() {
                    format!("{body}.")
                } else {
                    format!("{body} {markers}.")
                }
            })
            .collect();
        let (parsed, _) = ParsedResponse::parse(&rebuilt.join(" "), DEFAULT_ABBREVIATIONS);
        let adj_parsed = adjusted_word_count_metric(&parsed, target).unwrap();
        assert!((adj_parsed - adj_after).abs() < 1e-9);
        exercised += 1;
    }
}

#[test]
fn segmentation_round_trips_many_random_sentences() {
    let mut rng = StdRng::seed_from_u64(0x5e9);
    let terminators = ['.', '!', '?'];
    let sentences: Vec<String> = (0..500)
        .map(|_| {
            let n_words = rng.random_range(1..=10);
            let words: Vec<&str> = (0..n_words)
                .map(|_| WORDS[rng.random_range(0..WORDS.len())])
                .collect();
            let t = terminators[rng.random_range(0..terminators.len())];
            format!("{}{t}", words.join(" "))
        })
        .collect();
    let text = sentences.join(" ");
    let segments = segment_sentences(&text, DEFAULT_ABBREVIATIONS);
    assert_eq!(segments.len(), 500);
    assert_eq!(segments, sentences);
    let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    assert_eq!(squash(&segments.join(" ")), squash(&text));
}

#[test]
fn multi_citation_sentences_credit_every_source_fully() {
    let text = "Shared evidence sentence here [1][2][3]. Solo line for one [1].";
    let (parsed, _) = ParsedResponse::parse(text, DEFAULT_ABBREVIATIONS);
    let wc_sum: u64 = (1..=SOURCES_PER_QUERY)
        .map(|i| word_count_metric(&parsed, i))
        .sum();
    let cited_words: u64 = parsed
        .sentences
        .iter()
        .filter(|s| !s.citations.is_empty())
        .map(|s| s.word_count as u64)
        .sum();
    // Multi-citation sentences count fully toward each cited source.
    assert!(wc_sum > cited_words);
    assert_eq!(word_count_metric(&parsed, 2), 4);
    assert_eq!(word_count_metric(&parsed, 1), 8);
}
