//! Randomised invariants for the sequence-model kernel, the noising
//! transforms, constrained decoding, splitting and the corpus gates.

use std::collections::BTreeSet;

use geobench_core::corpus::{extract_text, trim_content, ExtractConfig};
use geobench_core::seqcore::{
    apply_noise, decode, masked_attention, softmax_rows, DecodeConfig, Matrix, ModelDims,
    NoiseKind, NoiseSpec, TransformerWeights,
};
use geobench_core::trainkit::{
    lr_at_step, make_length_bins, split_dataset, stratified_split, LrScheduleConfig, Split,
    SplitConfig, SplitItem,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn softmax_rows_sum_to_one_on_random_scores() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..50 {
        let rows = rng.random_range(1..6);
        let cols = rng.random_range(1..8);
        let scores = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-30.0..30.0));
        let weights = softmax_rows(&scores);
        for r in 0..rows {
            let sum: f64 = weights.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(weights.row(r).iter().all(|w| *w >= 0.0));
        }
    }
}

#[test]
fn masked_attention_is_causal_on_random_matrices() {
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..100 {
        let t = rng.random_range(2..7);
        let d = rng.random_range(1..5);
        let q = Matrix::from_fn(t, d, |_, _| rng.random_range(-2.0..2.0));
        let k = Matrix::from_fn(t, d, |_, _| rng.random_range(-2.0..2.0));
        let v = Matrix::from_fn(t, d, |_, _| rng.random_range(-2.0..2.0));
        let base = masked_attention(&q, &k, &v).unwrap();
        let probe = rng.random_range(0..t - 1);
        // Perturb K and V strictly after `probe`.
        let mut k2 = k.clone();
        let mut v2 = v.clone();
        for row in (probe + 1)..t {
            for c in 0..d {
                k2.set(row, c, rng.random_range(-2.0..2.0));
                v2.set(row, c, rng.random_range(-2.0..2.0));
            }
        }
        let perturbed = masked_attention(&q, &k2, &v2).unwrap();
        for row in 0..=probe {
            assert_eq!(base.row(row), perturbed.row(row), "row {row} changed");
        }
    }
}

#[test]
fn decoder_stack_is_causal_over_many_inits() {
    let dims = ModelDims::new(8, 2, 16, 2, 32, 0.1, 0.02).unwrap();
    for seed in 0..25 {
        let weights = TransformerWeights::random(&dims, 12, seed);
        let enc = weights
            .encoder_stack(&weights.embed_tokens(&[1, 2, 3]).unwrap())
            .unwrap();
        let ids = [4u32, 5, 6, 7];
        let base = weights
            .decoder_stack(&weights.embed_tokens(&ids).unwrap(), &enc)
            .unwrap();
        let mut changed = ids;
        changed[2] = 11;
        let out = weights
            .decoder_stack(&weights.embed_tokens(&changed).unwrap(), &enc)
            .unwrap();
        for row in 0..2 {
            assert_eq!(base.row(row), out.row(row));
        }
        assert!(base.is_finite());
    }
}

/// Pseudo-random but prefix-deterministic scorer over a small vocabulary.
fn hashed_scorer(salt: u64, vocab: usize) -> impl Fn(&[u32]) -> Vec<f64> {
    move |prefix: &[u32]| {
        let mut h = salt ^ 0x9e3779b97f4a7c15;
        for t in prefix {
            h = h.wrapping_mul(0x100000001b3).wrapping_add(u64::from(*t));
        }
        (0..vocab)
            .map(|v| {
                let x = h.wrapping_mul(31).wrapping_add(v as u64).wrapping_mul(0x2545f4914f6cdd1d);
                -((x % 1000) as f64 / 250.0) - 0.001
            })
            .collect()
    }
}

#[test]
fn decode_never_repeats_ngrams_over_random_scorers() {
    let cfg = DecodeConfig::new(16, 12, 1.1, 3, 2).unwrap();
    for salt in 0..300u64 {
        let scorer = hashed_scorer(salt, 6);
        let out = decode(&scorer, &cfg, None).unwrap();
        assert!(out.len() <= cfg.max_out);
        let windows: Vec<&[u32]> = out.windows(cfg.no_repeat_ngram).collect();
        for (i, w) in windows.iter().enumerate() {
            assert!(!windows[i + 1..].contains(w), "repeat in {out:?} (salt {salt})");
        }
    }
}

proptest! {
    #[test]
    fn noise_is_deterministic_and_preserves_multisets(
        tokens in proptest::collection::vec("[a-f]{1,4}", 0..30),
        seed in 0u64..1000,
    ) {
        for kind in [NoiseKind::SentencePermute, NoiseKind::DocumentRotate] {
            let spec = NoiseSpec::new(kind, 0.3, 3.0, seed).unwrap();
            let a = apply_noise(&tokens, &spec, "<mask>".to_string());
            let b = apply_noise(&tokens, &spec, "<mask>".to_string());
            prop_assert_eq!(&a, &b);
            let mut sa = a.clone();
            let mut st = tokens.clone();
            sa.sort();
            st.sort();
            prop_assert_eq!(sa, st);
        }
        let del = NoiseSpec::new(NoiseKind::TokenDelete, 0.5, 3.0, seed).unwrap();
        prop_assert!(apply_noise(&tokens, &del, "<mask>".to_string()).len() <= tokens.len());
        let mask = NoiseSpec::new(NoiseKind::TokenMask, 0.5, 3.0, seed).unwrap();
        prop_assert_eq!(apply_noise(&tokens, &mask, "<mask>".to_string()).len(), tokens.len());
    }

    #[test]
    fn trim_is_idempotent_and_bounded(text in "\\PC{0,600}", limit in 1usize..200) {
        let once = trim_content(&text, limit);
        prop_assert!(once.chars().count() <= limit);
        prop_assert_eq!(trim_content(once, limit), once);
    }

    #[test]
    fn extracted_text_never_leaks_script_or_style(
        body in "[a-zA-Z ]{0,40}",
        script in "[a-zA-Z(){};= ]{0,40}",
        style in "[a-zA-Z.{}:; ]{0,40}",
    ) {
        let html = format!(
            "<div><p>{body}</p><script>{script}</script><style>{style}</style></div>"
        );
        let out = extract_text(&html, &ExtractConfig::default()).to_lowercase();
        prop_assert!(!out.contains("<script"));
        prop_assert!(!out.contains("<style"));
    }
}

#[test]
fn lr_schedule_is_continuous_and_monotone_on_grid() {
    let cfg = LrScheduleConfig::with_total_steps(10_000).unwrap();
    let mut previous = -1.0f64;
    for step in 0..=cfg.warmup_steps {
        let lr = lr_at_step(step, &cfg).unwrap();
        assert!(lr >= previous);
        previous = lr;
    }
    assert!((previous - cfg.target_lr).abs() < 1e-18);
    for step in cfg.warmup_steps..=cfg.total_steps {
        let lr = lr_at_step(step, &cfg).unwrap();
        assert!(lr <= previous + 1e-18);
        assert!(lr >= 0.0);
        previous = lr;
    }
    assert!(previous.abs() < 1e-12);
}

#[test]
fn split_is_deterministic_stratified_and_query_disjoint() {
    let mut rng = StdRng::seed_from_u64(41);
    let mut items = Vec::new();
    for q in 0..30 {
        for d in 0..5 {
            items.push(SplitItem {
                id: format!("q{q:02}#{d}"),
                query_id: format!("q{q:02}"),
                length: rng.random_range(120..5000),
            });
        }
    }
    let cfg = SplitConfig {
        bins: 10,
        test_queries: 6,
        seed: 99,
        ..SplitConfig::default()
    };
    let a = split_dataset(&items, &cfg).unwrap();
    let b = split_dataset(&items, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.count(Split::Test), 30);
    let test_queries: BTreeSet<&str> = a
        .membership
        .iter()
        .filter(|(_, s)| **s == Split::Test)
        .map(|(id, _)| id.split('#').next().unwrap())
        .collect();
    assert_eq!(test_queries.len(), 6);
    for (id, split) in &a.membership {
        if *split != Split::Test {
            assert!(!test_queries.contains(id.split('#').next().unwrap()));
        }
    }
}

#[test]
fn per_bin_train_fraction_is_within_tolerance() {
    let mut rng = StdRng::seed_from_u64(4242);
    let lengths: Vec<usize> = (0..600).map(|_| rng.random_range(100..9000)).collect();
    let items: Vec<(String, usize)> = lengths
        .iter()
        .enumerate()
        .map(|(i, l)| (format!("i{i:03}"), *l))
        .collect();
    let bins = make_length_bins(&lengths, 10).unwrap();
    let assignment = stratified_split(&items, &bins, 0.8, 7).unwrap();
    for bin in 0..10 {
        let members: Vec<&String> = items
            .iter()
            .filter(|(_, l)| bins.assign(*l) == bin)
            .map(|(id, _)| id)
            .collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        let train = members
            .iter()
            .filter(|id| assignment.membership[**id] == Split::Train)
            .count();
        let observed = train as f64 / n as f64;
        assert!(
            (observed - 0.8).abs() <= 1.0 / n as f64 + 1e-12,
            "bin {bin}: {observed} over {n} items"
        );
    }
}
