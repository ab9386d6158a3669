//! Core algorithms for generative engine optimisation (GEO) benchmarking.
//!
//! Everything in this crate is pure computation over owned data: content
//! extraction and quality gates, length-stratified split mechanics, the
//! text-quality metrics (ROUGE-L, BLEU, length ratio, perplexity), a
//! desk-scale encoder/decoder math kernel with the five denoising
//! transforms and constrained beam decoding, and the citation-visibility
//! metrics wc / wc_adj with their aggregation rules.
//!
//! The crate is `no_std` (alloc required). File formats, the engine
//! client and the CLI live in the `geobench` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod seqcore;
pub mod textmetrics;
pub mod trainkit;
pub mod unigram;
pub mod visibility;
