//! Training-methodology mechanics that need no GPU: length-binned
//! stratified splitting with a query-level test hold-out, the
//! warmup-plus-cosine learning-rate schedule, and best-checkpoint
//! selection.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainkitError {
    #[error("length list is empty")]
    EmptyLengths,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("invalid bin edges: {0}")]
    InvalidEdges(&'static str),
    #[error("train fraction {0} outside (0, 1)")]
    InvalidTrainFraction(f64),
    #[error("duplicate item id `{0}`")]
    DuplicateItemId(String),
    #[error("need {need}, have {have}")]
    InsufficientQueries { need: usize, have: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("step {step} beyond total_steps {total}")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("checkpoint list is empty")]
    EmptyRecords,
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(&'static str),
}

/// Quantile bin edges over document lengths.
///
/// `edges` holds `k + 1` non-decreasing thresholds. Edge `i` (for `i < k`)
/// is the sorted value at rank `⌊i·n/k⌋`, i.e. the nearest-rank quantile
/// with the convention that a value landing exactly on a rank boundary
/// starts the next bin; this keeps populations exactly balanced when all
/// lengths are distinct and `n` is divisible by `k`. The final edge is the
/// maximum. Bins are half-open `[e_i, e_{i+1})` with the last bin closed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBins {
    edges: Vec<usize>,
    degenerate: bool,
}

impl LengthBins {
    /// Rebuild bins from persisted edges (manifest round-trips).
    pub fn from_edges(edges: Vec<usize>) -> Result<Self, TrainkitError> {
        if edges.len() < 2 {
            return Err(TrainkitError::InvalidEdges("need at least two edges"));
        }
        if edges.windows(2).any(|w| w[0] > w[1]) {
            return Err(TrainkitError::InvalidEdges("edges must be non-decreasing"));
        }
        let k = edges.len() - 1;
        let degenerate = edges[..k].windows(2).any(|w| w[0] == w[1]);
        Ok(LengthBins { edges, degenerate })
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    /// True when some half-open bin is empty because of duplicate edges
    /// (always the case when `k` exceeds the number of distinct lengths).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    /// Bin index for a length. Values outside the observed range clamp
    /// into the first/last bin.
    pub fn assign(&self, length: usize) -> usize {
        let k = self.bin_count();
        let below_or_at = self.edges[..k].partition_point(|e| *e <= length);
        below_or_at.saturating_sub(1).min(k - 1)
    }
}

/// Nearest-rank quantile edges for `k` equiprobable length bins.
pub fn make_length_bins(lengths: &[usize], k: usize) -> Result<LengthBins, TrainkitError> {
    if lengths.is_empty() {
        return Err(TrainkitError::EmptyLengths);
    }
    if k == 0 {
        return Err(TrainkitError::ZeroBins);
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut edges = Vec::with_capacity(k + 1);
    for i in 0..k {
        edges.push(sorted[i * n / k]);
    }
    edges.push(sorted[n - 1]);
    let degenerate = edges[..k].windows(2).any(|w| w[0] == w[1]);
    Ok(LengthBins { edges, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Bin edges, per-item membership and the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub bin_edges: Vec<usize>,
    pub membership: BTreeMap<String, Split>,
    pub seed: u64,
    pub degenerate_bins: bool,
}

impl SplitAssignment {
    pub fn count(&self, split: Split) -> usize {
        self.membership.values().filter(|s| **s == split).count()
    }
}

/// Within each bin, a seeded uniform shuffle sends `⌊fraction·n + 0.5⌋`
/// items (round half up) to train and the rest to validation.
pub fn stratified_split(
    items: &[(String, usize)],
    bins: &LengthBins,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment, TrainkitError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TrainkitError::InvalidTrainFraction(train_fraction));
    }
    let mut membership = BTreeMap::new();
    let mut per_bin: Vec<Vec<usize>> = alloc::vec![Vec::new(); bins.bin_count()];
    for (idx, (id, length)) in items.iter().enumerate() {
        if membership.insert(id.clone(), Split::Validation).is_some() {
            return Err(TrainkitError::DuplicateItemId(id.clone()));
        }
        per_bin[bins.assign(*length)].push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for bin_items in &mut per_bin {
        bin_items.shuffle(&mut rng);
        let n_train = libm::floor(bin_items.len() as f64 * train_fraction + 0.5) as usize;
        for &idx in bin_items.iter().take(n_train) {
            membership.insert(items[idx].0.clone(), Split::Train);
        }
    }
    Ok(SplitAssignment {
        bin_edges: bins.edges().to_vec(),
        membership,
        seed,
        degenerate_bins: bins.is_degenerate(),
    })
}

/// Result of the query-level test hold-out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldOut {
    /// Selected query ids, in their original input order.
    pub query_ids: Vec<String>,
    /// Exactly `n_queries × docs_per_query` item ids.
    pub item_ids: Vec<String>,
}

/// Reserve `n_queries` queries (each contributing its first
/// `docs_per_query` items) as the test set. Selected queries leave the
/// train/validation pool entirely.
pub fn hold_out_test(
    queries: &[(String, Vec<String>)],
    docs_per_query: usize,
    n_queries: usize,
    seed: u64,
) -> Result<HoldOut, TrainkitError> {
    let eligible: Vec<usize> = queries
        .iter()
        .enumerate()
        .filter(|(_, (_, docs))| docs.len() >= docs_per_query)
        .map(|(i, _)| i)
        .collect();
    if eligible.len() < n_queries {
        return Err(TrainkitError::InsufficientQueries {
            need: n_queries,
            have: eligible.len(),
        });
    }
    let mut pool = eligible;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let mut chosen: Vec<usize> = pool.into_iter().take(n_queries).collect();
    chosen.sort_unstable();
    let mut query_ids = Vec::with_capacity(n_queries);
    let mut item_ids = Vec::with_capacity(n_queries * docs_per_query);
    for idx in chosen {
        let (id, docs) = &queries[idx];
        query_ids.push(id.clone());
        item_ids.extend(docs.iter().take(docs_per_query).cloned());
    }
    Ok(HoldOut {
        query_ids,
        item_ids,
    })
}

/// One dataset row as seen by the splitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitItem {
    pub id: String,
    pub query_id: String,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub bins: usize,
    pub train_fraction: f64,
    pub test_queries: usize,
    pub docs_per_query: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            bins: 10,
            train_fraction: 0.8,
            test_queries: 50,
            docs_per_query: 5,
            seed: 0,
        }
    }
}

/// Full split: query-level hold-out first, then equiprobable length bins
/// and the stratified train/validation shuffle over the remaining pool.
pub fn split_dataset(
    items: &[SplitItem],
    cfg: &SplitConfig,
) -> Result<SplitAssignment, TrainkitError> {
    let mut query_order: Vec<String> = Vec::new();
    let mut by_query: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for item in items {
        let entry = by_query.entry(item.query_id.clone()).or_default();
        if entry.is_empty() {
            query_order.push(item.query_id.clone());
        }
        entry.push(item.id.clone());
    }
    let queries: Vec<(String, Vec<String>)> = query_order
        .into_iter()
        .map(|q| {
            let docs = by_query[&q].clone();
            (q, docs)
        })
        .collect();
    let held = hold_out_test(&queries, cfg.docs_per_query, cfg.test_queries, cfg.seed)?;
    let test_queries: BTreeSet<&String> = held.query_ids.iter().collect();
    let pool: Vec<(String, usize)> = items
        .iter()
        .filter(|item| !test_queries.contains(&item.query_id))
        .map(|item| (item.id.clone(), item.length))
        .collect();
    let lengths: Vec<usize> = pool.iter().map(|(_, l)| *l).collect();
    let bins = make_length_bins(&lengths, cfg.bins)?;
    let mut assignment = stratified_split(&pool, &bins, cfg.train_fraction, cfg.seed)?;
    for id in held.item_ids {
        assignment.membership.insert(id, Split::Test);
    }
    Ok(assignment)
}

/// Warmup-plus-cosine learning-rate schedule parameters. `weight_decay`
/// is carried for exported training configs only; no optimiser lives here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrScheduleConfig {
    pub target_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub weight_decay: f64,
}

impl LrScheduleConfig {
    pub const DEFAULT_TARGET_LR: f64 = 3e-5;
    pub const DEFAULT_WARMUP_STEPS: u64 = 250;
    pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;

    pub fn new(
        target_lr: f64,
        warmup_steps: u64,
        total_steps: u64,
        weight_decay: f64,
    ) -> Result<Self, TrainkitError> {
        if !(target_lr > 0.0) {
            return Err(TrainkitError::InvalidSchedule("target_lr must be positive"));
        }
        if warmup_steps == 0 || warmup_steps >= total_steps {
            return Err(TrainkitError::InvalidSchedule(
                "need 0 < warmup_steps < total_steps",
            ));
        }
        if !(weight_decay >= 0.0) {
            return Err(TrainkitError::InvalidSchedule(
                "weight_decay must be non-negative",
            ));
        }
        Ok(LrScheduleConfig {
            target_lr,
            warmup_steps,
            total_steps,
            weight_decay,
        })
    }

    /// Default target/warmup/decay constants with the given horizon.
    pub fn with_total_steps(total_steps: u64) -> Result<Self, TrainkitError> {
        LrScheduleConfig::new(
            Self::DEFAULT_TARGET_LR,
            Self::DEFAULT_WARMUP_STEPS,
            total_steps,
            Self::DEFAULT_WEIGHT_DECAY,
        )
    }
}

/// Linear rise to `target_lr` over the warmup, then cosine decay to zero
/// at `total_steps`. Continuous at the warmup boundary.
pub fn lr_at_step(step: u64, cfg: &LrScheduleConfig) -> Result<f64, TrainkitError> {
    if step > cfg.total_steps {
        return Err(TrainkitError::StepOutOfRange {
            step,
            total: cfg.total_steps,
        });
    }
    if step <= cfg.warmup_steps {
        return Ok(cfg.target_lr * step as f64 / cfg.warmup_steps as f64);
    }
    let progress =
        (step - cfg.warmup_steps) as f64 / (cfg.total_steps - cfg.warmup_steps) as f64;
    Ok(cfg.target_lr * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress)))
}

/// Epoch number plus its mean validation cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub epoch: u32,
    pub validation_loss: f64,
}

impl CheckpointRecord {
    pub fn new(epoch: u32, validation_loss: f64) -> Result<Self, TrainkitError> {
        if epoch == 0 {
            return Err(TrainkitError::InvalidCheckpoint("epoch must be >= 1"));
        }
        if !validation_loss.is_finite() || validation_loss < 0.0 {
            return Err(TrainkitError::InvalidCheckpoint(
                "validation_loss must be finite and >= 0",
            ));
        }
        Ok(CheckpointRecord {
            epoch,
            validation_loss,
        })
    }
}

/// Epoch with the smallest validation loss; ties break to the earliest
/// epoch, so the result is invariant under permutation of the records.
pub fn select_best_checkpoint(records: &[CheckpointRecord]) -> Result<u32, TrainkitError> {
    records
        .iter()
        .fold(None::<CheckpointRecord>, |best, r| match best {
            None => Some(*r),
            Some(b)
                if r.validation_loss < b.validation_loss
                    || (r.validation_loss == b.validation_loss && r.epoch < b.epoch) =>
            {
                Some(*r)
            }
            Some(b) => Some(b),
        })
        .map(|r| r.epoch)
        .ok_or(TrainkitError::EmptyRecords)
}
