//! The three engine-driven operations: query generation, three-phase
//! content optimisation, and cited answer synthesis.

use geobench_core::corpus::{ContentPair, QueryRecord};
use geobench_core::visibility::SOURCES_PER_QUERY;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineClient, EngineError, Task};

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("a source set needs exactly {SOURCES_PER_QUERY} sources, got {0}")]
    WrongSourceCount(usize),
    #[error("source {0} has no optimised text to swap in")]
    MissingOptimized(usize),
    #[error("source index {0} outside 1..={SOURCES_PER_QUERY}")]
    BadSourceIndex(usize),
    #[error("input text is empty")]
    EmptyInput,
    #[error("invalid query text: {0}")]
    BadQuery(#[from] geobench_core::corpus::CorpusError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A query with its five ordered sources; citation index `i` refers to
/// `sources[i-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSet {
    pub query: QueryRecord,
    sources: Vec<ContentPair>,
}

impl SourceSet {
    pub fn new(query: QueryRecord, sources: Vec<ContentPair>) -> Result<Self, OpsError> {
        if sources.len() != SOURCES_PER_QUERY {
            return Err(OpsError::WrongSourceCount(sources.len()));
        }
        Ok(SourceSet { query, sources })
    }

    pub fn sources(&self) -> &[ContentPair] {
        &self.sources
    }

    /// The treated condition: source `index` (1-based) presented with its
    /// optimised text instead of the raw one.
    pub fn with_optimized_replacement(&self, index: usize) -> Result<SourceSet, OpsError> {
        if index == 0 || index > SOURCES_PER_QUERY {
            return Err(OpsError::BadSourceIndex(index));
        }
        let mut sources = self.sources.clone();
        let slot = &mut sources[index - 1];
        let optimized = slot
            .optimized_text
            .clone()
            .ok_or(OpsError::MissingOptimized(index))?;
        slot.source_text = optimized;
        SourceSet::new(self.query.clone(), sources)
    }

    /// The numbered source block fed to the answer prompt: always exactly
    /// five `[i] text` entries.
    pub fn prompt_block(&self) -> String {
        self.sources
            .iter()
            .enumerate()
            .map(|(i, pair)| format!("[{}] {}", i + 1, pair.source_text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Generate up to `count` queries for one subcategory. Exact duplicates
/// (case-folded, whitespace-collapsed) are removed, so fewer than `count`
/// may come back; that is logged, not an error.
pub fn generate_queries(
    client: &EngineClient,
    subcategory: &str,
    count: usize,
    id_prefix: &str,
) -> Result<Vec<QueryRecord>, OpsError> {
    let messages = Task::GenerateQueries.render(&[
        ("subcategory", subcategory),
        ("count", &count.to_string()),
    ]);
    let completion = client.request(messages)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut queries = Vec::new();
    for line in completion.lines() {
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let key = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
        if !seen.insert(key) {
            continue;
        }
        let id = format!("{id_prefix}{:03}", queries.len());
        queries.push(QueryRecord::new(&id, subcategory, text)?);
        if queries.len() == count {
            break;
        }
    }
    if queries.len() < count {
        log::warn!(
            "engine produced {} unique queries of {count} requested for `{subcategory}`",
            queries.len()
        );
    }
    Ok(queries)
}

/// The three optimisation phases in order.
pub const OPTIMIZE_PHASES: [Task; 3] = [
    Task::OptimizeCitations,
    Task::OptimizeFluency,
    Task::OptimizeStatistics,
];

/// All three intermediate texts of one optimisation run; `final_text`
/// always equals the last phase output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimisationTrace {
    pub input_text: String,
    pub phase_outputs: Vec<String>,
    pub final_text: String,
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("phase {phase} ({name}) failed: {source}")]
    PhaseFailed {
        phase: usize,
        name: &'static str,
        partial: Vec<String>,
        #[source]
        source: EngineError,
    },
    #[error("phase {phase} ({name}) returned empty output")]
    PhaseEmpty {
        phase: usize,
        name: &'static str,
        partial: Vec<String>,
    },
}

impl OptimizeError {
    /// Phase outputs accumulated before the failure.
    pub fn partial(&self) -> &[String] {
        match self {
            OptimizeError::EmptyInput => &[],
            OptimizeError::PhaseFailed { partial, .. } => partial,
            OptimizeError::PhaseEmpty { partial, .. } => partial,
        }
    }
}

/// Run citation integration, fluency simplification and statistics
/// placement in sequence, each phase consuming the previous output. Any
/// failing or empty phase invalidates the pair; the trace so far rides on
/// the error.
pub fn optimize_content(
    client: &EngineClient,
    source_text: &str,
) -> Result<OptimisationTrace, OptimizeError> {
    if source_text.trim().is_empty() {
        return Err(OptimizeError::EmptyInput);
    }
    let mut phase_outputs: Vec<String> = Vec::with_capacity(OPTIMIZE_PHASES.len());
    let mut current = source_text.to_string();
    for (phase, task) in OPTIMIZE_PHASES.iter().enumerate() {
        let messages = task.render(&[("content", &current)]);
        let output = client.request(messages).map_err(|source| {
            OptimizeError::PhaseFailed {
                phase: phase + 1,
                name: task.name(),
                partial: phase_outputs.clone(),
                source,
            }
        })?;
        if output.trim().is_empty() {
            return Err(OptimizeError::PhaseEmpty {
                phase: phase + 1,
                name: task.name(),
                partial: phase_outputs,
            });
        }
        phase_outputs.push(output.clone());
        current = output;
    }
    Ok(OptimisationTrace {
        input_text: source_text.to_string(),
        final_text: current,
        phase_outputs,
    })
}

/// Ask the engine to answer the query from the five numbered sources,
/// citing numerically. The raw answer comes back unmodified for parsing.
pub fn answer_query(client: &EngineClient, source_set: &SourceSet) -> Result<String, OpsError> {
    let block = source_set.prompt_block();
    let messages = Task::AnswerQuery.render(&[
        ("query", source_set.query.text.as_str()),
        ("sources", block.as_str()),
    ]);
    Ok(client.request(messages)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::mock::MockTransport;
    use crate::engine::{ChatRequest, EngineConfig, EngineTransport, TransportError};

    fn mock_client(seed: u64) -> EngineClient {
        let config = EngineConfig {
            pacing_interval_ms: 0,
            ..EngineConfig::default()
        };
        EngineClient::new(Box::new(MockTransport::new(seed)), config)
    }

    fn pair(i: usize, text: &str, optimized: Option<&str>) -> ContentPair {
        ContentPair {
            query_id: "q0".to_string(),
            url: format!("https://example.com/{i}"),
            source_text: text.to_string(),
            optimized_text: optimized.map(str::to_string),
        }
    }

    fn query() -> QueryRecord {
        QueryRecord::new("q0", "beaches", "best beaches near Lisbon").unwrap()
    }

    #[test]
    fn source_set_requires_exactly_five() {
        let sources = (0..4).map(|i| pair(i, "text.", None)).collect();
        assert!(matches!(
            SourceSet::new(query(), sources),
            Err(OpsError::WrongSourceCount(4))
        ));
    }

    #[test]
    fn prompt_block_enumerates_one_to_five() {
        let sources = (0..5).map(|i| pair(i, &format!("Text {i}."), None)).collect();
        let set = SourceSet::new(query(), sources).unwrap();
        let block = set.prompt_block();
        for i in 1..=5 {
            assert!(block.contains(&format!("[{i}] ")));
        }
        assert!(!block.contains("[6]"));
    }

    #[test]
    fn replacement_swaps_in_optimized_text() {
        let sources = (0..5)
            .map(|i| pair(i, "raw text.", Some("optimised text.")))
            .collect();
        let set = SourceSet::new(query(), sources).unwrap();
        let treated = set.with_optimized_replacement(3).unwrap();
        assert_eq!(treated.sources()[2].source_text, "optimised text.");
        assert_eq!(treated.sources()[0].source_text, "raw text.");
        assert!(matches!(
            set.with_optimized_replacement(6),
            Err(OpsError::BadSourceIndex(6))
        ));
        let bare = SourceSet::new(query(), (0..5).map(|i| pair(i, "raw.", None)).collect()).unwrap();
        assert!(matches!(
            bare.with_optimized_replacement(1),
            Err(OpsError::MissingOptimized(1))
        ));
    }

    #[test]
    fn mock_generates_distinct_queries() {
        let client = mock_client(5);
        let queries = generate_queries(&client, "beach holidays", 5, "q-beach-").unwrap();
        assert_eq!(queries.len(), 5);
        let texts: std::collections::BTreeSet<&str> =
            queries.iter().map(|q| q.text.as_str()).collect();
        assert_eq!(texts.len(), 5);
        assert_eq!(queries[0].id, "q-beach-000");
        assert_eq!(queries[0].subcategory, "beach holidays");
        // Same seed, same queries.
        let again = generate_queries(&mock_client(5), "beach holidays", 5, "q-beach-").unwrap();
        assert_eq!(queries, again);
    }

    #[test]
    fn duplicate_completions_are_deduplicated() {
        struct Duplicating;
        impl EngineTransport for Duplicating {
            fn complete(&self, _r: &ChatRequest) -> Result<String, TransportError> {
                Ok("Best beaches?\nbest   BEACHES?\nQuiet coves?".to_string())
            }
            fn cache_salt(&self) -> String {
                "dup".to_string()
            }
        }
        let client = EngineClient::new(
            Box::new(Duplicating),
            EngineConfig {
                pacing_interval_ms: 0,
                ..EngineConfig::default()
            },
        );
        let queries = generate_queries(&client, "beaches", 3, "q-").unwrap();
        assert_eq!(queries.len(), 2);
    }

    #[test]
    fn failing_engine_errors_after_max_attempts() {
        struct AlwaysFails;
        impl EngineTransport for AlwaysFails {
            fn complete(&self, _r: &ChatRequest) -> Result<String, TransportError> {
                Err(TransportError::Failed("boom".to_string()))
            }
            fn cache_salt(&self) -> String {
                "fail".to_string()
            }
        }
        let client = EngineClient::new(
            Box::new(AlwaysFails),
            EngineConfig {
                pacing_interval_ms: 0,
                max_attempts: 2,
                ..EngineConfig::default()
            },
        );
        let err = generate_queries(&client, "beaches", 3, "q-").unwrap_err();
        assert!(matches!(
            err,
            OpsError::Engine(EngineError::Exhausted { attempts: 2, .. })
        ));
    }

    #[test]
    fn optimize_chains_three_phases() {
        let client = mock_client(1);
        let trace = optimize_content(&client, "Lisbon has mild winters. Trams run daily.").unwrap();
        assert_eq!(trace.phase_outputs.len(), 3);
        assert_eq!(trace.final_text, trace.phase_outputs[2]);
        // Phase chaining: each output feeds the next phase and survives in
        // the later outputs (the mock only prepends/appends).
        assert!(trace.phase_outputs[1].contains(&trace.phase_outputs[0]));
        assert!(trace.phase_outputs[0].contains("Global Travel Institute"));
        assert!(trace.phase_outputs[2].contains("% of visitors"));
        assert!(trace.final_text.starts_with("## Overview"));
    }

    #[test]
    fn optimize_empty_input_is_a_precondition_error() {
        let client = mock_client(1);
        assert!(matches!(
            optimize_content(&client, "  "),
            Err(OptimizeError::EmptyInput)
        ));
    }

    #[test]
    fn phase_two_failure_keeps_phase_one_in_trace() {
        struct FailsSecond {
            calls: std::sync::atomic::AtomicU32,
        }
        impl EngineTransport for FailsSecond {
            fn complete(&self, _r: &ChatRequest) -> Result<String, TransportError> {
                let n = self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if n == 0 {
                    Ok("phase one output.".to_string())
                } else {
                    Err(TransportError::Failed("down".to_string()))
                }
            }
            fn cache_salt(&self) -> String {
                "fails-second".to_string()
            }
        }
        let client = EngineClient::new(
            Box::new(FailsSecond {
                calls: std::sync::atomic::AtomicU32::new(0),
            }),
            EngineConfig {
                pacing_interval_ms: 0,
                max_attempts: 1,
                ..EngineConfig::default()
            },
        );
        let err = optimize_content(&client, "raw text.").unwrap_err();
        match &err {
            OptimizeError::PhaseFailed { phase, partial, .. } => {
                assert_eq!(*phase, 2);
                assert_eq!(partial.as_slice(), ["phase one output.".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mock_answer_is_extractive_with_markers() {
        let client = mock_client(2);
        let sources = (0..5)
            .map(|i| pair(i, &format!("Source {i} first sentence. Filler follows."), None))
            .collect();
        let set = SourceSet::new(query(), sources).unwrap();
        let answer = answer_query(&client, &set).unwrap();
        assert_eq!(
            answer,
            "Source 0 first sentence [1]. Source 1 first sentence [2]. \
             Source 2 first sentence [3]. Source 3 first sentence [4]. \
             Source 4 first sentence [5]."
        );
    }

    #[test]
    fn empty_sources_give_empty_answer() {
        let client = mock_client(2);
        let sources = (0..5).map(|i| pair(i, "", None)).collect();
        let set = SourceSet::new(query(), sources).unwrap();
        assert_eq!(answer_query(&client, &set).unwrap(), "");
    }
}
