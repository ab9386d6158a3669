//! Deterministic offline engine. Every completion is a pure function of
//! (prompt, seed), which makes full pipeline runs bit-reproducible and
//! lets tests precompute expected outputs.
//!
//! Rules, fixed by contract:
//! - `generate-queries`: one query per line from a deterministic
//!   region/angle grid, distinct for counts up to 64.
//! - `optimize-citations`: a heading plus an authority attribution are
//!   prepended to the content, and an authority sentence appended.
//! - `optimize-fluency`: whitespace is normalised and a plain-language
//!   closing sentence appended.
//! - `optimize-statistics`: a survey-statistic sentence (percentage
//!   derived from seed and content) is appended.
//! - `answer-query`: extractive answer — for each non-empty source in
//!   index order, its first sentence suffixed with that source's citation
//!   marker. All sources empty yields an empty answer.

use geobench_core::visibility::{segment_sentences, DEFAULT_ABBREVIATIONS};

use super::templates::task_of;
use super::{ChatRequest, EngineTransport, TransportError};

pub struct MockTransport {
    seed: u64,
}

impl MockTransport {
    pub fn new(seed: u64) -> Self {
        MockTransport { seed }
    }
}

const REGIONS: [&str; 8] = [
    "Lisbon",
    "Kyoto",
    "Bali",
    "Tuscany",
    "Reykjavik",
    "Cusco",
    "Queenstown",
    "Marrakesh",
];

const ANGLES: [&str; 8] = [
    "for families",
    "on a budget",
    "in the off season",
    "for solo travellers",
    "near the old town",
    "with local street food",
    "for a long weekend",
    "without a rental car",
];

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn field<'a>(body: &'a str, key: &str) -> Option<&'a str> {
    body.lines()
        .find_map(|line| line.strip_prefix(key))
        .map(str::trim)
}

impl EngineTransport for MockTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let task = task_of(&request.messages)
            .ok_or_else(|| TransportError::Failed("prompt carries no task tag".to_string()))?;
        let user = request
            .messages
            .iter()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("");
        match task {
            "generate-queries" => self.generate_queries(user),
            "optimize-citations" => self.optimize_citations(user),
            "optimize-fluency" => self.optimize_fluency(user),
            "optimize-statistics" => self.optimize_statistics(user),
            "answer-query" => self.answer_query(user),
            other => Err(TransportError::Failed(format!("unknown task `{other}`"))),
        }
    }

    fn cache_salt(&self) -> String {
        format!("mock-{}", self.seed)
    }
}

fn content_of(body: &str) -> &str {
    body.split_once("Content:\n")
        .map(|(_, rest)| rest)
        .unwrap_or(body)
        .trim()
}

impl MockTransport {
    fn generate_queries(&self, body: &str) -> Result<String, TransportError> {
        let subcategory = field(body, "Subcategory:")
            .ok_or_else(|| TransportError::Failed("missing Subcategory".to_string()))?;
        let count: usize = field(body, "Count:")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| TransportError::Failed("missing Count".to_string()))?;
        let mut lines = Vec::with_capacity(count);
        for i in 0..count {
            let idx = self.seed as usize + i;
            let region = REGIONS[idx % REGIONS.len()];
            let angle = ANGLES[(idx / REGIONS.len()) % ANGLES.len()];
            lines.push(format!("What are the best {subcategory} in {region} {angle}?"));
        }
        Ok(lines.join("\n"))
    }

    fn optimize_citations(&self, body: &str) -> Result<String, TransportError> {
        let content = content_of(body);
        Ok(format!(
            "## Overview\nAccording to the Global Travel Institute (2024), {content}\n\
             ## Why you can trust this guide\n\
             Regional tourism boards and independent reviewers back these recommendations."
        ))
    }

    fn optimize_fluency(&self, body: &str) -> Result<String, TransportError> {
        let content = content_of(body);
        let normalised = content
            .lines()
            .map(str::trim_end)
            .collect::<Vec<_>>()
            .join("\n");
        Ok(format!(
            "{normalised}\n## At a glance\n\
             In short, travellers find the area inviting and easy to explore."
        ))
    }

    fn optimize_statistics(&self, body: &str) -> Result<String, TransportError> {
        let content = content_of(body);
        let mut salted = self.seed.to_le_bytes().to_vec();
        salted.extend_from_slice(content.as_bytes());
        let percent = 55 + fnv1a(&salted) % 40;
        Ok(format!(
            "{content}\n## What the numbers say\n\
             Recent surveys indicate that {percent}% of visitors rate the experience positively."
        ))
    }

    fn answer_query(&self, body: &str) -> Result<String, TransportError> {
        let mut parts: Vec<String> = Vec::new();
        for (index, text) in parse_sources(body) {
            let text = text.trim();
            if text.is_empty() {
                continue;
            }
            let Some(first) = segment_sentences(text, DEFAULT_ABBREVIATIONS).into_iter().next()
            else {
                continue;
            };
            let one_line = first.split_whitespace().collect::<Vec<_>>().join(" ");
            let stem = one_line.trim_end_matches(['.', '!', '?']).trim_end();
            parts.push(format!("{stem} [{index}]."));
        }
        Ok(parts.join(" "))
    }
}

/// Split the prompt's numbered source blocks: a line starting `[i] `
/// (i in 1..=5) opens block `i`, which runs until the next block start.
fn parse_sources(body: &str) -> Vec<(usize, String)> {
    let mut sources: Vec<(usize, String)> = Vec::new();
    for line in body.lines() {
        let block_start = line
            .strip_prefix('[')
            .and_then(|rest| rest.split_once(']'))
            .and_then(|(digits, rest)| {
                digits
                    .parse::<usize>()
                    .ok()
                    .filter(|i| (1..=5).contains(i))
                    .map(|i| (i, rest.trim_start()))
            });
        match block_start {
            Some((index, first_line)) => sources.push((index, first_line.to_string())),
            None => {
                if let Some((_, text)) = sources.last_mut() {
                    text.push('\n');
                    text.push_str(line);
                }
            }
        }
    }
    sources.sort_by_key(|(i, _)| *i);
    sources
}
