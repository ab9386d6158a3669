//! Fetcher interface with recorded fixtures in place of live scraping.
//!
//! A fixture corpus is a directory holding `queries.csv`
//! (`id,subcategory,text`) and `pages.jsonl`, one recorded fetch per line
//! with the query it belongs to, its result rank, and whether the fetch
//! was denied.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use geobench_core::corpus::QueryRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

/// One recorded fetch result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedPage {
    pub query_id: String,
    pub rank: u32,
    pub url: String,
    /// True when the site refused the fetch (robots block, 403, ...).
    pub denied: bool,
    pub payload: String,
}

/// Source of ranked pages per query.
pub trait Fetcher {
    /// Pages for a query in ascending rank order.
    fn pages_for(&self, query_id: &str) -> Vec<FetchedPage>;
}

pub struct FixtureFetcher {
    pages: BTreeMap<String, Vec<FetchedPage>>,
}

impl FixtureFetcher {
    pub fn load(fixtures_dir: &Path) -> Result<Self, FetchError> {
        let path = fixtures_dir.join("pages.jsonl");
        let file = File::open(&path).map_err(|source| FetchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut pages: BTreeMap<String, Vec<FetchedPage>> = BTreeMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| FetchError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let page: FetchedPage =
                serde_json::from_str(&line).map_err(|e| FetchError::Malformed {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            pages.entry(page.query_id.clone()).or_default().push(page);
        }
        for ranked in pages.values_mut() {
            ranked.sort_by_key(|p| p.rank);
        }
        Ok(FixtureFetcher { pages })
    }
}

impl Fetcher for FixtureFetcher {
    fn pages_for(&self, query_id: &str) -> Vec<FetchedPage> {
        self.pages.get(query_id).cloned().unwrap_or_default()
    }
}

/// Load the fixture query list (`id,subcategory,text` CSV).
pub fn load_queries(fixtures_dir: &Path) -> Result<Vec<QueryRecord>, FetchError> {
    let path = fixtures_dir.join("queries.csv");
    let file = File::open(&path).map_err(|source| FetchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut queries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FetchError::Malformed {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(FetchError::Malformed {
                path: path.display().to_string(),
                line: i + 2,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let query =
            QueryRecord::new(&record[0], &record[1], &record[2]).map_err(|e| {
                FetchError::Malformed {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: e.to_string(),
                }
            })?;
        queries.push(query);
    }
    Ok(queries)
}
