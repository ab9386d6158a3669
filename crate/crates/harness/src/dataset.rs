//! File formats: the content-pair dataset table (CSV, RFC-4180 quoting),
//! the intermediate web-document state (JSON lines) and the split
//! manifest (JSON lines with one header record).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use geobench_core::corpus::{ContentPair, WebDocument};
use geobench_core::trainkit::{LengthBins, Split, SplitAssignment};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Row {
        path: String,
        row: usize,
        message: String,
    },
    #[error("{path}: missing header record")]
    MissingHeader { path: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write pairs as a CSV table with header
/// `query_id,url,source_text,optimized_text`. An absent optimised text is
/// an empty field; embedded delimiters and newlines are RFC-4180 quoted.
pub fn store_pairs(pairs: &[ContentPair], path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    writer
        .write_record(["query_id", "url", "source_text", "optimized_text"])
        .map_err(|e| csv_err(path, 0, e))?;
    for (i, pair) in pairs.iter().enumerate() {
        writer
            .write_record([
                pair.query_id.as_str(),
                pair.url.as_str(),
                pair.source_text.as_str(),
                pair.optimized_text.as_deref().unwrap_or(""),
            ])
            .map_err(|e| csv_err(path, i + 1, e))?;
    }
    writer.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, row: usize, e: csv::Error) -> DatasetError {
    DatasetError::Row {
        path: path.display().to_string(),
        row,
        message: e.to_string(),
    }
}

/// Load a pair table, failing with a row-indexed diagnostic on any
/// malformed row. An empty `optimized_text` field loads as absent.
pub fn load_pairs(path: &Path) -> Result<Vec<ContentPair>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers = reader.headers().map_err(|e| csv_err(path, 0, e))?.clone();
    let expected = ["query_id", "url", "source_text", "optimized_text"];
    if headers.iter().ne(expected) {
        return Err(DatasetError::Row {
            path: path.display().to_string(),
            row: 0,
            message: format!("unexpected header {headers:?}"),
        });
    }
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_err(path, row, e))?;
        if record.len() != 4 {
            return Err(DatasetError::Row {
                path: path.display().to_string(),
                row,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let optimized = record[3].to_string();
        pairs.push(ContentPair {
            query_id: record[0].to_string(),
            url: record[1].to_string(),
            source_text: record[2].to_string(),
            optimized_text: if optimized.is_empty() {
                None
            } else {
                Some(optimized)
            },
        });
    }
    Ok(pairs)
}

/// One web document per line as a JSON object.
pub fn store_documents(docs: &[WebDocument], path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    for (i, doc) in docs.iter().enumerate() {
        let line = serde_json::to_string(doc).map_err(|e| DatasetError::Row {
            path: path.display().to_string(),
            row: i + 1,
            message: e.to_string(),
        })?;
        writeln!(writer, "{line}").map_err(io_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

pub fn load_documents(path: &Path) -> Result<Vec<WebDocument>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = serde_json::from_str(&line).map_err(|e| DatasetError::Row {
            path: path.display().to_string(),
            row: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "record", rename_all = "snake_case")]
enum SplitLine {
    Header {
        seed: u64,
        bin_edges: Vec<usize>,
        degenerate: bool,
    },
    Item {
        id: String,
        bin: usize,
        membership: Split,
    },
}

/// The split manifest: a header record echoing seed and bin edges, then
/// one record per item with its bin index and membership.
pub fn store_split(
    assignment: &SplitAssignment,
    lengths: &[(String, usize)],
    path: &Path,
) -> Result<(), DatasetError> {
    let bins = LengthBins::from_edges(assignment.bin_edges.clone()).map_err(|e| {
        DatasetError::Row {
            path: path.display().to_string(),
            row: 0,
            message: e.to_string(),
        }
    })?;
    let length_of: std::collections::BTreeMap<&str, usize> = lengths
        .iter()
        .map(|(id, len)| (id.as_str(), *len))
        .collect();
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    let header = SplitLine::Header {
        seed: assignment.seed,
        bin_edges: assignment.bin_edges.clone(),
        degenerate: assignment.degenerate_bins,
    };
    writeln!(writer, "{}", serde_json::to_string(&header).unwrap()).map_err(io_err(path))?;
    for (id, membership) in &assignment.membership {
        let bin = length_of.get(id.as_str()).map(|l| bins.assign(*l)).unwrap_or(0);
        let line = SplitLine::Item {
            id: id.clone(),
            bin,
            membership: *membership,
        };
        writeln!(writer, "{}", serde_json::to_string(&line).unwrap()).map_err(io_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub bin_edges: Vec<usize>,
    pub degenerate: bool,
    pub items: Vec<(String, usize, Split)>,
}

impl SplitManifest {
    pub fn membership_of(&self, id: &str) -> Option<Split> {
        self.items
            .iter()
            .find(|(item, _, _)| item == id)
            .map(|(_, _, m)| *m)
    }
}

pub fn load_split(path: &Path) -> Result<SplitManifest, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut header: Option<(u64, Vec<usize>, bool)> = None;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SplitLine = serde_json::from_str(&line).map_err(|e| DatasetError::Row {
            path: path.display().to_string(),
            row: i + 1,
            message: e.to_string(),
        })?;
        match parsed {
            SplitLine::Header {
                seed,
                bin_edges,
                degenerate,
            } => header = Some((seed, bin_edges, degenerate)),
            SplitLine::Item {
                id,
                bin,
                membership,
            } => items.push((id, bin, membership)),
        }
    }
    let (seed, bin_edges, degenerate) = header.ok_or_else(|| DatasetError::MissingHeader {
        path: path.display().to_string(),
    })?;
    Ok(SplitManifest {
        seed,
        bin_edges,
        degenerate,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use geobench_core::trainkit::{make_length_bins, stratified_split};
    use std::collections::BTreeMap;

    fn pair(query: &str, text: &str, optimized: Option<&str>) -> ContentPair {
        ContentPair {
            query_id: query.to_string(),
            url: format!("https://example.com/{query}"),
            source_text: text.to_string(),
            optimized_text: optimized.map(str::to_string),
        }
    }

    #[test]
    fn round_trip_with_embedded_newlines_and_quotes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let pairs = vec![
            pair("q1", "line one\nline two, with comma", Some("opt \"quoted\"")),
            pair("q2", "plain", None),
        ];
        store_pairs(&pairs, &path).unwrap();
        assert_eq!(load_pairs(&path).unwrap(), pairs);
    }

    #[test]
    fn empty_dataset_round_trips_to_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        store_pairs(&[], &path).unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        assert_eq!(raw.lines().count(), 1);
        assert!(load_pairs(&path).unwrap().is_empty());
    }

    #[test]
    fn synthetic_1905_rows_survive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let pairs: Vec<ContentPair> = (0..1905)
            .map(|i| pair(&format!("q{i}"), &format!("text body {i}"), None))
            .collect();
        store_pairs(&pairs, &path).unwrap();
        assert_eq!(load_pairs(&path).unwrap().len(), 1905);
    }

    #[test]
    fn malformed_row_reports_its_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        std::fs::write(
            &path,
            "query_id,url,source_text,optimized_text\nq1,u1,t1,\nq2,u2\n",
        )
        .unwrap();
        let err = load_pairs(&path).unwrap_err();
        match err {
            DatasetError::Row { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        std::fs::write(&path, "a,b,c,d\n").unwrap();
        assert!(matches!(
            load_pairs(&path).unwrap_err(),
            DatasetError::Row { row: 0, .. }
        ));
    }

    #[test]
    fn split_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.jsonl");
        let lengths: Vec<(String, usize)> = (0..40)
            .map(|i| (format!("item{i:02}"), 100 + i * 13))
            .collect();
        let raw: Vec<usize> = lengths.iter().map(|(_, l)| *l).collect();
        let bins = make_length_bins(&raw, 4).unwrap();
        let assignment = stratified_split(&lengths, &bins, 0.8, 5).unwrap();
        store_split(&assignment, &lengths, &path).unwrap();
        let manifest = load_split(&path).unwrap();
        assert_eq!(manifest.seed, 5);
        assert_eq!(manifest.bin_edges, assignment.bin_edges);
        assert_eq!(manifest.items.len(), 40);
        let memberships: BTreeMap<String, Split> = manifest
            .items
            .iter()
            .map(|(id, _, m)| (id.clone(), *m))
            .collect();
        assert_eq!(memberships, assignment.membership);
        for (id, bin, _) in &manifest.items {
            let len = lengths.iter().find(|(i, _)| i == id).unwrap().1;
            assert_eq!(*bin, bins.assign(len));
        }
    }
}
