//! Run orchestration: configuration, content-addressed staging with a
//! manifest, and the seven pipeline stages from fixture ingestion to
//! report emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use geobench_core::corpus::{
    quality_filter, trim_content, ContentPair, DocStatus, WebDocument, ExtractConfig,
};
use geobench_core::textmetrics::{
    bleu, length_ratio, perplexity, rouge_l, MetricReport, TokenizedText,
};
use geobench_core::trainkit::{split_dataset, Split, SplitConfig, SplitItem};
use geobench_core::unigram::UnigramLm;
use geobench_core::visibility::{
    aggregate, compare_conditions, ImprovementReport, OutlierPolicy, ParsedResponse,
    DEFAULT_ABBREVIATIONS, SOURCES_PER_QUERY,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset;
use crate::engine::http::HttpTransport;
use crate::engine::mock::MockTransport;
use crate::engine::{sha256_hex, EngineClient, EngineConfig, EngineTransport};
use crate::fetch::{Fetcher, FixtureFetcher};
use crate::ops::{self, SourceSet};
use crate::report;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: anyhow::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Stage { .. } => 2,
        }
    }
}

fn stage_err<E: Into<anyhow::Error>>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: e.into(),
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSection {
    pub mode: EngineMode,
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_attempts: u32,
    pub pacing_interval_ms: u64,
}

impl Default for EngineSection {
    fn default() -> Self {
        let base = EngineConfig::default();
        EngineSection {
            mode: EngineMode::Mock,
            endpoint: base.endpoint,
            model_name: base.model_name,
            temperature: base.temperature,
            max_attempts: base.max_attempts,
            pacing_interval_ms: 0,
        }
    }
}

impl EngineSection {
    fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            endpoint: self.endpoint.clone(),
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            max_attempts: self.max_attempts,
            pacing_interval_ms: self.pacing_interval_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub split: u64,
    pub replacement: u64,
    pub mock: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            split: 11,
            replacement: 13,
            mock: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub max_chars: usize,
    pub min_chars: usize,
    pub excluded_domains: Vec<String>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            max_chars: geobench_core::corpus::MAX_CONTENT_CHARS,
            min_chars: geobench_core::corpus::MIN_CONTENT_CHARS,
            excluded_domains: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSection {
    pub bins: usize,
    pub train_fraction: f64,
    pub test_queries: usize,
    pub docs_per_query: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            bins: 10,
            train_fraction: 0.8,
            test_queries: 50,
            docs_per_query: SOURCES_PER_QUERY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub queries: usize,
    /// `mad3.5` or `none`.
    pub outlier_policy: String,
    pub unigram_smoothing: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            queries: 50,
            outlier_policy: "mad3.5".to_string(),
            unigram_smoothing: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub fixtures_dir: PathBuf,
    pub out_dir: PathBuf,
    pub engine: EngineSection,
    pub seeds: Seeds,
    pub corpus: CorpusSection,
    pub split: SplitSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fixtures_dir: PathBuf::from("fixtures"),
            out_dir: PathBuf::from("runs/default"),
            engine: EngineSection::default(),
            seeds: Seeds::default(),
            corpus: CorpusSection::default(),
            split: SplitSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// The configuration subset a report embeds: everything except local
/// filesystem paths, so reports from identical runs are byte-identical
/// regardless of where they were written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub engine: EngineSection,
    pub seeds: Seeds,
    pub corpus: CorpusSection,
    pub split: SplitSection,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            engine: self.engine.clone(),
            seeds: self.seeds,
            corpus: self.corpus.clone(),
            split: self.split,
            eval: self.eval.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&raw)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.corpus.max_chars == 0 {
            return Err(PipelineError::Config("max_chars must be >= 1".to_string()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(PipelineError::Config(
                "train_fraction must lie in (0, 1)".to_string(),
            ));
        }
        if self.split.bins == 0 {
            return Err(PipelineError::Config("bins must be >= 1".to_string()));
        }
        self.outlier_policy()?;
        if self.engine.temperature < 0.0 {
            return Err(PipelineError::Config(
                "temperature must be >= 0".to_string(),
            ));
        }
        Ok(())
    }

    pub fn outlier_policy(&self) -> Result<OutlierPolicy, PipelineError> {
        match self.eval.outlier_policy.as_str() {
            "mad3.5" => Ok(OutlierPolicy::mad_default()),
            "none" => Ok(OutlierPolicy::None),
            other => Err(PipelineError::Config(format!(
                "unknown outlier policy `{other}` (expected mad3.5 or none)"
            ))),
        }
    }

    fn transport(&self) -> Box<dyn EngineTransport> {
        match self.engine.mode {
            EngineMode::Mock => Box::new(MockTransport::new(self.seeds.mock)),
            EngineMode::Live => Box::new(HttpTransport::new(&self.engine.endpoint)),
        }
    }

    pub fn client(&self) -> EngineClient {
        EngineClient::new(self.transport(), self.engine.engine_config())
            .with_cache_dir(self.out_dir.join("cache"))
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub digest: String,
    pub bytes: u64,
    /// Wall-clock creation time; recorded for live runs only so that
    /// mock runs stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub created: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub input_digest: String,
    pub outputs: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageEntry>,
}

impl Manifest {
    pub fn path(out_dir: &Path) -> PathBuf {
        out_dir.join("manifest.json")
    }

    pub fn load(out_dir: &Path) -> Manifest {
        fs::read_to_string(Self::path(out_dir))
            .ok()
            .and_then(|raw| serde_json::from_str(&raw).ok())
            .unwrap_or_default()
    }

    pub fn save(&self, out_dir: &Path) -> std::io::Result<()> {
        let mut body = serde_json::to_string_pretty(self).expect("manifest serialises");
        body.push('\n');
        fs::write(Self::path(out_dir), body)
    }

    /// Digest over the stage → artifact map; stable across re-runs.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("manifest serialises").as_bytes())
    }

    /// The `stage:path → digest` map a report cites. The report stage
    /// itself is left out so report emission and re-emission agree.
    pub fn upstream_artifacts(&self) -> BTreeMap<String, String> {
        self.stages
            .iter()
            .filter(|(stage, _)| stage.as_str() != "report")
            .flat_map(|(stage, entry)| {
                entry
                    .outputs
                    .iter()
                    .map(move |a| (format!("{stage}:{}", a.path), a.digest.clone()))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Stage artifacts
// ---------------------------------------------------------------------------

/// One labelled row trace, kept alongside the dataset for auditability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRecord {
    pub query_id: String,
    pub url: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<ops::OptimisationTrace>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub query_id: String,
    pub target: usize,
    pub baseline_answer: String,
    pub treated_answer: String,
}

/// Visibility artifact: either the aggregate report or the explicit
/// nothing-survived marker.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VisibilityArtifact {
    Report(ImprovementReport),
    Empty { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub condition: String,
    #[serde(flatten)]
    pub report: MetricReport,
    pub items: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub rows: Vec<MetricsRow>,
    /// The log-probability source behind the perplexity column.
    pub perplexity_source: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub ran_stages: Vec<&'static str>,
    pub skipped_stages: Vec<&'static str>,
    pub manifest_digest: String,
    pub report_path: PathBuf,
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

pub struct Pipeline {
    pub config: RunConfig,
    manifest: Manifest,
    ran: Vec<&'static str>,
    skipped: Vec<&'static str>,
    /// When set, ingest/clean/label are bypassed and this labelled
    /// dataset becomes the pipeline input.
    dataset_override: Option<PathBuf>,
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        fs::create_dir_all(&config.out_dir)
            .map_err(|e| PipelineError::Config(format!("cannot create out_dir: {e}")))?;
        let manifest = Manifest::load(&config.out_dir);
        Ok(Pipeline {
            manifest,
            config,
            ran: Vec::new(),
            skipped: Vec::new(),
            dataset_override: None,
        })
    }

    pub fn with_dataset_override(mut self, dataset: PathBuf) -> Self {
        self.dataset_override = Some(dataset);
        self
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn record_wallclock(&self) -> bool {
        self.config.engine.mode == EngineMode::Live
    }

    /// Content-addressed staging: skip the stage when its recorded input
    /// digest matches and every output is intact.
    fn run_stage<F>(
        &mut self,
        stage: &'static str,
        input_digest: String,
        outputs: &[PathBuf],
        body: F,
    ) -> Result<(), PipelineError>
    where
        F: FnOnce(&RunConfig) -> anyhow::Result<()>,
    {
        if let Some(entry) = self.manifest.stages.get(stage) {
            if entry.input_digest == input_digest {
                let intact = entry.outputs.iter().all(|artifact| {
                    let path = self.config.out_dir.join(&artifact.path);
                    file_digest(&path).map(|d| d == artifact.digest).unwrap_or(false)
                });
                if intact {
                    log::info!("stage {stage}: inputs unchanged, skipping");
                    self.skipped.push(stage);
                    return Ok(());
                }
            }
        }
        log::info!("stage {stage}: running");
        body(&self.config).map_err(stage_err(stage))?;
        let mut records = Vec::with_capacity(outputs.len());
        for path in outputs {
            let digest = file_digest(path).map_err(stage_err(stage))?;
            let bytes = fs::metadata(path).map_err(stage_err(stage))?.len();
            let rel = path
                .strip_prefix(&self.config.out_dir)
                .unwrap_or(path)
                .to_string_lossy()
                .into_owned();
            records.push(ArtifactRecord {
                path: rel,
                digest,
                bytes,
                created: self.record_wallclock().then(|| {
                    let now = std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .unwrap_or_default();
                    format!("{}", now.as_secs())
                }),
            });
        }
        self.manifest.stages.insert(
            stage.to_string(),
            StageEntry {
                input_digest,
                outputs: records,
            },
        );
        self.manifest
            .save(&self.config.out_dir)
            .map_err(stage_err(stage))?;
        self.ran.push(stage);
        Ok(())
    }

    pub fn run(&mut self) -> Result<RunSummary, PipelineError> {
        // Resolved config rides along for audit and report re-emission.
        let mut config_echo =
            serde_json::to_string_pretty(&self.config).expect("config serialises");
        config_echo.push('\n');
        fs::write(self.out("config.json"), config_echo)
            .map_err(|e| PipelineError::Config(format!("cannot write config echo: {e}")))?;
        let labelled_path = if let Some(override_path) = self.dataset_override.clone() {
            if !override_path.exists() {
                return Err(PipelineError::Config(format!(
                    "dataset {} does not exist",
                    override_path.display()
                )));
            }
            override_path
        } else {
            self.stage_ingest()?;
            self.stage_clean()?;
            self.stage_label()?;
            self.out("labelled.csv")
        };
        self.stage_split(&labelled_path)?;
        self.stage_answers(&labelled_path)?;
        self.stage_eval(&labelled_path)?;
        self.stage_report()?;
        Ok(RunSummary {
            ran_stages: self.ran.clone(),
            skipped_stages: self.skipped.clone(),
            manifest_digest: self.manifest.digest(),
            report_path: self.out("report.txt"),
        })
    }

    fn fixture_input_digest(&self, extra: &str) -> Result<String, PipelineError> {
        let queries = self.config.fixtures_dir.join("queries.csv");
        let pages = self.config.fixtures_dir.join("pages.jsonl");
        let mut bytes = fs::read(&queries).map_err(|e| {
            PipelineError::Config(format!("fixtures: {}: {e}", queries.display()))
        })?;
        bytes.extend(fs::read(&pages).map_err(|e| {
            PipelineError::Config(format!("fixtures: {}: {e}", pages.display()))
        })?);
        bytes.extend(extra.as_bytes());
        Ok(sha256_hex(&bytes))
    }

    fn stage_ingest(&mut self) -> Result<(), PipelineError> {
        let stage_cfg = serde_json::to_string(&(
            &self.config.corpus,
            self.config.split.docs_per_query,
        ))
        .expect("serialises");
        let input_digest = self.fixture_input_digest(&stage_cfg)?;
        let out = self.out("documents.jsonl");
        let outputs = [out.clone()];
        self.run_stage("ingest", input_digest, &outputs, move |config| {
            let docs = ingest_fixtures(config)?;
            dataset::store_documents(&docs, &out)?;
            Ok(())
        })
    }

    fn stage_clean(&mut self) -> Result<(), PipelineError> {
        let documents = self.out("documents.jsonl");
        let stage_cfg = format!(
            "max_chars={},docs={}",
            self.config.corpus.max_chars, self.config.split.docs_per_query
        );
        let mut input = fs::read(&documents).map_err(stage_err("clean"))?;
        input.extend(stage_cfg.as_bytes());
        let out = self.out("dataset.csv");
        let outputs = [out.clone()];
        self.run_stage("clean", sha256_hex(&input), &outputs, move |config| {
            let docs = dataset::load_documents(&documents)?;
            let pairs = clean_documents(
                &docs,
                config.corpus.max_chars,
                config.split.docs_per_query,
            );
            dataset::store_pairs(&pairs, &out)?;
            Ok(())
        })
    }

    fn engine_identity(&self) -> String {
        serde_json::to_string(&(
            &self.config.engine.mode,
            &self.config.engine.model_name,
            self.config.engine.temperature,
            self.config.seeds.mock,
        ))
        .expect("serialises")
    }

    fn stage_label(&mut self) -> Result<(), PipelineError> {
        let dataset_path = self.out("dataset.csv");
        let mut input = fs::read(&dataset_path).map_err(stage_err("label"))?;
        input.extend(self.engine_identity().as_bytes());
        let labelled = self.out("labelled.csv");
        let traces = self.out("traces.jsonl");
        let outputs = [labelled.clone(), traces.clone()];
        self.run_stage("label", sha256_hex(&input), &outputs, move |config| {
            let pairs = dataset::load_pairs(&dataset_path)?;
            let client = config.client();
            let (labelled_pairs, records) = label_pairs(&client, pairs)?;
            dataset::store_pairs(&labelled_pairs, &labelled)?;
            let mut body = String::new();
            for record in &records {
                body.push_str(&serde_json::to_string(record)?);
                body.push('\n');
            }
            fs::write(&traces, body)?;
            Ok(())
        })
    }

    fn stage_split(&mut self, labelled: &Path) -> Result<(), PipelineError> {
        let stage_cfg = serde_json::to_string(&(&self.config.split, self.config.seeds.split))
            .expect("serialises");
        let mut input = fs::read(labelled).map_err(stage_err("split"))?;
        input.extend(stage_cfg.as_bytes());
        let out = self.out("split.jsonl");
        let outputs = [out.clone()];
        let labelled = labelled.to_path_buf();
        self.run_stage("split", sha256_hex(&input), &outputs, move |config| {
            let pairs = dataset::load_pairs(&labelled)?;
            let items = split_items(&pairs);
            let split_cfg = SplitConfig {
                bins: config.split.bins,
                train_fraction: config.split.train_fraction,
                test_queries: config.split.test_queries,
                docs_per_query: config.split.docs_per_query,
                seed: config.seeds.split,
            };
            let assignment = split_dataset(&items, &split_cfg)?;
            let lengths: Vec<(String, usize)> = items
                .iter()
                .map(|item| (item.id.clone(), item.length))
                .collect();
            dataset::store_split(&assignment, &lengths, &out)?;
            Ok(())
        })
    }

    fn stage_answers(&mut self, labelled: &Path) -> Result<(), PipelineError> {
        let split_path = self.out("split.jsonl");
        let stage_cfg = format!(
            "queries={},replacement={},{}",
            self.config.eval.queries,
            self.config.seeds.replacement,
            self.engine_identity()
        );
        let mut input = fs::read(labelled).map_err(stage_err("answers"))?;
        input.extend(fs::read(&split_path).map_err(stage_err("answers"))?);
        input.extend(stage_cfg.as_bytes());
        let out = self.out("answers.jsonl");
        let outputs = [out.clone()];
        let labelled = labelled.to_path_buf();
        self.run_stage("answers", sha256_hex(&input), &outputs, move |config| {
            let pairs = dataset::load_pairs(&labelled)?;
            let manifest = dataset::load_split(&split_path)?;
            let records = answer_conditions(config, &pairs, &manifest)?;
            let mut body = String::new();
            for record in &records {
                body.push_str(&serde_json::to_string(record)?);
                body.push('\n');
            }
            fs::write(&out, body)?;
            Ok(())
        })
    }

    fn stage_eval(&mut self, labelled: &Path) -> Result<(), PipelineError> {
        let answers_path = self.out("answers.jsonl");
        let split_path = self.out("split.jsonl");
        let stage_cfg = serde_json::to_string(&self.config.eval).expect("serialises");
        let mut input = fs::read(&answers_path).map_err(stage_err("eval"))?;
        input.extend(fs::read(labelled).map_err(stage_err("eval"))?);
        input.extend(fs::read(&split_path).map_err(stage_err("eval"))?);
        input.extend(stage_cfg.as_bytes());
        let visibility_json = self.out("visibility.json");
        let visibility_csv = self.out("visibility.csv");
        let metrics_json = self.out("metrics.json");
        let outputs = [
            visibility_json.clone(),
            visibility_csv.clone(),
            metrics_json.clone(),
        ];
        let labelled = labelled.to_path_buf();
        self.run_stage("eval", sha256_hex(&input), &outputs, move |config| {
            let answers: Vec<AnswerRecord> = read_jsonl(&answers_path)?;
            let policy = config
                .outlier_policy()
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let visibility = evaluate_visibility(&answers, policy);
            let mut body = serde_json::to_string_pretty(&visibility)?;
            body.push('\n');
            fs::write(&visibility_json, body)?;
            fs::write(&visibility_csv, report::visibility_csv(&visibility))?;
            let pairs = dataset::load_pairs(&labelled)?;
            let manifest = dataset::load_split(&split_path)?;
            let metrics = compute_metrics(&pairs, &manifest, config.eval.unigram_smoothing)?;
            let mut body = serde_json::to_string_pretty(&metrics)?;
            body.push('\n');
            fs::write(&metrics_json, body)?;
            Ok(())
        })
    }

    fn stage_report(&mut self) -> Result<(), PipelineError> {
        let metrics_path = self.out("metrics.json");
        let visibility_path = self.out("visibility.json");
        let config_echo = serde_json::to_string(&self.config.echo()).expect("serialises");
        let mut input = fs::read(&metrics_path).map_err(stage_err("report"))?;
        input.extend(fs::read(&visibility_path).map_err(stage_err("report"))?);
        input.extend(config_echo.as_bytes());
        let report_txt = self.out("report.txt");
        let report_json = self.out("report.json");
        let outputs = [report_txt.clone(), report_json.clone()];
        let upstream = self.manifest.upstream_artifacts();
        self.run_stage("report", sha256_hex(&input), &outputs, move |config| {
            let metrics: MetricsArtifact =
                serde_json::from_str(&fs::read_to_string(&metrics_path)?)?;
            let visibility: VisibilityArtifact =
                serde_json::from_str(&fs::read_to_string(&visibility_path)?)?;
            let rendered = report::render(&config.echo(), &metrics, &visibility, &upstream);
            fs::write(&report_txt, rendered.text)?;
            fs::write(&report_json, rendered.json)?;
            Ok(())
        })
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let raw = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stage bodies
// ---------------------------------------------------------------------------

/// Walk each query's ranked pages, extracting and gating, until five
/// usable documents are found; every visited page is recorded with its
/// verdict.
pub fn ingest_fixtures(config: &RunConfig) -> anyhow::Result<Vec<WebDocument>> {
    let queries = crate::fetch::load_queries(&config.fixtures_dir)?;
    let fetcher = FixtureFetcher::load(&config.fixtures_dir)?;
    let excluded: std::collections::BTreeSet<String> = config
        .corpus
        .excluded_domains
        .iter()
        .map(|d| d.to_lowercase())
        .collect();
    let extract_config = ExtractConfig::default();
    let mut documents = Vec::new();
    for query in &queries {
        let mut usable = 0usize;
        for page in fetcher.pages_for(&query.id) {
            let mut doc = WebDocument::from_fetch(
                &query.id,
                &page.url,
                page.payload,
                page.denied,
                &extract_config,
            );
            doc.status = quality_filter(&doc, &excluded, config.corpus.min_chars);
            let is_usable = doc.status == DocStatus::Usable;
            documents.push(doc);
            if is_usable {
                usable += 1;
                if usable == config.split.docs_per_query {
                    break;
                }
            }
        }
        if usable < config.split.docs_per_query {
            log::warn!(
                "query {}: only {usable} usable documents of {} wanted",
                query.id,
                config.split.docs_per_query
            );
        }
    }
    Ok(documents)
}

/// Keep the first `docs_per_query` usable documents per query and trim
/// their text to the character budget.
pub fn clean_documents(
    docs: &[WebDocument],
    max_chars: usize,
    docs_per_query: usize,
) -> Vec<ContentPair> {
    let mut per_query: BTreeMap<&str, usize> = BTreeMap::new();
    let mut query_order: Vec<&str> = Vec::new();
    let mut pairs_by_query: BTreeMap<&str, Vec<ContentPair>> = BTreeMap::new();
    for doc in docs {
        if doc.status != DocStatus::Usable {
            continue;
        }
        let taken = per_query.entry(&doc.query_id).or_insert(0);
        if *taken == docs_per_query {
            continue;
        }
        *taken += 1;
        if !pairs_by_query.contains_key(doc.query_id.as_str()) {
            query_order.push(&doc.query_id);
        }
        pairs_by_query
            .entry(&doc.query_id)
            .or_default()
            .push(ContentPair {
                query_id: doc.query_id.clone(),
                url: doc.url.clone(),
                source_text: trim_content(&doc.extracted_text, max_chars).to_string(),
                optimized_text: None,
            });
    }
    let mut pairs = Vec::new();
    for query in query_order {
        let rows = &pairs_by_query[query];
        if rows.len() == docs_per_query {
            pairs.extend(rows.iter().cloned());
        } else {
            log::warn!("query {query}: dropped ({} of {docs_per_query} usable)", rows.len());
        }
    }
    pairs
}

/// Dataset row ids: `query_id#k`, k being the 1-based rank of the row
/// within its query in file order.
pub fn split_items(pairs: &[ContentPair]) -> Vec<SplitItem> {
    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    pairs
        .iter()
        .map(|pair| {
            let k = counters.entry(&pair.query_id).or_insert(0);
            *k += 1;
            SplitItem {
                id: format!("{}#{k}", pair.query_id),
                query_id: pair.query_id.clone(),
                length: pair.source_text.chars().count(),
            }
        })
        .collect()
}

/// Run the three-phase optimisation over every pair. A failing pair stays
/// unlabelled and its error is recorded; the run carries on.
pub fn label_pairs(
    client: &EngineClient,
    pairs: Vec<ContentPair>,
) -> anyhow::Result<(Vec<ContentPair>, Vec<LabelRecord>)> {
    let mut labelled = Vec::with_capacity(pairs.len());
    let mut records = Vec::with_capacity(pairs.len());
    for mut pair in pairs {
        match ops::optimize_content(client, &pair.source_text) {
            Ok(trace) => {
                pair.optimized_text = Some(trace.final_text.clone());
                records.push(LabelRecord {
                    query_id: pair.query_id.clone(),
                    url: pair.url.clone(),
                    trace: Some(trace),
                    error: None,
                });
            }
            Err(err) => {
                log::warn!("labelling {} failed: {err}", pair.url);
                records.push(LabelRecord {
                    query_id: pair.query_id.clone(),
                    url: pair.url.clone(),
                    trace: None,
                    error: Some(err.to_string()),
                });
            }
        }
        labelled.push(pair);
    }
    Ok((labelled, records))
}

/// Deterministic per-query replacement target in `1..=5`.
pub fn replacement_target(replacement_seed: u64, query_id: &str) -> usize {
    let mut h = replacement_seed ^ 0x9e3779b97f4a7c15;
    for b in query_id.as_bytes() {
        h = h.wrapping_mul(0x100000001b3).wrapping_add(u64::from(*b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    rng.random_range(1..=SOURCES_PER_QUERY)
}

/// Ask the engine for both conditions of every evaluation query: the five
/// raw sources, then the same set with one source randomly replaced by
/// its optimised version.
pub fn answer_conditions(
    config: &RunConfig,
    pairs: &[ContentPair],
    split: &dataset::SplitManifest,
) -> anyhow::Result<Vec<AnswerRecord>> {
    let client = config.client();
    let mut test_queries: Vec<String> = split
        .items
        .iter()
        .filter(|(_, _, m)| *m == Split::Test)
        .map(|(id, _, _)| id.split('#').next().unwrap_or(id).to_string())
        .collect();
    test_queries.sort();
    test_queries.dedup();
    test_queries.truncate(config.eval.queries);
    let mut records = Vec::with_capacity(test_queries.len());
    for query_id in &test_queries {
        let sources: Vec<ContentPair> = pairs
            .iter()
            .filter(|p| p.query_id == *query_id)
            .take(SOURCES_PER_QUERY)
            .cloned()
            .collect();
        if sources.len() < SOURCES_PER_QUERY {
            log::warn!("query {query_id}: fewer than {SOURCES_PER_QUERY} sources, skipped");
            continue;
        }
        let query = geobench_core::corpus::QueryRecord::new(
            query_id,
            "unknown",
            &format!("evaluation query {query_id}"),
        )?;
        let baseline_set = SourceSet::new(query, sources)?;
        let target = replacement_target(config.seeds.replacement, query_id);
        let treated_set = baseline_set.with_optimized_replacement(target)?;
        let baseline_answer = ops::answer_query(&client, &baseline_set)?;
        let treated_answer = ops::answer_query(&client, &treated_set)?;
        records.push(AnswerRecord {
            query_id: query_id.clone(),
            target,
            baseline_answer,
            treated_answer,
        });
    }
    Ok(records)
}

/// Parse both conditions of every answer and aggregate under the policy.
pub fn evaluate_visibility(answers: &[AnswerRecord], policy: OutlierPolicy) -> VisibilityArtifact {
    let mut comparisons = Vec::with_capacity(answers.len());
    for record in answers {
        let (baseline, _) = ParsedResponse::parse(&record.baseline_answer, DEFAULT_ABBREVIATIONS);
        let (treated, _) = ParsedResponse::parse(&record.treated_answer, DEFAULT_ABBREVIATIONS);
        match compare_conditions(&record.query_id, &baseline, &treated, record.target) {
            Ok(comparison) => comparisons.push(comparison),
            Err(err) => {
                return VisibilityArtifact::Empty {
                    reason: err.to_string(),
                }
            }
        }
    }
    if comparisons.is_empty() {
        return VisibilityArtifact::Empty {
            reason: "no evaluation queries".to_string(),
        };
    }
    match aggregate(comparisons, policy) {
        Ok(report) => VisibilityArtifact::Report(report),
        Err(err) => VisibilityArtifact::Empty {
            reason: err.to_string(),
        },
    }
}

/// The desk-scale metric table: each condition's text measured against
/// the labelled reference over the test split, with perplexity under a
/// unigram model fitted on the train-split source texts.
pub fn compute_metrics(
    pairs: &[ContentPair],
    split: &dataset::SplitManifest,
    smoothing: f64,
) -> anyhow::Result<MetricsArtifact> {
    let membership: BTreeMap<&str, Split> = split
        .items
        .iter()
        .map(|(id, _, m)| (id.as_str(), *m))
        .collect();
    let items = split_items(pairs);
    let mut train_texts: Vec<TokenizedText> = Vec::new();
    let mut test_rows: Vec<&ContentPair> = Vec::new();
    for (item, pair) in items.iter().zip(pairs) {
        match membership.get(item.id.as_str()) {
            Some(Split::Train) => train_texts.push(TokenizedText::standard(&pair.source_text)),
            Some(Split::Test) => test_rows.push(pair),
            _ => {}
        }
    }
    if train_texts.is_empty() {
        anyhow::bail!("no train rows to fit the unigram model");
    }
    let lm = UnigramLm::fit(train_texts.iter(), smoothing)?;
    let mut rows = Vec::new();
    for (condition, pick) in [
        ("raw_source", false),
        ("optimised_label", true),
    ] {
        let mut sums = (0.0f64, 0.0f64, 0.0f64);
        let mut series: Option<geobench_core::textmetrics::TokenLogProbSeries> = None;
        let mut counted = 0usize;
        for pair in &test_rows {
            let Some(reference_text) = pair.optimized_text.as_deref() else {
                continue;
            };
            let candidate_text = if pick { reference_text } else { &pair.source_text };
            let candidate = TokenizedText::standard(candidate_text);
            let reference = TokenizedText::standard(reference_text);
            if reference.is_empty() {
                continue;
            }
            sums.0 += rouge_l(&candidate, &reference)?.f1;
            sums.1 += bleu(&candidate, &reference, 4)?;
            sums.2 += length_ratio(&candidate, &reference)?;
            let scored = lm.score_text(&candidate)?;
            series = Some(match series {
                Some(existing) => existing.concat(&scored),
                None => scored,
            });
            counted += 1;
        }
        if counted == 0 {
            anyhow::bail!("no labelled test rows to evaluate");
        }
        let n = counted as f64;
        rows.push(MetricsRow {
            condition: condition.to_string(),
            report: MetricReport {
                rouge_l: sums.0 / n,
                bleu: sums.1 / n,
                length_ratio: sums.2 / n,
                perplexity: series.map(|s| perplexity(&s)).unwrap_or(f64::NAN),
            },
            items: counted,
        });
    }
    Ok(MetricsArtifact {
        rows,
        perplexity_source: format!("add-k unigram fallback (k = {smoothing}), not a neural model"),
    })
}
