//! Command-line surface. Exit codes: 0 success, 1 configuration error,
//! 2 stage failure.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use geobench_core::corpus::{quality_filter, DocStatus};
use geobench_core::seqcore::{apply_noise, NoiseKind, NoiseSpec};
use geobench_core::textmetrics::{bleu, length_ratio, rouge_l, TokenizedText};
use geobench_core::trainkit::{split_dataset, SplitConfig};
use geobench_core::visibility::{segment_sentences, DEFAULT_ABBREVIATIONS};

use crate::dataset;
use crate::pipeline::{
    clean_documents, ingest_fixtures, label_pairs, split_items, EngineMode, Pipeline,
    PipelineError, RunConfig,
};
use crate::report;

#[derive(Parser)]
#[command(
    name = "geobench",
    about = "Generative engine optimisation benchmark harness",
    version
)]
pub struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricsFormat {
    Table,
    Lines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKindArg {
    TokenMask,
    TokenDelete,
    TextInfill,
    SentencePermute,
    DocumentRotate,
}

impl From<NoiseKindArg> for NoiseKind {
    fn from(kind: NoiseKindArg) -> Self {
        match kind {
            NoiseKindArg::TokenMask => NoiseKind::TokenMask,
            NoiseKindArg::TokenDelete => NoiseKind::TokenDelete,
            NoiseKindArg::TextInfill => NoiseKind::TextInfill,
            NoiseKindArg::SentencePermute => NoiseKind::SentencePermute,
            NoiseKindArg::DocumentRotate => NoiseKind::DocumentRotate,
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Ingest a recorded fixture corpus into web-document state.
    Ingest {
        #[arg(long)]
        fixtures: PathBuf,
        #[arg(long, default_value = "documents.jsonl")]
        out: PathBuf,
    },
    /// Gate and trim ingested documents into a content-pair dataset.
    Clean {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = geobench_core::corpus::MAX_CONTENT_CHARS)]
        max_chars: usize,
        #[arg(long, default_value_t = geobench_core::corpus::MIN_CONTENT_CHARS)]
        min_chars: usize,
        #[arg(long, default_value_t = 5)]
        docs_per_query: usize,
    },
    /// Length-stratified split with a query-level test hold-out.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        #[arg(long, default_value_t = 50)]
        test_queries: usize,
        #[arg(long, default_value_t = 5)]
        docs_per_query: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "split.jsonl")]
        out: PathBuf,
    },
    /// Optimise every pair through the three-phase engine pipeline.
    Label {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Mock)]
        engine: EngineArg,
        /// Mock seed (mock engine only).
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Response cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Text metrics between a candidate and a reference file.
    Metrics {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricsFormat::Table)]
        format: MetricsFormat,
    },
    /// Apply one denoising corruption to a text file.
    Noise {
        #[arg(long, value_enum)]
        kind: NoiseKindArg,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
        #[arg(long, default_value_t = 3.0)]
        span_mean: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the two-condition visibility experiment end to end.
    GeoEval {
        /// Pre-labelled dataset; skips ingest/clean/label when given.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        #[arg(long)]
        queries: Option<usize>,
        /// Replacement-choice seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// mad3.5 or none.
        #[arg(long)]
        outlier_policy: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit the report from an existing run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            err.downcast_ref::<PipelineError>()
                .map(PipelineError::exit_code)
                .unwrap_or(2)
        }
    }
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<RunConfig, PipelineError> {
    match cli_config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { fixtures, out } => {
            let mut config = load_config(&cli.config)?;
            config.fixtures_dir = fixtures;
            let docs = ingest_fixtures(&config)?;
            dataset::store_documents(&docs, &out)?;
            println!("ingested {} documents -> {}", docs.len(), out.display());
            Ok(())
        }
        Command::Clean {
            input,
            out,
            max_chars,
            min_chars,
            docs_per_query,
        } => {
            let mut docs = dataset::load_documents(&input)?;
            for doc in &mut docs {
                if doc.status != DocStatus::ExcludedDomain {
                    doc.status = quality_filter(doc, &BTreeSet::new(), min_chars);
                }
            }
            let pairs = clean_documents(&docs, max_chars, docs_per_query);
            dataset::store_pairs(&pairs, &out)?;
            println!("cleaned {} pairs -> {}", pairs.len(), out.display());
            Ok(())
        }
        Command::Split {
            input,
            bins,
            train,
            test_queries,
            docs_per_query,
            seed,
            out,
        } => {
            let pairs = dataset::load_pairs(&input)?;
            let items = split_items(&pairs);
            let cfg = SplitConfig {
                bins,
                train_fraction: train,
                test_queries,
                docs_per_query,
                seed,
            };
            let assignment = split_dataset(&items, &cfg)?;
            let lengths: Vec<(String, usize)> = items
                .iter()
                .map(|item| (item.id.clone(), item.length))
                .collect();
            dataset::store_split(&assignment, &lengths, &out)?;
            println!(
                "split {} items over {} bins -> {}",
                items.len(),
                bins,
                out.display()
            );
            Ok(())
        }
        Command::Label {
            input,
            out,
            engine,
            seed,
            cache,
        } => {
            let mut config = load_config(&cli.config)?;
            config.engine.mode = match engine {
                EngineArg::Mock => EngineMode::Mock,
                EngineArg::Live => EngineMode::Live,
            };
            config.seeds.mock = seed;
            let pairs = dataset::load_pairs(&input)?;
            let mut client = crate::engine::EngineClient::new(
                match config.engine.mode {
                    EngineMode::Mock => {
                        Box::new(crate::engine::mock::MockTransport::new(seed))
                    }
                    EngineMode::Live => Box::new(crate::engine::http::HttpTransport::new(
                        &config.engine.endpoint,
                    )),
                },
                crate::engine::EngineConfig {
                    endpoint: config.engine.endpoint.clone(),
                    model_name: config.engine.model_name.clone(),
                    temperature: config.engine.temperature,
                    max_attempts: config.engine.max_attempts,
                    pacing_interval_ms: config.engine.pacing_interval_ms,
                },
            );
            if let Some(cache_dir) = cache {
                client = client.with_cache_dir(cache_dir);
            }
            let (labelled, records) = label_pairs(&client, pairs)?;
            dataset::store_pairs(&labelled, &out)?;
            let failures = records.iter().filter(|r| r.error.is_some()).count();
            println!(
                "labelled {} pairs ({failures} failures) -> {}",
                labelled.len(),
                out.display()
            );
            Ok(())
        }
        Command::Metrics {
            candidate,
            reference,
            format,
        } => {
            let candidate_text = TokenizedText::standard(&fs::read_to_string(&candidate)?);
            let reference_text = TokenizedText::standard(&fs::read_to_string(&reference)?);
            let rouge = rouge_l(&candidate_text, &reference_text)?;
            let bleu_score = bleu(&candidate_text, &reference_text, 4)?;
            let ratio = length_ratio(&candidate_text, &reference_text)?;
            match format {
                MetricsFormat::Table => {
                    println!("{:<10} {:<10} {:<12}", "rouge_l", "bleu", "length_ratio");
                    println!("{:<10.4} {:<10.4} {:<12.4}", rouge.f1, bleu_score, ratio);
                }
                MetricsFormat::Lines => {
                    println!("rouge_l={:.6}", rouge.f1);
                    println!("bleu={bleu_score:.6}");
                    println!("length_ratio={ratio:.6}");
                }
            }
            Ok(())
        }
        Command::Noise {
            kind,
            rate,
            span_mean,
            seed,
            input,
            out,
        } => {
            let text = fs::read_to_string(&input)?;
            let spec = NoiseSpec::new(kind.into(), rate, span_mean, seed)?;
            let corrupted = match spec.kind {
                NoiseKind::SentencePermute => {
                    let sentences = segment_sentences(&text, DEFAULT_ABBREVIATIONS);
                    apply_noise(&sentences, &spec, "<mask>".to_string()).join(" ")
                }
                _ => {
                    let tokens: Vec<String> =
                        text.split_whitespace().map(str::to_string).collect();
                    apply_noise(&tokens, &spec, "<mask>".to_string()).join(" ")
                }
            };
            match out {
                Some(path) => fs::write(&path, corrupted)?,
                None => println!("{corrupted}"),
            }
            Ok(())
        }
        Command::GeoEval {
            dataset,
            engine,
            queries,
            seed,
            outlier_policy,
            out,
        } => {
            let mut config = load_config(&cli.config)?;
            if let Some(engine) = engine {
                config.engine.mode = match engine {
                    EngineArg::Mock => EngineMode::Mock,
                    EngineArg::Live => EngineMode::Live,
                };
            }
            if let Some(queries) = queries {
                config.eval.queries = queries;
            }
            if let Some(seed) = seed {
                config.seeds.replacement = seed;
            }
            if let Some(policy) = outlier_policy {
                config.eval.outlier_policy = policy;
            }
            if let Some(out_dir) = out {
                config.out_dir = out_dir;
            }
            let mut pipeline = Pipeline::new(config)?;
            if let Some(dataset) = dataset {
                pipeline = pipeline.with_dataset_override(dataset);
            }
            let summary = pipeline.run()?;
            println!(
                "geo-eval complete: ran [{}], skipped [{}]",
                summary.ran_stages.join(", "),
                summary.skipped_stages.join(", ")
            );
            println!("manifest digest: {}", summary.manifest_digest);
            println!("report: {}", summary.report_path.display());
            Ok(())
        }
        Command::Report { run } => {
            let config_path = run.join("config.json");
            let config: RunConfig = serde_json::from_str(&fs::read_to_string(&config_path)?)?;
            let metrics = serde_json::from_str(&fs::read_to_string(run.join("metrics.json"))?)?;
            let visibility =
                serde_json::from_str(&fs::read_to_string(run.join("visibility.json"))?)?;
            let manifest = crate::pipeline::Manifest::load(&run);
            let artifacts = manifest.upstream_artifacts();
            let rendered = report::render(&config.echo(), &metrics, &visibility, &artifacts);
            fs::write(run.join("report.txt"), rendered.text)?;
            fs::write(run.join("report.json"), rendered.json)?;
            println!("report re-emitted under {}", run.display());
            Ok(())
        }
    }
}
