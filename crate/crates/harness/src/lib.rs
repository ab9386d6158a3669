//! Pipeline harness for generative engine optimisation benchmarking:
//! dataset file formats, the engine client with its deterministic mock,
//! the staged run orchestration, and report emission. The algorithmic
//! kernels live in `geobench-core`.

pub mod cli;
pub mod dataset;
pub mod engine;
pub mod fetch;
pub mod ops;
pub mod pipeline;
pub mod report;
