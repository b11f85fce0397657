//! Matching researchers to funding calls from the text of their publications.
//!
//! The pipeline runs in stages: corpus ingestion and identity resolution, indicator-based
//! publication sets, embedding with baseline removal, per-call similarity aggregation with
//! within-researcher standardization, institution-relative percentiles, and analytics over the
//! resulting assignments.

pub mod analytics;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod pipeline;
pub mod profiling;
pub mod ranking;
pub mod reports;
pub mod scoring;
pub mod stages;
pub mod synth;

pub use config::{ConfigOverrides, PipelineConfig, ProviderKind};
pub use error::{Error, Result};
pub use pipeline::{run, Corpus, RunOutput, RunSnapshot, SnapshotInfo};
