//! Configuration, artifact store, run manifest and stage orchestration.

pub mod artifacts;
pub mod config;
pub mod manifest;
pub mod plot;
pub mod stages;
pub mod toy;

pub use artifacts::{read_corpus_jsonl, read_jsonl, write_corpus_jsonl, Provenance, UtteranceRecord};
pub use config::{BackendChoice, GeneratorConfig, GeneratorKind, PipelineConfig, SeedConfig};
pub use manifest::{ArtifactEntry, FailureRecord, RunManifest, StageRecord, MANIFEST_FILE};
pub use stages::{load_dataset, Pipeline, STAGES};
pub use toy::{write_toy_workspace, ToyOptions};
