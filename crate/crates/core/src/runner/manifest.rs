//! The persisted record of one run: config, plans, artifacts and stage history.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::artifacts::{sha256_file, write_atomic};
use super::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::splitter::ExperimentPlan;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_id: Option<u32>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub started: String,
    pub finished: Option<String>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    pub trial_id: u32,
    pub intent: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config: PipelineConfig,
    pub plans: Vec<ExperimentPlan>,
    /// Backend identifiers by role (generator, seq2seq, classifier).
    pub backends: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
    pub artifacts: Vec<ArtifactEntry>,
    #[serde(default)]
    pub failures: Vec<FailureRecord>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(config: PipelineConfig, plans: Vec<ExperimentPlan>) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            plans,
            backends: BTreeMap::new(),
            stages: BTreeMap::new(),
            artifacts: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn path_in(out_dir: &Path) -> PathBuf {
        out_dir.join(MANIFEST_FILE)
    }

    /// Load the manifest of a run; a missing one means `split` has not run.
    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = Self::path_in(out_dir);
        if !path.exists() {
            return Err(Error::Dependency(format!(
                "no manifest at {}; run the `split` stage first",
                path.display()
            )));
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, &e))
    }

    pub fn save(&self) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&Self::path_in(&self.config.output_dir), &bytes)
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn begin_stage(&mut self, stage: &str) {
        let runs = self.stages.get(stage).map_or(0, |s| s.runs) + 1;
        self.stages.insert(
            stage.to_string(),
            StageRecord {
                started: now(),
                finished: None,
                runs,
            },
        );
    }

    pub fn finish_stage(&mut self, stage: &str) {
        if let Some(s) = self.stages.get_mut(stage) {
            s.finished = Some(now());
        }
    }

    pub fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(self.out_dir()).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Record (or replace) the entry for an artifact already on disk.
    pub fn record(&mut self, path: &Path, stage: &str, trial_id: Option<u32>) -> Result<()> {
        let rel = self.relative(path);
        let sha256 = sha256_file(path)?;
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(ArtifactEntry {
            path: rel,
            stage: stage.to_string(),
            trial_id,
            sha256,
        });
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(())
    }

    pub fn entry(&self, path: &Path) -> Option<&ArtifactEntry> {
        let rel = self.relative(path);
        self.artifacts.iter().find(|a| a.path == rel)
    }

    /// True when the file exists and still matches its recorded hash.
    pub fn is_complete(&self, path: &Path) -> bool {
        path.exists()
            && self
                .entry(path)
                .is_some_and(|e| sha256_file(path).map(|h| h == e.sha256).unwrap_or(false))
    }

    pub fn clear_failures(&mut self, stage: &str) {
        self.failures.retain(|f| f.stage != stage);
    }
}
