//! Declarative pipeline configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::DatasetName;
use crate::error::{Error, Result};
use crate::evalkit::ClassifierTrainSpec;
use crate::genkit::{CleanupRules, GenerationSettings, PromptTemplate, RemoteGeneratorConfig};
use crate::refiner::RefinerConfig;
use crate::selection::Strategy;
use crate::splitter::SplitProtocol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetName,
    /// CLINC150 JSON file, SGD root directory, or a corpus JSONL file for `custom`.
    pub dataset_path: PathBuf,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_multiplier")]
    pub sample_size_multiplier: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seeds: SeedConfig,
    /// Protocol override; required for `custom` datasets.
    #[serde(default)]
    pub split: Option<SplitProtocol>,
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub seq2seq: BackendChoice,
    #[serde(default = "default_classifier")]
    pub classifier: BackendChoice,
    #[serde(default)]
    pub refiner: RefinerConfig,
    #[serde(default)]
    pub classifier_train: ClassifierTrainSpec,
}

fn default_trials() -> usize {
    5
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_multiplier() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_classifier() -> BackendChoice {
    BackendChoice { kind: "centroid".into() }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub root: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendChoice {
    pub kind: String,
}

impl Default for BackendChoice {
    fn default() -> Self {
        Self { kind: "lexical".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    /// Mock: JSONL script of `{intent, text, token_probabilities?}` lines.
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub rotate_by_seed: bool,
    /// Remote: endpoint and behaviour; credentials come from the environment.
    #[serde(default)]
    pub remote: Option<RemoteGeneratorConfig>,
    #[serde(default)]
    pub template_id: Option<String>,
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default = "default_factor")]
    pub supergen_factor: usize,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f32,
    #[serde(default)]
    pub cleanup: CleanupRules,
}

fn default_factor() -> usize {
    10
}

fn default_retries() -> usize {
    GenerationSettings::default().max_retries
}

fn default_max_new_tokens() -> u32 {
    GenerationSettings::default().max_new_tokens
}

fn default_temperature() -> f32 {
    GenerationSettings::default().temperature
}

impl GeneratorConfig {
    pub fn settings(&self) -> GenerationSettings {
        GenerationSettings {
            max_retries: self.max_retries,
            max_new_tokens: self.max_new_tokens,
            temperature: self.temperature,
            cleanup: self.cleanup,
            ..GenerationSettings::default()
        }
    }

    pub fn prompt_template(&self) -> Result<PromptTemplate> {
        match &self.template {
            None => Ok(PromptTemplate::default()),
            Some(body) => PromptTemplate::new(self.template_id.clone().unwrap_or_else(|| "custom".into()), body.clone())
                .map_err(|e| Error::Usage(format!("generator.template: {e}"))),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Usage(format!("config: {}", e.message().trim())))?;
        Ok(cfg)
    }

    /// Read and validate a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("config: cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset_path);
        fix(&mut self.output_dir);
        if let Some(s) = self.generator.script.as_mut() {
            fix(s);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(Error::Usage(m));
        if self.n_trials == 0 {
            return usage("n_trials: must be at least 1".into());
        }
        if self.strategies.is_empty() {
            return usage("strategies: at least one strategy is required".into());
        }
        if !matches!(self.sample_size_multiplier, 1 | 2) {
            return usage(format!("sample_size_multiplier: must be 1 or 2, got {}", self.sample_size_multiplier));
        }
        if self.dataset == DatasetName::Custom && self.split.is_none() {
            return usage("split: custom datasets need an explicit split protocol".into());
        }
        if let Some(p) = &self.split {
            if p.unseen_domains == 0 || p.per_intent_generation_count == 0 {
                return usage("split: unseen_domains and per_intent_generation_count must be positive".into());
            }
        }
        match self.generator.kind {
            GeneratorKind::Mock if self.generator.script.is_none() => {
                return usage("generator.script: the mock generator needs a script file".into())
            }
            GeneratorKind::Remote if self.generator.remote.is_none() && std::env::var(crate::genkit::remote::ENDPOINT_ENV).is_err() => {
                return usage("generator.remote: the remote generator needs an endpoint".into())
            }
            _ => {}
        }
        if self.generator.supergen_factor == 0 {
            return usage("generator.supergen_factor: must be at least 1".into());
        }
        self.generator.prompt_template()?;
        crate::refiner::seq2seq_backend(&self.seq2seq.kind)?;
        crate::evalkit::classifier_backend(&self.classifier.kind)?;
        self.refiner.validate()?;
        if self.classifier_train.batch_size == 0 || self.classifier_train.max_steps == 0 {
            return usage("classifier_train: batch_size and max_steps must be positive".into());
        }
        Ok(())
    }

    pub fn protocol(&self) -> SplitProtocol {
        self.split.unwrap_or(match self.dataset {
            DatasetName::Sgd => SplitProtocol::SGD,
            _ => SplitProtocol::CLINC150,
        })
    }

    /// Generated utterances per unseen intent.
    pub fn unseen_quota(&self) -> usize {
        self.protocol().per_intent_generation_count * self.sample_size_multiplier
    }

    pub fn wants(&self, s: Strategy) -> bool {
        self.strategies.contains(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dataset = "clinc150"
dataset_path = "data/clinc.json"
[generator]
kind = "mock"
script = "script.jsonl"
"#;

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_trials, 5);
        assert_eq!(cfg.strategies, Strategy::ALL);
        assert_eq!(cfg.refiner.m, 7);
        assert_eq!(cfg.classifier_train.max_steps, 1800);
        assert_eq!(cfg.unseen_quota(), 100);
        assert_eq!(cfg.generator.supergen_factor, 10);
    }

    #[test]
    fn errors_name_the_field() {
        let err = |text: String| match PipelineConfig::from_toml_str(&text).and_then(|c| c.validate()) {
            Err(Error::Usage(m)) => m,
            other => panic!("unexpected {other:?}"),
        };
        assert!(err(MINIMAL.replace("clinc150", "atis")).contains("atis"));
        assert!(err(format!("strategies = []\n{MINIMAL}")).contains("strategies"));
        assert!(err(format!("sample_size_multiplier = 3\n{MINIMAL}")).contains("sample_size_multiplier"));
        assert!(err(format!("bogus_key = 1\n{MINIMAL}")).contains("bogus_key"));
        assert!(err(format!("{MINIMAL}[seq2seq]\nkind = \"t5\"\n")).contains("seq2seq.kind"));
        assert!(err(MINIMAL.replace("clinc150", "custom")).contains("split"));
    }
}
