//! JSONL utterance records, atomic writes and content hashes.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, DatasetName, IntentKey, LabeledExample, Origin, SplitTag};
use crate::error::{Error, Result};
use crate::genkit::GenerationRecord;
use crate::selection::Strategy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend_id: String,
    pub prompt_id: String,
    pub seed: u64,
    #[serde(default)]
    pub index: usize,
}

/// One utterance per line of every artifact and corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub text: String,
    pub intent: String,
    pub domain: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probabilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetName>,
}

impl UtteranceRecord {
    pub fn key(&self) -> Result<IntentKey> {
        IntentKey::new(&self.intent, &self.domain)
    }

    pub fn from_generation(r: &GenerationRecord, origin: Origin, trial_id: u32) -> Self {
        Self {
            text: r.text.clone(),
            intent: r.key.intent().to_string(),
            domain: r.key.domain().to_string(),
            origin,
            strategy: r.strategy,
            trial_id: Some(trial_id),
            token_probabilities: r.token_probabilities.clone(),
            provenance: Some(Provenance {
                backend_id: r.backend_id.clone(),
                prompt_id: r.prompt_id.clone(),
                seed: r.seed,
                index: r.index,
            }),
            split: None,
            dataset: None,
        }
    }

    pub fn to_generation(&self) -> Result<GenerationRecord> {
        let p = self
            .provenance
            .as_ref()
            .ok_or_else(|| Error::Schema(format!("record {:?} lacks provenance", self.text)))?;
        Ok(GenerationRecord {
            text: self.text.clone(),
            key: self.key()?,
            token_probabilities: self.token_probabilities.clone(),
            prompt_id: p.prompt_id.clone(),
            backend_id: p.backend_id.clone(),
            seed: p.seed,
            index: p.index,
            strategy: self.strategy,
        })
    }

    pub fn from_example(e: &LabeledExample, dataset: DatasetName) -> Self {
        Self {
            text: e.text.clone(),
            intent: e.key.intent().to_string(),
            domain: e.key.domain().to_string(),
            origin: e.origin,
            strategy: None,
            trial_id: None,
            token_probabilities: None,
            provenance: None,
            split: Some(e.split),
            dataset: Some(dataset),
        }
    }

    pub fn to_example(&self) -> Result<LabeledExample> {
        Ok(LabeledExample::new(
            self.text.clone(),
            self.key()?,
            self.origin,
            self.split.unwrap_or_default(),
        ))
    }
}

/// Serialized JSONL bytes, one record per line.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Write through a temporary sibling file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact"),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

pub fn write_corpus_jsonl(path: &Path, corpus: &Corpus) -> Result<()> {
    let records: Vec<UtteranceRecord> = corpus
        .examples()
        .iter()
        .map(|e| UtteranceRecord::from_example(e, corpus.name()))
        .collect();
    write_atomic(path, &to_jsonl(&records)?)
}

/// Load a corpus JSONL file; the dataset name comes from the records (default `custom`).
pub fn read_corpus_jsonl(path: &Path) -> Result<Corpus> {
    let records: Vec<UtteranceRecord> = read_jsonl(path)?;
    let name = records.iter().find_map(|r| r.dataset).unwrap_or_default();
    let examples = records.iter().map(UtteranceRecord::to_example).collect::<Result<Vec<_>>>()?;
    Corpus::new(name, examples)
}

/// `{domain}__{intent}.jsonl`
pub fn intent_file_name(key: &IntentKey) -> PathBuf {
    PathBuf::from(format!("{}__{}.jsonl", key.domain(), key.intent()))
}
