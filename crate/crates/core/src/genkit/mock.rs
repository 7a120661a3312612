//! Scripted generator reading utterances from a JSONL file.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{Capabilities, GenerationRequest, GenerationResponse, GeneratorBackend};
use crate::corpus::canonicalize;
use crate::error::{Error, Result};
use crate::seed;

/// One line of a mock script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub intent: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probabilities: Option<Vec<f64>>,
}

/// A deterministic, stateless generator for tests and dry runs.
///
/// Every call answers with the full script of the intent named in the prompt,
/// one text per script line, in script order. With `rotate_by_seed` the list
/// starts at an offset derived from the request seed instead, so re-prompting
/// walks through different parts of the script.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    id: String,
    scripts: BTreeMap<String, Vec<ScriptEntry>>,
    rotate_by_seed: bool,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Does `needle` occur in `haystack` delimited by non-word characters?
fn contains_word(haystack: &str, needle: &str) -> bool {
    let h = haystack.as_bytes();
    haystack.match_indices(needle).any(|(start, m)| {
        let end = start + m.len();
        (start == 0 || !is_word_byte(h[start - 1])) && (end == h.len() || !is_word_byte(h[end]))
    })
}

impl MockGenerator {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Argument("mock script is empty".into()));
        }
        let mut scripts: BTreeMap<String, Vec<ScriptEntry>> = BTreeMap::new();
        for e in entries {
            scripts.entry(canonicalize(&e.intent)).or_default().push(e);
        }
        Ok(Self {
            id: "mock".into(),
            scripts,
            rotate_by_seed: false,
        })
    }

    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        let mut mock = Self::new(entries)?;
        mock.id = format!("mock:{}", path.file_name().and_then(|n| n.to_str()).unwrap_or("script"));
        Ok(mock)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn rotate_by_seed(mut self, on: bool) -> Self {
        self.rotate_by_seed = on;
        self
    }

    fn script_for(&self, prompt: &str) -> Option<&[ScriptEntry]> {
        // longest matching intent name wins
        self.scripts
            .iter()
            .filter(|(intent, _)| contains_word(prompt, intent))
            .max_by_key(|(intent, _)| intent.len())
            .map(|(_, entries)| entries.as_slice())
    }
}

impl GeneratorBackend for MockGenerator {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            returns_token_probabilities: self
                .scripts
                .values()
                .flatten()
                .all(|e| e.token_probabilities.is_some()),
            is_deterministic: true,
            concurrent_safe: true,
        }
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let script = self
            .script_for(&request.prompt)
            .ok_or_else(|| Error::backend(&self.id, "no scripted intent matches the prompt"))?;
        let offset = if self.rotate_by_seed {
            (seed::derive(request.seed, &["mock-offset"]) % script.len() as u64) as usize
        } else {
            0
        };
        let ordered = script[offset..].iter().chain(&script[..offset]);
        let (texts, probs): (Vec<String>, Vec<Option<Vec<f64>>>) =
            ordered.map(|e| (e.text.clone(), e.token_probabilities.clone())).unzip();
        let token_probabilities = if request.want_token_probabilities {
            let all: Option<Vec<Vec<f64>>> = probs.into_iter().collect();
            Some(all.ok_or_else(|| Error::backend(&self.id, "script lacks token probabilities"))?)
        } else {
            None
        };
        Ok(GenerationResponse {
            texts,
            token_probabilities,
        })
    }
}
