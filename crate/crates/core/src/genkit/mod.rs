//! Zero-shot utterance generation from intent labels.
//!
//! A [`PromptTemplate`] turns an [`IntentKey`] into a prompt; a
//! [`GeneratorBackend`] answers it with one or more completions; the
//! orchestration here splits, cleans and counts candidates until the
//! per-intent quota is met.

mod backend;
mod cleanup;
mod mock;
pub mod remote;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use backend::{Capabilities, GenerationRequest, GenerationResponse, GeneratorBackend};
pub use cleanup::CleanupRules;
pub use mock::{MockGenerator, ScriptEntry};
pub use remote::{RemoteGenerator, RemoteGeneratorConfig};

use crate::corpus::IntentKey;
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::Strategy;

/// A generated utterance with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub text: String,
    pub key: IntentKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probabilities: Option<Vec<f64>>,
    pub prompt_id: String,
    pub backend_id: String,
    /// Seed of the request that produced this record.
    pub seed: u64,
    /// Position in the generation order for this intent.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
}

const PLACEHOLDERS: [&str; 3] = ["intent", "domain", "count"];

pub const DEFAULT_GENERATION_TEMPLATE: &str = "Provide {count} different things a user might say to a virtual assistant when their intent is `{intent}' in the `{domain}' context. One per line.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
}

enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

fn parse_template(body: &str) -> Result<Vec<Piece<'_>>> {
    let mut pieces = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Literal(&rest[..open]));
        }
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| Error::Template(format!("unclosed placeholder in {body:?}")))?;
        let name = &after[..close];
        if !PLACEHOLDERS.contains(&name) {
            return Err(Error::Template(format!(
                "unknown placeholder {{{name}}} (supported: {{intent}}, {{domain}}, {{count}})"
            )));
        }
        pieces.push(Piece::Slot(name));
        rest = &after[close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Template(format!("stray `}}` in {body:?}")));
    }
    if !rest.is_empty() {
        pieces.push(Piece::Literal(rest));
    }
    Ok(pieces)
}

impl PromptTemplate {
    pub fn new(template_id: impl Into<String>, body: impl Into<String>) -> Result<Self> {
        let t = Self {
            template_id: template_id.into(),
            body: body.into(),
        };
        parse_template(&t.body)?;
        Ok(t)
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            template_id: "zero-shot-v1".into(),
            body: DEFAULT_GENERATION_TEMPLATE.into(),
        }
    }
}

pub fn build_generation_prompt(t: &PromptTemplate, key: &IntentKey, count: usize) -> Result<String> {
    let count = count.to_string();
    let mut out = String::with_capacity(t.body.len() + 32);
    for piece in parse_template(&t.body)? {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Slot("intent") => out.push_str(key.intent()),
            Piece::Slot("domain") => out.push_str(key.domain()),
            Piece::Slot(_) => out.push_str(&count),
        }
    }
    Ok(out)
}

/// Knobs for the generation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    /// Consecutive backend failures tolerated before giving up.
    pub max_retries: usize,
    /// Consecutive calls yielding no usable candidate tolerated before giving up.
    pub max_empty_rounds: usize,
    pub max_new_tokens: u32,
    pub temperature: f32,
    pub cleanup: CleanupRules,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            max_retries: 3,
            max_empty_rounds: 20,
            max_new_tokens: 512,
            temperature: 0.9,
            cleanup: CleanupRules::default(),
        }
    }
}

fn generate_records(
    backend: &dyn GeneratorBackend,
    template: &PromptTemplate,
    key: &IntentKey,
    count: usize,
    seed_value: u64,
    settings: &GenerationSettings,
    want_probabilities: bool,
) -> Result<Vec<GenerationRecord>> {
    if count == 0 {
        return Err(Error::Precondition("generation count must be at least 1".into()));
    }
    let prompt = build_generation_prompt(template, key, count)?;
    let backend_id = backend.backend_id().to_string();
    let mut records: Vec<GenerationRecord> = Vec::with_capacity(count);
    let mut failures = 0;
    let mut empty_rounds = 0;
    let mut round: u64 = 0;

    while records.len() < count {
        let request_seed = seed::derive(seed_value, &[key.domain(), key.intent(), &round.to_string()]);
        round += 1;
        let request = GenerationRequest {
            prompt: prompt.clone(),
            max_new_tokens: settings.max_new_tokens,
            temperature: settings.temperature,
            seed: request_seed,
            want_token_probabilities: want_probabilities,
        };
        let response = backend.generate(&request).and_then(|r| {
            match &r.token_probabilities {
                Some(p) if p.len() != r.texts.len() => Err(Error::backend(
                    &backend_id,
                    format!("{} texts but {} probability lists", r.texts.len(), p.len()),
                )),
                None if want_probabilities => Err(Error::backend(&backend_id, "response lacks token probabilities")),
                _ => Ok(r),
            }
        });
        let response = match response {
            Ok(r) => {
                failures = 0;
                r
            }
            Err(e) => {
                failures += 1;
                if failures > settings.max_retries {
                    return Err(Error::Generation {
                        intent: key.to_string(),
                        attempts: failures,
                        message: e.to_string(),
                        partial: records,
                    });
                }
                continue;
            }
        };

        let before = records.len();
        let probs = response.token_probabilities.map(|p| p.into_iter().map(Some).collect::<Vec<_>>());
        let probs = probs.unwrap_or_else(|| vec![None; response.texts.len()]);
        for (text, p) in response.texts.iter().zip(probs) {
            // probabilities belong to a whole completion, so only its first
            // usable line is kept; otherwise every line is a candidate
            let candidates: Vec<String> = text
                .lines()
                .map(|l| settings.cleanup.apply(l))
                .filter(|l| !l.is_empty())
                .take(if p.is_some() { 1 } else { usize::MAX })
                .collect();
            if matches!(&p, Some(v) if v.is_empty()) {
                continue;
            }
            for candidate in candidates {
                if records.len() == count {
                    break;
                }
                records.push(GenerationRecord {
                    text: candidate,
                    key: key.clone(),
                    token_probabilities: p.clone(),
                    prompt_id: template.template_id.clone(),
                    backend_id: backend_id.clone(),
                    seed: request_seed,
                    index: records.len(),
                    strategy: None,
                });
            }
        }
        if records.len() == before {
            empty_rounds += 1;
            if empty_rounds > settings.max_empty_rounds {
                return Err(Error::Generation {
                    intent: key.to_string(),
                    attempts: round as usize,
                    message: "backend produced no usable text".into(),
                    partial: records,
                });
            }
        } else {
            empty_rounds = 0;
        }
    }
    Ok(records)
}

/// Generate exactly `count` cleaned utterances for `key`, re-prompting as needed.
///
/// Duplicates are kept.
pub fn generate_for_intent(
    backend: &dyn GeneratorBackend,
    template: &PromptTemplate,
    key: &IntentKey,
    count: usize,
    seed_value: u64,
    settings: &GenerationSettings,
) -> Result<Vec<GenerationRecord>> {
    generate_records(backend, template, key, count, seed_value, settings, false)
}

/// Generate `base_count × factor` utterances with token probabilities, the
/// candidate pool for confidence-based selection.
pub fn oversample_for_selection(
    backend: &dyn GeneratorBackend,
    template: &PromptTemplate,
    key: &IntentKey,
    base_count: usize,
    factor: usize,
    seed_value: u64,
    settings: &GenerationSettings,
) -> Result<Vec<GenerationRecord>> {
    if factor == 0 {
        return Err(Error::Precondition("oversampling factor must be at least 1".into()));
    }
    if !backend.capabilities().returns_token_probabilities {
        return Err(Error::Capability(format!(
            "backend `{}` does not return token probabilities",
            backend.backend_id()
        )));
    }
    generate_records(backend, template, key, base_count * factor, seed_value, settings, true)
}

/// One unit of work for [`generate_many`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationJob {
    pub key: IntentKey,
    pub count: usize,
    pub seed: u64,
    /// `Some(factor)` requests an oversampled pool with token probabilities.
    pub oversample: Option<usize>,
}

/// Run many jobs, concurrently when the backend allows it.
///
/// Results come back in job order regardless of scheduling.
pub fn generate_many(
    backend: &dyn GeneratorBackend,
    template: &PromptTemplate,
    jobs: &[GenerationJob],
    settings: &GenerationSettings,
) -> Vec<Result<Vec<GenerationRecord>>> {
    let run = |job: &GenerationJob| match job.oversample {
        Some(factor) => oversample_for_selection(backend, template, &job.key, job.count, factor, job.seed, settings),
        None => generate_for_intent(backend, template, &job.key, job.count, job.seed, settings),
    };
    if backend.capabilities().concurrent_safe {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    }
}
