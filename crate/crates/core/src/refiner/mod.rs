//! m-to-n training pairs from seen domains, classifier-monitored training of a
//! sequence-to-sequence refiner, and refinement of unseen-domain generations.

mod backends;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DatasetName, IntentKey, LabeledExample, Origin, SplitTag};
use crate::error::{Error, Result};
use crate::evalkit::{IntentTexts, TrainedClassifier};
use crate::genkit::CleanupRules;
use crate::seed;

pub use backends::{seq2seq_backend, IdentityBackend, LexicalBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinerConfig {
    /// Generated utterances per input (slot 0 is the current one).
    pub m: usize,
    /// Human utterances per target.
    pub n: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Non-improving validation checks tolerated before stopping.
    pub early_stopping_patience: usize,
    pub validation_checks_per_epoch: usize,
    /// Ask the backend for its low-rank / reduced-parameter mode.
    pub parameter_efficient: bool,
    pub seed: u64,
    /// Applied to every line the refiner produces.
    pub cleanup: CleanupRules,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            m: 7,
            n: 1,
            epochs: 6,
            batch_size: 24,
            early_stopping_patience: 2,
            validation_checks_per_epoch: 1,
            parameter_efficient: false,
            seed: 0,
            cleanup: CleanupRules::default(),
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m", self.m),
            ("n", self.n),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("early_stopping_patience", self.early_stopping_patience),
            ("validation_checks_per_epoch", self.validation_checks_per_epoch),
        ] {
            if v == 0 {
                return Err(Error::Usage(format!("refiner.{name}: must be at least 1")));
            }
        }
        Ok(())
    }
}

/// One (m generated → n human) training pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RefinementExample {
    pub input_utterances: Vec<String>,
    pub target_utterances: Vec<String>,
    pub key: IntentKey,
    pub rendered_input: String,
    pub rendered_target: String,
}

const COUNT_WORDS: [&str; 11] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];

fn spelled(n: usize) -> String {
    COUNT_WORDS.get(n).map(|s| s.to_string()).unwrap_or_else(|| n.to_string())
}

/// Inputs one per line, then the instruction asking for `n` improved expressions.
pub fn build_refiner_prompt(key: &IntentKey, inputs: &[String], n: usize) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::Precondition("refiner prompt needs at least one input utterance".into()));
    }
    if n == 0 {
        return Err(Error::Precondition("refiner prompt needs n >= 1".into()));
    }
    let ask = if n == 1 {
        "Provide one improved expression.".to_string()
    } else {
        format!("Provide {} improved expressions.", spelled(n))
    };
    let mut s = String::new();
    for line in inputs {
        s.push_str(&line.replace('\n', " "));
        s.push('\n');
    }
    s.push_str(&format!(
        "The sentences above are user intent expressions for `{}' in the `{}' context, but they might have less quality or contain mistakes. {ask}",
        key.intent(),
        key.domain()
    ));
    Ok(s)
}

/// The input utterances of a rendered refiner input (every line but the instruction).
pub fn rendered_inputs(rendered: &str) -> Vec<&str> {
    let lines: Vec<&str> = rendered.lines().collect();
    match lines.split_last() {
        Some((_, inputs)) if !inputs.is_empty() => inputs.to_vec(),
        _ => lines,
    }
}

/// Current utterance plus `m - 1` others drawn with replacement.
fn context(gen: &[String], current: usize, m: usize, rng: &mut seed::Rng) -> Vec<String> {
    let mut inputs = Vec::with_capacity(m);
    inputs.push(gen[current].clone());
    for _ in 1..m {
        inputs.push(gen[rng.gen_range(0..gen.len())].clone());
    }
    inputs
}

/// One training pair per generated utterance of every intent.
///
/// Generated and human utterances of an intent are matched by a seeded
/// random bijection; extra targets (n > 1) are drawn without replacement
/// from the remaining human utterances.
pub fn sample_training_pairs(gen: &IntentTexts, real: &IntentTexts, cfg: &RefinerConfig) -> Result<Vec<RefinementExample>> {
    cfg.validate()?;
    if let Some(k) = gen.keys().find(|k| !real.contains_key(*k)) {
        return Err(Error::Consistency(format!("generated data for {k} has no human counterpart")));
    }
    let mut pairs = Vec::new();
    for (key, real_j) in real {
        let gen_j = gen.get(key).map(Vec::as_slice).unwrap_or(&[]);
        if gen_j.is_empty() || real_j.is_empty() {
            return Err(Error::Consistency(format!(
                "intent {key} has {} generated and {} human utterances; both must be non-empty",
                gen_j.len(),
                real_j.len()
            )));
        }
        if gen_j.len() != real_j.len() {
            return Err(Error::Consistency(format!(
                "intent {key}: {} generated vs {} human utterances; counts must match",
                gen_j.len(),
                real_j.len()
            )));
        }
        let n_j = gen_j.len();
        let mut perm: Vec<usize> = (0..n_j).collect();
        perm.shuffle(&mut seed::rng_from(cfg.seed, &["pairing", key.domain(), key.intent()]));
        let mut rng = seed::rng_from(cfg.seed, &["contexts", key.domain(), key.intent()]);
        for (idx, &partner) in perm.iter().enumerate() {
            let inputs = context(gen_j, idx, cfg.m, &mut rng);
            let mut targets = vec![real_j[partner].clone()];
            let extra = (cfg.n - 1).min(n_j - 1);
            for j in rand::seq::index::sample(&mut rng, n_j - 1, extra) {
                targets.push(real_j[if j >= partner { j + 1 } else { j }].clone());
            }
            pairs.push(RefinementExample {
                rendered_input: build_refiner_prompt(key, &inputs, cfg.n)?,
                rendered_target: targets.join("\n"),
                input_utterances: inputs,
                target_utterances: targets,
                key: key.clone(),
            });
        }
    }
    Ok(pairs)
}

/// A refiner model under training.
pub trait RefinerModel: Send + Sync {
    /// One optimizer step; returns the training loss of the batch.
    fn train_batch(&mut self, batch: &[&RefinementExample]) -> Result<f64>;

    /// Output text for a rendered input; n utterances separated by newlines.
    fn refine(&self, rendered_input: &str) -> Result<String>;

    fn snapshot(&self) -> Box<dyn RefinerModel>;

    /// Backend-defined persistent form.
    fn to_json(&self) -> serde_json::Value;
}

pub trait Seq2SeqBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    /// A fresh model; `training` is the full pair set so a backend can size itself.
    fn init(&self, cfg: &RefinerConfig, training: &[RefinementExample]) -> Result<Box<dyn RefinerModel>>;
}

/// Scores the current model at each validation check; lower is better.
pub trait ValidationScorer {
    fn validation_loss(&mut self, model: &dyn RefinerModel) -> Result<f64>;
}

/// Non-empty cleaned lines of a refiner output, at most `n`.
fn output_lines(output: &str, n: usize, cleanup: &CleanupRules) -> Vec<String> {
    output
        .lines()
        .map(|l| cleanup.apply(l))
        .filter(|l| !l.trim().is_empty())
        .take(n)
        .collect()
}

/// Mean cross-entropy of a frozen classifier on refined validation outputs.
pub struct ValidationMonitor<'a> {
    classifier: &'a TrainedClassifier,
    val_examples: Vec<RefinementExample>,
    n: usize,
    cleanup: CleanupRules,
}

impl<'a> ValidationMonitor<'a> {
    pub fn new(classifier: &'a TrainedClassifier, val_examples: Vec<RefinementExample>, cfg: &RefinerConfig) -> Result<Self> {
        if !classifier.is_trained() {
            return Err(Error::Precondition("validation classifier has not been trained".into()));
        }
        if val_examples.is_empty() {
            return Err(Error::Argument("validation monitor needs at least one example".into()));
        }
        Ok(Self {
            classifier,
            val_examples,
            n: cfg.n,
            cleanup: cfg.cleanup,
        })
    }

    pub fn val_examples(&self) -> &[RefinementExample] {
        &self.val_examples
    }
}

impl ValidationScorer for ValidationMonitor<'_> {
    fn validation_loss(&mut self, model: &dyn RefinerModel) -> Result<f64> {
        let outputs: Vec<Vec<String>> = self
            .val_examples
            .par_iter()
            .map(|ex| {
                let lines = output_lines(&model.refine(&ex.rendered_input)?, self.n, &self.cleanup);
                Ok(if lines.is_empty() { vec![ex.input_utterances[0].clone()] } else { lines })
            })
            .collect::<Result<_>>()?;
        let items = self
            .val_examples
            .iter()
            .zip(&outputs)
            .flat_map(|(ex, lines)| lines.iter().map(move |l| (l.as_str(), &ex.key)));
        self.classifier.loss(items)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefinerTrainingLog {
    pub epochs_run: usize,
    pub steps: usize,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    /// Index into `validation_losses` of the returned checkpoint.
    pub best_check: Option<usize>,
    pub stopped_early: bool,
}

pub struct TrainedRefiner {
    backend_id: String,
    config: RefinerConfig,
    model: Box<dyn RefinerModel>,
    log: RefinerTrainingLog,
}

impl std::fmt::Debug for TrainedRefiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedRefiner")
            .field("backend_id", &self.backend_id)
            .field("config", &self.config)
            .field("log", &self.log)
            .finish()
    }
}

impl TrainedRefiner {
    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn config(&self) -> &RefinerConfig {
        &self.config
    }

    pub fn log(&self) -> &RefinerTrainingLog {
        &self.log
    }

    pub fn refine(&self, rendered_input: &str) -> Result<String> {
        self.model.refine(rendered_input)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "backend_id": self.backend_id,
            "config": self.config,
            "log": self.log,
            "model": self.model.to_json(),
        })
    }
}

/// Steps (1-based, within an epoch) after which validation runs.
fn check_points(steps_per_epoch: usize, checks: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=checks).map(|c| (c * steps_per_epoch).div_ceil(checks)).collect();
    v.dedup();
    v
}

/// Train with the sequence-to-sequence loss, validating through `monitor`
/// and stopping after `early_stopping_patience` non-improving checks. The
/// best checkpoint is returned.
pub fn train_refiner(
    pairs: &[RefinementExample],
    cfg: &RefinerConfig,
    backend: &dyn Seq2SeqBackend,
    monitor: &mut dyn ValidationScorer,
) -> Result<TrainedRefiner> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Argument("no refiner training pairs".into()));
    }
    let mut model = backend.init(cfg, pairs)?;
    let steps_per_epoch = pairs.len().div_ceil(cfg.batch_size);
    let checks = check_points(steps_per_epoch, cfg.validation_checks_per_epoch);
    let mut log = RefinerTrainingLog::default();
    let mut best: Option<(f64, Box<dyn RefinerModel>)> = None;
    let mut bad = 0;

    'epochs: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut seed::rng_from(cfg.seed, &["refiner-epoch", &epoch.to_string()]));
        log.epochs_run = epoch + 1;
        let mut epoch_loss = 0.0;
        for (s, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&RefinementExample> = chunk.iter().map(|&i| &pairs[i]).collect();
            let loss = model.train_batch(&batch).map_err(|e| match e {
                Error::Backend { backend, message } => Error::Backend {
                    backend,
                    message: format!("training epoch {}, step {}: {message}", epoch + 1, s + 1),
                },
                other => other,
            })?;
            epoch_loss += loss * batch.len() as f64;
            log.steps += 1;
            if checks.contains(&(s + 1)) {
                let v = monitor.validation_loss(model.as_ref())?;
                log.validation_losses.push(v);
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, model.snapshot()));
                    log.best_check = Some(log.validation_losses.len() - 1);
                    bad = 0;
                } else {
                    bad += 1;
                    if bad >= cfg.early_stopping_patience {
                        log.stopped_early = true;
                        log.epoch_losses.push(epoch_loss / pairs.len() as f64);
                        break 'epochs;
                    }
                }
            }
        }
        log.epoch_losses.push(epoch_loss / pairs.len() as f64);
    }
    Ok(TrainedRefiner {
        backend_id: backend.backend_id().to_string(),
        config: cfg.clone(),
        model: best.map(|(_, m)| m).unwrap_or(model),
        log,
    })
}

/// Refined utterances per intent plus how many outputs fell back to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub texts: IntentTexts,
    /// Outputs that were empty after cleanup and passed the current utterance through.
    pub passthrough: usize,
}

impl RefineOutcome {
    pub fn to_corpus(&self, name: DatasetName) -> Result<Corpus> {
        let examples = self
            .texts
            .iter()
            .flat_map(|(k, texts)| {
                texts
                    .iter()
                    .map(move |t| LabeledExample::new(t.clone(), k.clone(), Origin::Refined, SplitTag::Unassigned))
            })
            .collect();
        Corpus::new(name, examples)
    }

    pub fn total(&self) -> usize {
        self.texts.values().map(Vec::len).sum()
    }
}

/// Refine every generated utterance in its own m-input context.
///
/// Per intent the output has `per_intent` utterances when given, otherwise
/// `N_j · n`. Extra seeded passes over the generated set are made when one
/// pass does not reach the target.
pub fn refine_corpus(
    handle: &TrainedRefiner,
    gen: &IntentTexts,
    cfg: &RefinerConfig,
    seed_value: u64,
    per_intent: Option<usize>,
) -> Result<RefineOutcome> {
    cfg.validate()?;
    let mut texts = BTreeMap::new();
    let mut passthrough = 0;
    for (key, gen_j) in gen {
        if gen_j.is_empty() {
            return Err(Error::Consistency(format!("no generated utterances for {key}")));
        }
        let target = per_intent.unwrap_or(gen_j.len() * cfg.n);
        let mut out: Vec<String> = Vec::with_capacity(target);
        let mut pass = 0usize;
        while out.len() < target {
            let mut rng = seed::rng_from(seed_value, &["refine", &pass.to_string(), key.domain(), key.intent()]);
            let rendered: Vec<String> = (0..gen_j.len())
                .map(|i| build_refiner_prompt(key, &context(gen_j, i, cfg.m, &mut rng), cfg.n))
                .collect::<Result<_>>()?;
            let outputs: Vec<String> = rendered.par_iter().map(|r| handle.refine(r)).collect::<Result<_>>()?;
            for (i, o) in outputs.iter().enumerate() {
                let lines = output_lines(o, cfg.n, &cfg.cleanup);
                if lines.is_empty() {
                    passthrough += 1;
                    out.push(gen_j[i].clone());
                } else {
                    out.extend(lines);
                }
            }
            pass += 1;
        }
        out.truncate(target);
        texts.insert(key.clone(), out);
    }
    Ok(RefineOutcome { texts, passthrough })
}
