//! Intent classifier training with a seeded stratified split and early stopping.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, IntentKey};
use crate::error::{Error, Result};
use crate::seed;

/// Training recipe for the downstream classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierTrainSpec {
    pub batch_size: usize,
    pub max_steps: usize,
    pub train_fraction: f64,
    /// Validation cadence in optimizer steps.
    pub eval_every: usize,
    /// Non-improving validation checks tolerated before stopping.
    pub early_stopping_patience: usize,
    pub seed: u64,
}

impl Default for ClassifierTrainSpec {
    fn default() -> Self {
        Self {
            batch_size: 60,
            max_steps: 1800,
            train_fraction: 0.8,
            eval_every: 100,
            early_stopping_patience: 3,
            seed: 0,
        }
    }
}

/// A trainable model over a fixed label set, addressed by label index.
pub trait IntentModel: Send + Sync {
    /// One optimizer step; returns the batch loss before the update.
    fn train_batch(&mut self, batch: &[(&str, usize)]) -> Result<f64>;

    /// Probability per label index.
    fn predict_proba(&self, text: &str) -> Vec<f64>;

    fn snapshot(&self) -> Box<dyn IntentModel>;
}

pub trait ClassifierBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    /// A fresh model for `n_labels` labels; `train_texts` lets a backend fix its vocabulary.
    fn init(&self, n_labels: usize, train_texts: &[&str], seed: u64) -> Result<Box<dyn IntentModel>>;
}

/// What happened during training, for inspection and the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Positions in the training corpus used for fitting / validation.
    pub train_positions: Vec<usize>,
    pub val_positions: Vec<usize>,
    pub steps: usize,
    pub examples_seen: usize,
    pub max_batch: usize,
    /// `(step, validation loss)` at every check.
    pub checks: Vec<(usize, f64)>,
    pub best_step: usize,
    pub stopped_early: bool,
}

pub struct TrainedClassifier {
    backend_id: String,
    labels: Vec<IntentKey>,
    index: BTreeMap<IntentKey, usize>,
    model: Box<dyn IntentModel>,
    log: TrainingLog,
}

impl std::fmt::Debug for TrainedClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedClassifier")
            .field("backend_id", &self.backend_id)
            .field("labels", &self.labels.len())
            .field("log", &self.log)
            .finish()
    }
}

impl TrainedClassifier {
    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn labels(&self) -> &[IntentKey] {
        &self.labels
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn is_trained(&self) -> bool {
        self.log.steps > 0
    }

    pub fn predict_proba(&self, text: &str) -> Vec<f64> {
        self.model.predict_proba(text)
    }

    /// Most probable label; ties go to the earlier label.
    pub fn predict(&self, text: &str) -> &IntentKey {
        let p = self.model.predict_proba(text);
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        &self.labels[best]
    }

    fn label_index(&self, key: &IntentKey) -> Result<usize> {
        self.index
            .get(key)
            .copied()
            .ok_or_else(|| Error::Consistency(format!("intent {key} is not in the classifier's label set")))
    }

    /// Mean cross-entropy of `(text, label)` items.
    pub fn loss<'a>(&self, items: impl IntoIterator<Item = (&'a str, &'a IntentKey)>) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for (text, key) in items {
            let i = self.label_index(key)?;
            total += cross_entropy(&self.model.predict_proba(text), i);
            n += 1;
        }
        if n == 0 {
            return Err(Error::Argument("loss over no examples".into()));
        }
        Ok(total / n as f64)
    }
}

pub(crate) fn cross_entropy(p: &[f64], label: usize) -> f64 {
    -p[label].max(1e-12).ln()
}

/// Seeded stratified split of corpus positions into (train, validation).
pub fn stratified_split(data: &Corpus, train_fraction: f64, seed_value: u64) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (key, positions) in data.by_intent() {
        let mut p = positions.clone();
        p.shuffle(&mut seed::rng_from(seed_value, &["classifier-split", key.domain(), key.intent()]));
        let n_val = (((1.0 - train_fraction) * p.len() as f64).round() as usize).min(p.len().saturating_sub(1));
        val.extend_from_slice(&p[..n_val]);
        train.extend_from_slice(&p[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Train on `data` with early stopping on held-out cross-entropy; the best
/// checkpoint is returned.
pub fn train_intent_classifier(
    data: &Corpus,
    spec: &ClassifierTrainSpec,
    backend: &dyn ClassifierBackend,
) -> Result<TrainedClassifier> {
    if data.is_empty() {
        return Err(Error::Argument("classifier training data is empty".into()));
    }
    let labels: Vec<IntentKey> = data.intents().cloned().collect();
    if labels.len() < 2 {
        return Err(Error::Argument(format!(
            "classifier training needs at least 2 intents, got {}",
            labels.len()
        )));
    }
    if spec.batch_size == 0 || spec.max_steps == 0 || spec.eval_every == 0 {
        return Err(Error::Argument("batch_size, max_steps and eval_every must be positive".into()));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(Error::Argument(format!("train_fraction {} outside (0, 1]", spec.train_fraction)));
    }
    let index: BTreeMap<IntentKey, usize> = labels.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let ex = data.examples();
    let (train, val) = stratified_split(data, spec.train_fraction, spec.seed);
    let item = |p: usize| (ex[p].text.as_str(), index[&ex[p].key]);

    let train_texts: Vec<&str> = train.iter().map(|&p| ex[p].text.as_str()).collect();
    let mut model = backend.init(labels.len(), &train_texts, seed::derive(spec.seed, &["classifier-init"]))?;
    let val_loss = |m: &dyn IntentModel| -> f64 {
        val.iter()
            .map(|&p| {
                let (t, y) = item(p);
                cross_entropy(&m.predict_proba(t), y)
            })
            .sum::<f64>()
            / val.len() as f64
    };

    let mut log = TrainingLog {
        train_positions: train.clone(),
        val_positions: val.clone(),
        ..Default::default()
    };
    let mut rng = seed::rng_from(spec.seed, &["classifier-batches"]);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let batch_len = spec.batch_size.min(train.len());
    let mut best: Option<(f64, Box<dyn IntentModel>)> = None;
    let mut bad = 0;

    for step in 1..=spec.max_steps {
        let mut batch = Vec::with_capacity(batch_len);
        while batch.len() < batch_len {
            if cursor == order.len() {
                order = train.clone();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(item(order[cursor]));
            cursor += 1;
        }
        model.train_batch(&batch)?;
        log.steps = step;
        log.examples_seen += batch.len();
        log.max_batch = log.max_batch.max(batch.len());

        if !val.is_empty() && (step % spec.eval_every == 0 || step == spec.max_steps) {
            let loss = val_loss(model.as_ref());
            log.checks.push((step, loss));
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, model.snapshot()));
                log.best_step = step;
                bad = 0;
            } else {
                bad += 1;
                if bad >= spec.early_stopping_patience {
                    log.stopped_early = true;
                    break;
                }
            }
        }
    }
    let model = match best {
        Some((_, m)) => m,
        None => {
            log.best_step = log.steps;
            model
        }
    };
    Ok(TrainedClassifier {
        backend_id: backend.backend_id().to_string(),
        labels,
        index,
        model,
        log,
    })
}

/// Fraction of test examples whose predicted intent is exactly right.
pub fn evaluate_accuracy(handle: &TrainedClassifier, test: &Corpus) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Argument("accuracy over an empty test set".into()));
    }
    for key in test.intents() {
        handle.label_index(key)?;
    }
    let correct = test.examples().iter().filter(|e| handle.predict(&e.text) == &e.key).count();
    Ok(correct as f64 / test.len() as f64)
}
