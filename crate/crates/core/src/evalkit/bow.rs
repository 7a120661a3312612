//! Bag-of-words classifier backends.

use std::collections::{BTreeMap, HashMap};

use super::classifier::{cross_entropy, ClassifierBackend, IntentModel};
use super::diversity::tokenize;
use crate::error::{Error, Result};

fn bag(text: &str) -> BTreeMap<String, f64> {
    let mut b = BTreeMap::new();
    for t in tokenize(text) {
        *b.entry(t).or_insert(0.0) += 1.0;
    }
    b
}

fn softmax(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    for v in logits.iter_mut() {
        *v /= z;
    }
}

/// Nearest centroid by cosine similarity over summed word counts.
#[derive(Debug, Clone, Default)]
pub struct CentroidBackend;

/// Probabilities are a softmax over cosine similarities times this factor.
const CENTROID_SHARPNESS: f64 = 10.0;

#[derive(Debug, Clone)]
struct CentroidModel {
    sums: Vec<HashMap<String, f64>>,
    sq_norms: Vec<f64>,
}

impl ClassifierBackend for CentroidBackend {
    fn backend_id(&self) -> &str {
        "centroid"
    }

    fn init(&self, n_labels: usize, _train_texts: &[&str], _seed: u64) -> Result<Box<dyn IntentModel>> {
        Ok(Box::new(CentroidModel {
            sums: vec![HashMap::new(); n_labels],
            sq_norms: vec![0.0; n_labels],
        }))
    }
}

impl IntentModel for CentroidModel {
    fn train_batch(&mut self, batch: &[(&str, usize)]) -> Result<f64> {
        let mut loss = 0.0;
        for &(text, y) in batch {
            loss += cross_entropy(&self.predict_proba(text), y);
        }
        for &(text, y) in batch {
            if y >= self.sums.len() {
                return Err(Error::Argument(format!("label index {y} out of range")));
            }
            for (tok, c) in bag(text) {
                let slot = self.sums[y].entry(tok).or_insert(0.0);
                self.sq_norms[y] += (*slot + c).powi(2) - slot.powi(2);
                *slot += c;
            }
        }
        Ok(loss / batch.len().max(1) as f64)
    }

    fn predict_proba(&self, text: &str) -> Vec<f64> {
        let b = bag(text);
        let tn: f64 = b.values().map(|c| c * c).sum::<f64>().sqrt();
        let mut logits: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.sq_norms)
            .map(|(sum, sq)| {
                if tn == 0.0 || *sq == 0.0 {
                    return 0.0;
                }
                let dot: f64 = b.iter().map(|(t, c)| c * sum.get(t).copied().unwrap_or(0.0)).sum();
                CENTROID_SHARPNESS * dot / (tn * sq.sqrt())
            })
            .collect();
        softmax(&mut logits);
        logits
    }

    fn snapshot(&self) -> Box<dyn IntentModel> {
        Box::new(self.clone())
    }
}

/// Multinomial logistic regression over length-normalized word counts,
/// vocabulary fixed from the training texts.
#[derive(Debug, Clone)]
pub struct SoftmaxBackend {
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for SoftmaxBackend {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            l2: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
struct SoftmaxModel {
    vocab: HashMap<String, usize>,
    /// `weights[label][feature]`, the last feature being the bias.
    weights: Vec<Vec<f64>>,
    learning_rate: f64,
    l2: f64,
}

impl ClassifierBackend for SoftmaxBackend {
    fn backend_id(&self) -> &str {
        "softmax"
    }

    fn init(&self, n_labels: usize, train_texts: &[&str], _seed: u64) -> Result<Box<dyn IntentModel>> {
        let mut vocab = HashMap::new();
        for t in train_texts {
            for tok in tokenize(t) {
                let next = vocab.len();
                vocab.entry(tok).or_insert(next);
            }
        }
        let width = vocab.len() + 1;
        Ok(Box::new(SoftmaxModel {
            vocab,
            weights: vec![vec![0.0; width]; n_labels],
            learning_rate: self.learning_rate,
            l2: self.l2,
        }))
    }
}

impl SoftmaxModel {
    fn features(&self, text: &str) -> Vec<(usize, f64)> {
        let toks = tokenize(text);
        let mut f: BTreeMap<usize, f64> = BTreeMap::new();
        let scale = 1.0 / (toks.len().max(1) as f64).sqrt();
        for t in &toks {
            if let Some(&i) = self.vocab.get(t) {
                *f.entry(i).or_insert(0.0) += scale;
            }
        }
        let mut v: Vec<(usize, f64)> = f.into_iter().collect();
        v.push((self.vocab.len(), 1.0));
        v
    }

    fn proba(&self, x: &[(usize, f64)]) -> Vec<f64> {
        let mut logits: Vec<f64> = self.weights.iter().map(|w| x.iter().map(|(i, v)| w[*i] * v).sum()).collect();
        softmax(&mut logits);
        logits
    }
}

impl IntentModel for SoftmaxModel {
    fn train_batch(&mut self, batch: &[(&str, usize)]) -> Result<f64> {
        let n = batch.len().max(1) as f64;
        let mut grads: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.weights.len()];
        let mut loss = 0.0;
        for &(text, y) in batch {
            if y >= self.weights.len() {
                return Err(Error::Argument(format!("label index {y} out of range")));
            }
            let x = self.features(text);
            let p = self.proba(&x);
            loss += cross_entropy(&p, y);
            for (k, pk) in p.iter().enumerate() {
                let g = pk - if k == y { 1.0 } else { 0.0 };
                for (i, v) in &x {
                    *grads[k].entry(*i).or_insert(0.0) += g * v;
                }
            }
        }
        let decay = 1.0 - self.learning_rate * self.l2;
        for (w, g) in self.weights.iter_mut().zip(grads) {
            if self.l2 > 0.0 {
                w.iter_mut().for_each(|x| *x *= decay);
            }
            for (i, gi) in g {
                w[i] -= self.learning_rate * gi / n;
            }
        }
        Ok(loss / n)
    }

    fn predict_proba(&self, text: &str) -> Vec<f64> {
        self.proba(&self.features(text))
    }

    fn snapshot(&self) -> Box<dyn IntentModel> {
        Box::new(self.clone())
    }
}

/// Look up a classifier backend by name.
pub fn classifier_backend(kind: &str) -> Result<Box<dyn ClassifierBackend>> {
    match kind {
        "centroid" => Ok(Box::new(CentroidBackend)),
        "softmax" => Ok(Box::new(SoftmaxBackend::default())),
        other => Err(Error::Usage(format!(
            "classifier.kind: unknown classifier backend `{other}` (expected centroid or softmax)"
        ))),
    }
}
