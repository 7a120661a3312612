//! Lightweight sequence-to-sequence backends: an identity double and a
//! learned token filter.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::json;

use super::{rendered_inputs, RefinementExample, RefinerConfig, RefinerModel, Seq2SeqBackend};
use crate::error::{Error, Result};
use crate::evalkit::tokenize;

/// Returns the current (slot-0) utterance unchanged.
#[derive(Debug, Clone, Default)]
pub struct IdentityBackend;

#[derive(Debug, Clone)]
struct IdentityModel;

impl Seq2SeqBackend for IdentityBackend {
    fn backend_id(&self) -> &str {
        "identity"
    }

    fn init(&self, _cfg: &RefinerConfig, _training: &[RefinementExample]) -> Result<Box<dyn RefinerModel>> {
        Ok(Box::new(IdentityModel))
    }
}

impl RefinerModel for IdentityModel {
    fn train_batch(&mut self, _batch: &[&RefinementExample]) -> Result<f64> {
        Ok(0.0)
    }

    fn refine(&self, rendered_input: &str) -> Result<String> {
        Ok(rendered_inputs(rendered_input).first().map(|s| s.to_string()).unwrap_or_default())
    }

    fn snapshot(&self) -> Box<dyn RefinerModel> {
        Box::new(IdentityModel)
    }

    fn to_json(&self) -> serde_json::Value {
        json!({ "kind": "identity" })
    }
}

/// Learns which words of the current utterance survive into human phrasing.
///
/// Each slot-0 token gets a logistic keep score from its support across the
/// m inputs, how often the word survived in training pairs, and how much of
/// its line consists of words that never survive. Kept tokens form the
/// output; if none survive, the best-scoring tokens of the whole context are
/// used instead, up to the mean target length.
#[derive(Debug, Clone)]
pub struct LexicalBackend {
    pub learning_rate: f64,
    /// Gradient iterations per training batch.
    pub inner_iterations: usize,
    /// Vocabulary size of the keep-rate table in parameter-efficient mode.
    pub compact_vocabulary: usize,
}

impl Default for LexicalBackend {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            inner_iterations: 20,
            compact_vocabulary: 256,
        }
    }
}

const N_FEATURES: usize = 5;
/// Words below this survival rate (with enough evidence) count as noise.
const NOISE_RATE: f64 = 0.05;
const NOISE_MIN_SEEN: f64 = 3.0;
/// Pseudo-count pulling sparse survival rates toward the base rate.
const SMOOTHING: f64 = 2.0;

#[derive(Debug, Clone)]
struct LexicalModel {
    /// word → (times in slot 0, times also in the target)
    table: HashMap<String, (f64, f64)>,
    base_rate: f64,
    mean_target_len: f64,
    weights: [f64; N_FEATURES],
    learning_rate: f64,
    inner_iterations: usize,
}

impl Seq2SeqBackend for LexicalBackend {
    fn backend_id(&self) -> &str {
        "lexical"
    }

    fn init(&self, cfg: &RefinerConfig, training: &[RefinementExample]) -> Result<Box<dyn RefinerModel>> {
        if training.is_empty() {
            return Err(Error::backend("lexical", "no training pairs"));
        }
        let mut table: HashMap<String, (f64, f64)> = HashMap::new();
        let (mut tokens, mut kept, mut target_len) = (0.0, 0.0, 0.0);
        for ex in training {
            let target: BTreeSet<String> = ex.target_utterances.iter().flat_map(|t| tokenize(t)).collect();
            target_len += ex.target_utterances.iter().map(|t| tokenize(t).len()).sum::<usize>() as f64
                / ex.target_utterances.len() as f64;
            for tok in tokenize(&ex.input_utterances[0]) {
                let hit = target.contains(&tok);
                let e = table.entry(tok).or_insert((0.0, 0.0));
                e.0 += 1.0;
                tokens += 1.0;
                if hit {
                    e.1 += 1.0;
                    kept += 1.0;
                }
            }
        }
        if cfg.parameter_efficient && table.len() > self.compact_vocabulary {
            let mut by_freq: Vec<(String, (f64, f64))> = table.into_iter().collect();
            by_freq.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
            by_freq.truncate(self.compact_vocabulary);
            table = by_freq.into_iter().collect();
        }
        Ok(Box::new(LexicalModel {
            table,
            base_rate: if tokens > 0.0 { kept / tokens } else { 0.5 },
            mean_target_len: target_len / training.len() as f64,
            weights: [0.0; N_FEATURES],
            learning_rate: self.learning_rate,
            inner_iterations: self.inner_iterations,
        }))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LexicalModel {
    fn survival(&self, tok: &str) -> Option<f64> {
        self.table
            .get(tok)
            .map(|(seen, kept)| (kept + SMOOTHING * self.base_rate) / (seen + SMOOTHING))
    }

    fn is_noise(&self, tok: &str) -> bool {
        self.table
            .get(tok)
            .is_some_and(|(seen, _)| *seen >= NOISE_MIN_SEEN && self.survival(tok).unwrap_or(1.0) < NOISE_RATE)
    }

    /// Feature rows for the tokens of `line`, given all context lines.
    fn features(&self, line: &[String], context: &[Vec<String>]) -> Vec<[f64; N_FEATURES]> {
        let noise_density = if line.is_empty() {
            0.0
        } else {
            line.iter().filter(|t| self.is_noise(t)).count() as f64 / line.len() as f64
        };
        line.iter()
            .map(|t| {
                let support = context.iter().filter(|c| c.contains(t)).count() as f64 / context.len() as f64;
                [
                    1.0,
                    support,
                    self.survival(t).unwrap_or(self.base_rate),
                    noise_density,
                    if self.is_noise(t) { 1.0 } else { 0.0 },
                ]
            })
            .collect()
    }

    fn score(&self, f: &[f64; N_FEATURES]) -> f64 {
        sigmoid(self.weights.iter().zip(f).map(|(w, x)| w * x).sum())
    }
}

impl RefinerModel for LexicalModel {
    fn train_batch(&mut self, batch: &[&RefinementExample]) -> Result<f64> {
        let mut rows: Vec<([f64; N_FEATURES], f64)> = Vec::new();
        for ex in batch {
            let ctx: Vec<Vec<String>> = ex.input_utterances.iter().map(|u| tokenize(u)).collect();
            let target: BTreeSet<String> = ex.target_utterances.iter().flat_map(|t| tokenize(t)).collect();
            for (f, tok) in self.features(&ctx[0], &ctx).into_iter().zip(&ctx[0]) {
                rows.push((f, if target.contains(tok) { 1.0 } else { 0.0 }));
            }
        }
        if rows.is_empty() {
            return Ok(0.0);
        }
        let log_loss = |m: &Self| -> f64 {
            rows.iter()
                .map(|(f, y)| {
                    let p = m.score(f).clamp(1e-12, 1.0 - 1e-12);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / rows.len() as f64
        };
        let before = log_loss(self);
        for _ in 0..self.inner_iterations {
            let mut grad = [0.0; N_FEATURES];
            for (f, y) in &rows {
                let g = self.score(f) - y;
                for (gi, xi) in grad.iter_mut().zip(f) {
                    *gi += g * xi;
                }
            }
            for (w, g) in self.weights.iter_mut().zip(grad) {
                *w -= self.learning_rate * g / rows.len() as f64;
            }
        }
        Ok(before)
    }

    fn refine(&self, rendered_input: &str) -> Result<String> {
        let ctx: Vec<Vec<String>> = rendered_inputs(rendered_input).iter().map(|u| tokenize(u)).collect();
        let Some(current) = ctx.first() else {
            return Ok(String::new());
        };
        let kept: Vec<&str> = current
            .iter()
            .zip(self.features(current, &ctx))
            .filter(|(_, f)| self.score(f) >= self.base_rate)
            .map(|(t, _)| t.as_str())
            .collect();
        if !kept.is_empty() {
            return Ok(kept.join(" "));
        }
        // rank context tokens by their best score on any line, then by total score
        let mut votes: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
        let mut pos = 0;
        for line in &ctx {
            for (t, f) in line.iter().zip(self.features(line, &ctx)) {
                let p = self.score(&f);
                let e = votes.entry(t.as_str()).or_insert((0.0, 0.0, pos));
                e.0 = e.0.max(p);
                e.1 += p;
                pos += 1;
            }
        }
        let mut ranked: Vec<(&str, (f64, f64, usize))> = votes.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then(b.1 .1.total_cmp(&a.1 .1)).then(a.1 .2.cmp(&b.1 .2)));
        ranked.truncate(self.mean_target_len.round().max(1.0) as usize);
        ranked.sort_by_key(|r| r.1 .2);
        Ok(ranked.iter().map(|r| r.0).collect::<Vec<_>>().join(" "))
    }

    fn snapshot(&self) -> Box<dyn RefinerModel> {
        Box::new(self.clone())
    }

    fn to_json(&self) -> serde_json::Value {
        let table: BTreeMap<&String, [f64; 2]> = self.table.iter().map(|(k, v)| (k, [v.0, v.1])).collect();
        json!({
            "kind": "lexical",
            "weights": self.weights,
            "base_rate": self.base_rate,
            "mean_target_len": self.mean_target_len,
            "table": table,
        })
    }
}

/// Look up a sequence-to-sequence backend by name.
pub fn seq2seq_backend(kind: &str) -> Result<Box<dyn Seq2SeqBackend>> {
    match kind {
        "identity" => Ok(Box::new(IdentityBackend)),
        "lexical" => Ok(Box::new(LexicalBackend::default())),
        other => Err(Error::Usage(format!(
            "seq2seq.kind: unknown sequence-to-sequence backend `{other}` (expected identity or lexical)"
        ))),
    }
}
