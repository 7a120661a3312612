//! Lexical diversity (distinct-n) and length equalization across datasets.

use std::collections::{BTreeMap, HashSet};

use crate::corpus::IntentKey;
use crate::error::{Error, Result};
use crate::seed;
use rand::seq::SliceRandom;

/// Lower-cased whitespace tokens with punctuation stripped at both edges.
/// Tokens that are pure punctuation vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn word_count(text: &str) -> usize {
    tokenize(text).len()
}

/// Unique n-grams over total words of each document, averaged over documents.
///
/// A document is the concatenation of one intent's utterances, so n-grams
/// cross utterance boundaries.
pub fn distinct_n(documents: &[Vec<String>], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("distinct-n needs n >= 1".into()));
    }
    if documents.is_empty() {
        return Err(Error::Argument("distinct-n over an empty document set".into()));
    }
    let mut total = 0.0;
    for (i, doc) in documents.iter().enumerate() {
        let words: Vec<String> = doc.iter().flat_map(|u| tokenize(u)).collect();
        if words.is_empty() {
            return Err(Error::Argument(format!("document {i} has no words")));
        }
        let unique: HashSet<&[String]> = words.windows(n).collect();
        total += unique.len() as f64 / words.len() as f64;
    }
    Ok(total / documents.len() as f64)
}

pub fn distinct_n_by_intent(documents: &BTreeMap<IntentKey, Vec<String>>, n: usize) -> Result<f64> {
    let docs: Vec<Vec<String>> = documents.values().cloned().collect();
    distinct_n(&docs, n)
}

/// Per-intent utterance lists of one dataset.
pub type IntentTexts = BTreeMap<IntentKey, Vec<String>>;

/// Equalize per-intent word counts across datasets.
///
/// Per intent the budget is the smallest total word count among the
/// datasets. Each dataset's utterances are drawn in seeded random order
/// until the next one would overshoot; that one is cut to the remaining
/// word count.
pub fn truncate_for_comparison(
    datasets: &BTreeMap<String, IntentTexts>,
    seed_value: u64,
) -> Result<BTreeMap<String, IntentTexts>> {
    let Some((_, first)) = datasets.iter().next() else {
        return Ok(BTreeMap::new());
    };
    for (name, ds) in datasets {
        let missing: Vec<String> = first
            .keys()
            .filter(|k| !ds.contains_key(*k))
            .chain(ds.keys().filter(|k| !first.contains_key(*k)))
            .map(|k| k.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Consistency(format!(
                "dataset `{name}` does not cover the same intents; mismatched: {}",
                missing.join(", ")
            )));
        }
    }
    let mut out: BTreeMap<String, IntentTexts> = datasets.keys().map(|k| (k.clone(), BTreeMap::new())).collect();
    for key in first.keys() {
        let budget = datasets
            .values()
            .map(|ds| ds[key].iter().map(|u| word_count(u)).sum::<usize>())
            .min()
            .unwrap_or(0);
        for (name, ds) in datasets {
            let mut order: Vec<usize> = (0..ds[key].len()).collect();
            order.shuffle(&mut seed::rng_from(seed_value, &["truncate", name, key.domain(), key.intent()]));
            let mut used = 0;
            let mut kept = Vec::new();
            for i in order {
                let text = &ds[key][i];
                let words = word_count(text);
                if used + words <= budget {
                    used += words;
                    kept.push(text.clone());
                } else {
                    let rest = budget - used;
                    if rest > 0 {
                        kept.push(tokenize(text)[..rest].join(" "));
                    }
                    break;
                }
            }
            out.get_mut(name).expect("preallocated").insert(key.clone(), kept);
        }
    }
    Ok(out)
}
