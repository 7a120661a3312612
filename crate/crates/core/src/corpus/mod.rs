//! Uniform in-memory corpus model shared by every pipeline stage.
//!
//! A [`Corpus`] is an ordered list of [`LabeledExample`]s plus an index from
//! [`IntentKey`] to example positions. It is immutable once built: stages
//! that "change" a corpus build a new one.

mod clinc;
pub mod fixtures;
mod sgd;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use clinc::{clinc150_domain_of, clinc150_inventory, load_clinc150, CLINC150_DOMAINS};
pub use sgd::{load_sgd_merged, load_sgd_merged_with_stats, sgd_domain_of_service, SgdStats, SGD_DOMAINS};

/// Lower-case a label and collapse every run of non-alphanumeric characters
/// into a single underscore.
pub fn canonicalize(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.trim().chars() {
        if ch.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

/// An (intent, domain) label pair in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntentKey {
    intent: String,
    domain: String,
}

impl IntentKey {
    pub fn new(intent: &str, domain: &str) -> Result<Self> {
        let intent = canonicalize(intent);
        let domain = canonicalize(domain);
        if intent.is_empty() || domain.is_empty() {
            return Err(Error::Argument(format!(
                "intent and domain names must be non-empty (got {intent:?} / {domain:?})"
            )));
        }
        Ok(Self { intent, domain })
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }
}

impl Ord for IntentKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.domain, &self.intent).cmp(&(&other.domain, &other.intent))
    }
}

impl PartialOrd for IntentKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for IntentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.domain, self.intent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Human,
    Generated,
    Refined,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
    #[default]
    Unassigned,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub key: IntentKey,
    pub origin: Origin,
    pub split: SplitTag,
}

impl LabeledExample {
    pub fn new(text: impl Into<String>, key: IntentKey, origin: Origin, split: SplitTag) -> Self {
        Self {
            text: text.into(),
            key,
            origin,
            split,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Clinc150,
    Sgd,
    #[default]
    Custom,
}

impl DatasetName {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Clinc150 => "clinc150",
            DatasetName::Sgd => "sgd",
            DatasetName::Custom => "custom",
        }
    }
}

impl std::str::FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clinc150" => Ok(DatasetName::Clinc150),
            "sgd" => Ok(DatasetName::Sgd),
            "custom" => Ok(DatasetName::Custom),
            other => Err(Error::Usage(format!(
                "dataset: unknown dataset `{other}` (expected clinc150, sgd or custom)"
            ))),
        }
    }
}

/// Domain and intent inventory of a corpus, derived from its examples.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: DatasetName,
    pub domains: Vec<String>,
    pub intents_per_domain: BTreeMap<String, Vec<String>>,
}

impl DatasetDescriptor {
    pub fn intent_count(&self) -> usize {
        self.intents_per_domain.values().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    examples: Vec<LabeledExample>,
    by_intent: BTreeMap<IntentKey, Vec<usize>>,
    descriptor: DatasetDescriptor,
}

impl Corpus {
    pub fn new(name: DatasetName, examples: Vec<LabeledExample>) -> Result<Self> {
        let mut by_intent: BTreeMap<IntentKey, Vec<usize>> = BTreeMap::new();
        for (pos, ex) in examples.iter().enumerate() {
            if ex.text.trim().is_empty() {
                return Err(Error::Schema(format!(
                    "example {pos} for intent {} has empty text",
                    ex.key
                )));
            }
            by_intent.entry(ex.key.clone()).or_default().push(pos);
        }
        let mut intents_per_domain: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for key in by_intent.keys() {
            intents_per_domain
                .entry(key.domain().to_string())
                .or_default()
                .push(key.intent().to_string());
        }
        let descriptor = DatasetDescriptor {
            name,
            domains: intents_per_domain.keys().cloned().collect(),
            intents_per_domain,
        };
        Ok(Self {
            examples,
            by_intent,
            descriptor,
        })
    }

    pub fn empty(name: DatasetName) -> Self {
        Self {
            examples: Vec::new(),
            by_intent: BTreeMap::new(),
            descriptor: DatasetDescriptor {
                name,
                ..Default::default()
            },
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn by_intent(&self) -> &BTreeMap<IntentKey, Vec<usize>> {
        &self.by_intent
    }

    pub fn descriptor(&self) -> &DatasetDescriptor {
        &self.descriptor
    }

    pub fn name(&self) -> DatasetName {
        self.descriptor.name
    }

    pub fn intents(&self) -> impl Iterator<Item = &IntentKey> {
        self.by_intent.keys()
    }

    pub fn intent_set(&self) -> BTreeSet<IntentKey> {
        self.by_intent.keys().cloned().collect()
    }

    pub fn domain_set(&self) -> BTreeSet<String> {
        self.descriptor.domains.iter().cloned().collect()
    }

    pub fn count_for(&self, key: &IntentKey) -> usize {
        self.by_intent.get(key).map_or(0, Vec::len)
    }

    pub fn examples_for<'a>(&'a self, key: &IntentKey) -> impl Iterator<Item = &'a LabeledExample> + 'a {
        self.by_intent
            .get(key)
            .into_iter()
            .flat_map(move |positions| positions.iter().map(move |&p| &self.examples[p]))
    }

    /// Utterances grouped per intent, in corpus order.
    pub fn texts_by_intent(&self) -> BTreeMap<IntentKey, Vec<String>> {
        self.by_intent
            .iter()
            .map(|(k, positions)| {
                (
                    k.clone(),
                    positions.iter().map(|&p| self.examples[p].text.clone()).collect(),
                )
            })
            .collect()
    }

    pub fn filter(&self, mut keep: impl FnMut(&LabeledExample) -> bool) -> Corpus {
        let examples = self.examples.iter().filter(|e| keep(e)).cloned().collect();
        Corpus::new(self.name(), examples).expect("subset of a valid corpus is valid")
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }
}

/// Keep at most `max_n` examples per intent, chosen uniformly at random.
///
/// Retained examples keep their relative order. The subsample for each intent
/// depends only on `(seed, intent)`, so the operation is reproducible and
/// idempotent.
pub fn cap_per_intent(corpus: &Corpus, max_n: usize, seed: u64) -> Result<Corpus> {
    if max_n == 0 {
        return Err(Error::Precondition("max_n must be at least 1".into()));
    }
    let mut keep = vec![true; corpus.len()];
    for (key, positions) in corpus.by_intent() {
        if positions.len() <= max_n {
            continue;
        }
        let mut rng = seed::rng_from(seed, &["cap", key.domain(), key.intent()]);
        let chosen: BTreeSet<usize> = index::sample(&mut rng, positions.len(), max_n)
            .into_iter()
            .collect();
        for (i, &pos) in positions.iter().enumerate() {
            keep[pos] = chosen.contains(&i);
        }
    }
    let examples = corpus
        .examples()
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(e, _)| e.clone())
        .collect();
    Corpus::new(corpus.name(), examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(i: &str, d: &str) -> IntentKey {
        IntentKey::new(i, d).unwrap()
    }

    fn corpus_with_counts(counts: &[usize]) -> Corpus {
        let mut examples = Vec::new();
        // interleave intents so order preservation is actually exercised
        let max = counts.iter().copied().max().unwrap_or(0);
        for i in 0..max {
            for (j, &n) in counts.iter().enumerate() {
                if i < n {
                    examples.push(LabeledExample::new(
                        format!("utterance {i} of intent {j}"),
                        key(&format!("intent_{j}"), "dom"),
                        Origin::Human,
                        SplitTag::Unassigned,
                    ));
                }
            }
        }
        Corpus::new(DatasetName::Custom, examples).unwrap()
    }

    #[test]
    fn canonical_names() {
        assert_eq!(canonicalize("  Kitchen/Dining "), "kitchen_dining");
        assert_eq!(canonicalize("freeze account"), "freeze_account");
        assert_eq!(canonicalize("freeze_account"), "freeze_account");
        assert!(IntentKey::new("  ", "banking").is_err());
    }

    #[test]
    fn index_covers_examples() {
        let c = corpus_with_counts(&[3, 5, 1]);
        assert_eq!(c.len(), 9);
        let total: usize = c.by_intent().values().map(Vec::len).sum();
        assert_eq!(total, c.len());
        assert_eq!(c.descriptor().intent_count(), 3);
    }

    #[test]
    fn empty_text_rejected() {
        let ex = LabeledExample::new("   ", key("a", "b"), Origin::Human, SplitTag::Train);
        assert!(matches!(Corpus::new(DatasetName::Custom, vec![ex]), Err(Error::Schema(_))));
    }

    #[test]
    fn cap_large_intent_exact() {
        let c = corpus_with_counts(&[3291, 128]);
        let capped = cap_per_intent(&c, 200, 9).unwrap();
        assert_eq!(capped.count_for(&key("intent_0", "dom")), 200);
        assert_eq!(capped.count_for(&key("intent_1", "dom")), 128);
    }

    #[test]
    fn cap_is_deterministic() {
        let c = corpus_with_counts(&[500, 20]);
        assert_eq!(cap_per_intent(&c, 50, 3).unwrap(), cap_per_intent(&c, 50, 3).unwrap());
        assert_ne!(cap_per_intent(&c, 50, 3).unwrap(), cap_per_intent(&c, 50, 4).unwrap());
    }

    #[test]
    fn cap_preserves_relative_order() {
        let c = corpus_with_counts(&[300, 300]);
        let capped = cap_per_intent(&c, 10, 1).unwrap();
        let original_pos = |text: &str| c.examples().iter().position(|e| e.text == text).unwrap();
        let positions: Vec<usize> = capped.examples().iter().map(|e| original_pos(&e.text)).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cap_zero_is_precondition_error() {
        let c = corpus_with_counts(&[3]);
        assert!(matches!(cap_per_intent(&c, 0, 1), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn cap_idempotent(counts in proptest::collection::vec(0usize..60, 1..5), max_n in 1usize..30, seed in any::<u64>()) {
            let c = corpus_with_counts(&counts);
            let once = cap_per_intent(&c, max_n, seed).unwrap();
            let twice = cap_per_intent(&once, max_n, seed).unwrap();
            prop_assert_eq!(&once, &twice);
            for (k, positions) in once.by_intent() {
                prop_assert_eq!(positions.len(), c.count_for(k).min(max_n));
            }
        }
    }
}
