//! Seeded per-trial partitions of domains into unseen / seen-train / seen-validation.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, DatasetName, IntentKey, SplitTag};
use crate::error::{Error, Result};
use crate::seed;

/// Domain counts and per-intent quotas of one evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitProtocol {
    pub unseen_domains: usize,
    pub val_domains: usize,
    pub per_intent_generation_count: usize,
    /// Cap on human examples per seen-domain intent (merged-split datasets only).
    #[serde(default)]
    pub seen_cap: Option<usize>,
}

impl SplitProtocol {
    pub const CLINC150: SplitProtocol = SplitProtocol {
        unseen_domains: 5,
        val_domains: 1,
        per_intent_generation_count: 100,
        seen_cap: None,
    };

    pub const SGD: SplitProtocol = SplitProtocol {
        unseen_domains: 8,
        val_domains: 3,
        per_intent_generation_count: 200,
        seen_cap: Some(200),
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub trial_id: u32,
    pub seed: u64,
    pub dataset: DatasetName,
    pub unseen_domains: BTreeSet<String>,
    pub seen_train_domains: BTreeSet<String>,
    pub seen_val_domains: BTreeSet<String>,
    pub per_intent_generation_count: usize,
    #[serde(default)]
    pub seen_cap: Option<usize>,
}

impl ExperimentPlan {
    pub fn seen_domains(&self) -> BTreeSet<String> {
        self.seen_train_domains.union(&self.seen_val_domains).cloned().collect()
    }

    pub fn all_domains(&self) -> BTreeSet<String> {
        let mut all = self.seen_domains();
        all.extend(self.unseen_domains.iter().cloned());
        all
    }

    pub fn is_unseen(&self, domain: &str) -> bool {
        self.unseen_domains.contains(domain)
    }

    /// The three domain sets are pairwise disjoint.
    pub fn is_partition(&self) -> bool {
        self.unseen_domains.is_disjoint(&self.seen_train_domains)
            && self.unseen_domains.is_disjoint(&self.seen_val_domains)
            && self.seen_train_domains.is_disjoint(&self.seen_val_domains)
    }
}

const MAX_REDRAWS: usize = 64;

/// Draw `n_trials` plans over `domains`.
///
/// Each trial shuffles the domain list with its own stream: the first
/// `unseen_domains` become unseen, the remainder is shuffled again and its
/// first `val_domains` become validation domains. A draw repeating an earlier
/// trial's unseen set is redrawn (bounded), so trials differ when possible.
pub fn plan_trials(
    dataset: DatasetName,
    domains: &[String],
    protocol: SplitProtocol,
    seed_value: u64,
    n_trials: usize,
) -> Result<Vec<ExperimentPlan>> {
    if n_trials == 0 {
        return Err(Error::Precondition("n_trials must be at least 1".into()));
    }
    let mut inventory: Vec<String> = domains.to_vec();
    inventory.sort();
    inventory.dedup();
    if protocol.unseen_domains == 0 || protocol.unseen_domains + protocol.val_domains >= inventory.len() {
        return Err(Error::Argument(format!(
            "cannot split {} domains into {} unseen + {} validation + at least one training domain",
            inventory.len(),
            protocol.unseen_domains,
            protocol.val_domains
        )));
    }

    let mut used: HashSet<BTreeSet<String>> = HashSet::new();
    let mut plans = Vec::with_capacity(n_trials);
    for trial in 1..=n_trials as u32 {
        let trial_seed = seed::derive(seed_value, &["trial", &trial.to_string()]);
        let mut rng = seed::rng_from(trial_seed, &["domains"]);
        let mut order = inventory.clone();
        for _ in 0..MAX_REDRAWS {
            order.shuffle(&mut rng);
            if !used.contains(&order[..protocol.unseen_domains].iter().cloned().collect::<BTreeSet<_>>()) {
                break;
            }
        }
        let unseen: BTreeSet<String> = order[..protocol.unseen_domains].iter().cloned().collect();
        let mut rest = order[protocol.unseen_domains..].to_vec();
        rest.shuffle(&mut rng);
        used.insert(unseen.clone());
        plans.push(ExperimentPlan {
            trial_id: trial,
            seed: trial_seed,
            dataset,
            unseen_domains: unseen,
            seen_val_domains: rest[..protocol.val_domains].iter().cloned().collect(),
            seen_train_domains: rest[protocol.val_domains..].iter().cloned().collect(),
            per_intent_generation_count: protocol.per_intent_generation_count,
            seen_cap: protocol.seen_cap,
        });
    }
    Ok(plans)
}

pub fn plan_clinc150_trials(seed_value: u64, n_trials: usize) -> Result<Vec<ExperimentPlan>> {
    let domains: Vec<String> = corpus::CLINC150_DOMAINS.iter().map(|(d, _)| d.to_string()).collect();
    plan_trials(DatasetName::Clinc150, &domains, SplitProtocol::CLINC150, seed_value, n_trials)
}

pub fn plan_sgd_trials(seed_value: u64, n_trials: usize) -> Result<Vec<ExperimentPlan>> {
    let domains: Vec<String> = corpus::SGD_DOMAINS.iter().map(|d| d.to_string()).collect();
    plan_trials(DatasetName::Sgd, &domains, SplitProtocol::SGD, seed_value, n_trials)
}

/// One trial's data, routed by domain membership.
#[derive(Debug, Clone)]
pub struct TrialBundle {
    pub plan: ExperimentPlan,
    pub seen_train: Corpus,
    pub seen_val: Corpus,
    pub unseen_test: Corpus,
    pub unseen_intents: Vec<IntentKey>,
}

impl TrialBundle {
    /// All seen-domain human data (training plus validation domains).
    pub fn seen_labeled(&self) -> Corpus {
        let mut examples = self.seen_train.examples().to_vec();
        examples.extend(self.seen_val.examples().iter().cloned());
        Corpus::new(self.seen_train.name(), examples).expect("union of valid corpora")
    }

    pub fn seen_intents(&self) -> BTreeSet<IntentKey> {
        let mut s = self.seen_train.intent_set();
        s.extend(self.seen_val.intent_set());
        s
    }
}

fn uses_merged_splits(plan: &ExperimentPlan, c: &Corpus) -> bool {
    plan.dataset == DatasetName::Sgd
        || !c.examples().iter().any(|e| matches!(e.split, SplitTag::Train | SplitTag::Test))
}

/// Route a corpus into a [`TrialBundle`] according to `plan`.
///
/// Corpora with official train/test tags (CLINC150) contribute seen-domain
/// train utterances and unseen-domain test utterances. Merged corpora (SGD)
/// cap every seen-domain intent at `plan.seen_cap` and send all unseen-domain
/// utterances to the test set.
pub fn materialize_trial(plan: &ExperimentPlan, c: &Corpus) -> Result<TrialBundle> {
    let available = c.domain_set();
    let missing: Vec<_> = plan.all_domains().into_iter().filter(|d| !available.contains(d)).collect();
    if !missing.is_empty() {
        return Err(Error::Consistency(format!(
            "plan {} references domain(s) absent from the corpus: {}",
            plan.trial_id,
            missing.join(", ")
        )));
    }
    if !plan.is_partition() {
        return Err(Error::Consistency(format!("plan {} domain sets overlap", plan.trial_id)));
    }

    let (seen_source, test_source) = if uses_merged_splits(plan, c) {
        let seen = c.filter(|e| !plan.is_unseen(e.key.domain()));
        let seen = match plan.seen_cap {
            Some(cap) => corpus::cap_per_intent(&seen, cap, seed::derive(plan.seed, &["cap"]))?,
            None => seen,
        };
        (seen, c.filter(|e| plan.is_unseen(e.key.domain())))
    } else {
        (
            c.filter(|e| e.split == SplitTag::Train && !plan.is_unseen(e.key.domain())),
            c.filter(|e| e.split == SplitTag::Test && plan.is_unseen(e.key.domain())),
        )
    };

    let unseen_intents = c.intents().filter(|k| plan.is_unseen(k.domain())).cloned().collect();
    Ok(TrialBundle {
        seen_train: seen_source.filter(|e| plan.seen_train_domains.contains(e.key.domain())),
        seen_val: seen_source.filter(|e| plan.seen_val_domains.contains(e.key.domain())),
        unseen_test: test_source,
        unseen_intents,
        plan: plan.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures;

    #[test]
    fn clinc_plan_shape_and_determinism() {
        let plans = plan_clinc150_trials(11, 5).unwrap();
        assert_eq!(plans, plan_clinc150_trials(11, 5).unwrap());
        for p in &plans {
            assert_eq!(
                (p.unseen_domains.len(), p.seen_train_domains.len(), p.seen_val_domains.len()),
                (5, 4, 1)
            );
            assert!(p.is_partition());
            assert_eq!(p.all_domains().len(), 10);
            assert_eq!(p.per_intent_generation_count, 100);
        }
        let distinct: HashSet<_> = plans.iter().map(|p| p.unseen_domains.clone()).collect();
        assert_eq!(distinct.len(), 5);
    }

    #[test]
    fn sgd_plan_shape() {
        let plans = plan_sgd_trials(3, 5).unwrap();
        for p in &plans {
            assert_eq!(
                (p.unseen_domains.len(), p.seen_train_domains.len(), p.seen_val_domains.len()),
                (8, 9, 3)
            );
            assert_eq!(p.per_intent_generation_count, 200);
        }
        assert_eq!(plans, plan_sgd_trials(3, 5).unwrap());
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(plan_clinc150_trials(1, 0).is_err());
    }

    #[test]
    fn clinc_materialized_counts() {
        let c = fixtures::clinc150_shaped(100, 30);
        let plan = &plan_clinc150_trials(5, 1).unwrap()[0];
        let b = materialize_trial(plan, &c).unwrap();
        assert_eq!(b.unseen_intents.len(), 75);
        assert_eq!(b.seen_train.len(), 4 * 15 * 100);
        assert_eq!(b.seen_val.len(), 15 * 100);
        assert_eq!(b.seen_labeled().len(), 7_500);
        assert_eq!(b.unseen_test.len(), 2_250);
        assert!(b.seen_intents().is_disjoint(&b.unseen_intents.iter().cloned().collect()));
    }

    #[test]
    fn sgd_materialized_cap_and_routing() {
        let c = fixtures::sgd_shaped(1);
        let plan = &plan_sgd_trials(9, 1).unwrap()[0];
        let b = materialize_trial(plan, &c).unwrap();
        for k in b.seen_intents() {
            let n = b.seen_train.count_for(&k) + b.seen_val.count_for(&k);
            assert_eq!(n, c.count_for(&k).min(200));
        }
        let unseen_total: usize = b.unseen_intents.iter().map(|k| c.count_for(k)).sum();
        assert_eq!(b.unseen_test.len(), unseen_total);
        assert_eq!(b.seen_intents().len() + b.unseen_intents.len(), 46);
    }

    #[test]
    fn unknown_domain_is_consistency_error() {
        let c = fixtures::clinc150_shaped(2, 1);
        let mut plan = plan_clinc150_trials(5, 1).unwrap().remove(0);
        let first = plan.unseen_domains.iter().next().unwrap().clone();
        plan.unseen_domains.remove(&first);
        plan.unseen_domains.insert("nonexistent".into());
        assert!(matches!(materialize_trial(&plan, &c), Err(Error::Consistency(_))));
    }
}
