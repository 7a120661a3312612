//! Stage orchestration: split, generate, select, refine, evaluate, report.
//!
//! Every stage reads the run manifest written by `split`, writes its
//! artifacts atomically, records their hashes and saves the manifest again.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use super::artifacts::{intent_file_name, read_jsonl, to_jsonl, write_atomic, UtteranceRecord};
use super::config::{GeneratorKind, PipelineConfig};
use super::manifest::{FailureRecord, RunManifest};
use super::plot::{bar_chart_svg, Series};
use crate::corpus::{self, Corpus, DatasetName, IntentKey, LabeledExample, Origin, SplitTag};
use crate::error::{Error, Result};
use crate::evalkit::{
    aggregate_trials, classifier_backend, distinct_n_by_intent, evaluate_accuracy, train_intent_classifier,
    truncate_for_comparison, AggregateReport, ClassifierBackend, ClassifierTrainSpec, IntentTexts, TrialReport,
};
use crate::genkit::{generate_many, GenerationJob, GenerationRecord, GeneratorBackend, MockGenerator, RemoteGenerator};
use crate::refiner::{
    refine_corpus, sample_training_pairs, seq2seq_backend, train_refiner, RefinerConfig, Seq2SeqBackend,
    ValidationMonitor,
};
use crate::seed::{self, SeedStreams};
use crate::selection::{score_all, supergen_select, zerogen_select, Strategy};
use crate::splitter::{materialize_trial, plan_trials, ExperimentPlan, TrialBundle};

pub const STAGES: [&str; 6] = ["split", "generate", "select", "refine", "evaluate", "report"];

const GENERATED: &str = "generated";
const POOL: &str = "generated_pool";

pub fn load_dataset(cfg: &PipelineConfig) -> Result<Corpus> {
    match cfg.dataset {
        DatasetName::Clinc150 => corpus::load_clinc150(&cfg.dataset_path),
        DatasetName::Sgd => corpus::load_sgd_merged(&cfg.dataset_path),
        DatasetName::Custom => super::artifacts::read_corpus_jsonl(&cfg.dataset_path),
    }
}

pub fn build_generator(cfg: &PipelineConfig) -> Result<Arc<dyn GeneratorBackend>> {
    let g = &cfg.generator;
    Ok(match g.kind {
        GeneratorKind::Mock => {
            let script = g
                .script
                .as_ref()
                .ok_or_else(|| Error::Usage("generator.script: the mock generator needs a script file".into()))?;
            Arc::new(MockGenerator::from_jsonl(script)?.rotate_by_seed(g.rotate_by_seed))
        }
        GeneratorKind::Remote => Arc::new(RemoteGenerator::from_env(g.remote.clone().unwrap_or_default())),
    })
}

pub fn trial_dir(out: &Path, trial_id: u32) -> PathBuf {
    out.join(format!("trial_{trial_id}"))
}

pub fn selected_path(out: &Path, trial_id: u32, s: Strategy) -> PathBuf {
    match s {
        Strategy::Refined => trial_dir(out, trial_id).join("refined").join("refined.jsonl"),
        other => trial_dir(out, trial_id).join("selected").join(format!("{}.jsonl", other.as_str())),
    }
}

pub fn refiner_reference_path(out: &Path, trial_id: u32) -> PathBuf {
    trial_dir(out, trial_id).join("refined").join("refiner.json")
}

pub fn reports_dir(out: &Path) -> PathBuf {
    out.join("reports")
}

/// A run in progress: the manifest plus optional backend overrides that take
/// precedence over the configured kinds.
pub struct Pipeline {
    pub manifest: RunManifest,
    /// Skip generation files whose recorded hash still matches.
    pub resume: bool,
    generator: Option<Arc<dyn GeneratorBackend>>,
    seq2seq: Option<Arc<dyn Seq2SeqBackend>>,
    classifier: Option<Arc<dyn ClassifierBackend>>,
}

impl Pipeline {
    /// Plan trials from a validated config and write a fresh manifest.
    pub fn split(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let data = load_dataset(&config)?;
        let domains: Vec<String> = data.domain_set().into_iter().collect();
        let streams = SeedStreams::new(config.seeds.root);
        let plans = plan_trials(config.dataset, &domains, config.protocol(), streams.split(), config.n_trials)?;
        let mut manifest = RunManifest::new(config, plans);
        manifest.begin_stage("split");
        manifest.finish_stage("split");
        manifest.save()?;
        Ok(Self::from_manifest(manifest))
    }

    pub fn open(out_dir: &Path) -> Result<Self> {
        Ok(Self::from_manifest(RunManifest::load(out_dir)?))
    }

    pub fn from_manifest(manifest: RunManifest) -> Self {
        Self {
            manifest,
            resume: false,
            generator: None,
            seq2seq: None,
            classifier: None,
        }
    }

    pub fn with_generator(mut self, b: Arc<dyn GeneratorBackend>) -> Self {
        self.generator = Some(b);
        self
    }

    pub fn with_seq2seq(mut self, b: Arc<dyn Seq2SeqBackend>) -> Self {
        self.seq2seq = Some(b);
        self
    }

    pub fn with_classifier(mut self, b: Arc<dyn ClassifierBackend>) -> Self {
        self.classifier = Some(b);
        self
    }

    pub fn with_resume(mut self, on: bool) -> Self {
        self.resume = on;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.manifest.config
    }

    fn out(&self) -> PathBuf {
        self.manifest.out_dir().to_path_buf()
    }

    fn generator(&self) -> Result<Arc<dyn GeneratorBackend>> {
        match &self.generator {
            Some(g) => Ok(g.clone()),
            None => build_generator(self.config()),
        }
    }

    fn seq2seq(&self) -> Result<Arc<dyn Seq2SeqBackend>> {
        match &self.seq2seq {
            Some(b) => Ok(b.clone()),
            None => Ok(Arc::from(seq2seq_backend(&self.config().seq2seq.kind)?)),
        }
    }

    fn classifier(&self) -> Result<Arc<dyn ClassifierBackend>> {
        match &self.classifier {
            Some(b) => Ok(b.clone()),
            None => Ok(Arc::from(classifier_backend(&self.config().classifier.kind)?)),
        }
    }

    fn bundles(&self) -> Result<Vec<TrialBundle>> {
        let data = load_dataset(self.config())?;
        self.manifest.plans.iter().map(|p| materialize_trial(p, &data)).collect()
    }

    fn write_records(&mut self, path: &Path, records: &[UtteranceRecord], stage: &str, trial: u32) -> Result<()> {
        write_atomic(path, &to_jsonl(records)?)?;
        self.manifest.record(path, stage, Some(trial))
    }

    /// Generated utterances for every intent that a later stage will need.
    pub fn generate(&mut self) -> Result<()> {
        let cfg = self.config().clone();
        let backend = self.generator()?;
        let template = cfg.generator.prompt_template()?;
        let settings = cfg.generator.settings();
        let streams = SeedStreams::new(cfg.seeds.root);
        let out = self.out();
        let bundles = self.bundles()?;
        self.manifest.backends.insert("generator".into(), backend.backend_id().to_string());
        self.manifest.begin_stage("generate");
        self.manifest.clear_failures("generate");

        let quota = cfg.unseen_quota();
        let mut failures = 0usize;
        for b in &bundles {
            let trial = b.plan.trial_id;
            let gen_seed = streams.generation(trial);
            let dir = trial_dir(&out, trial);
            let mut jobs: Vec<(PathBuf, GenerationJob)> = Vec::new();
            let mut push = |sub: &str, key: &IntentKey, count: usize, oversample: Option<usize>| {
                jobs.push((
                    dir.join(sub).join(intent_file_name(key)),
                    GenerationJob {
                        key: key.clone(),
                        count,
                        seed: seed::derive(gen_seed, &[sub, key.domain(), key.intent()]),
                        oversample,
                    },
                ));
            };
            if cfg.wants(Strategy::Refined) {
                let seen = b.seen_labeled();
                for key in seen.intents() {
                    push(GENERATED, key, seen.count_for(key), None);
                }
            }
            if cfg.wants(Strategy::Zerogen) || cfg.wants(Strategy::Refined) {
                for key in &b.unseen_intents {
                    push(GENERATED, key, quota, None);
                }
            }
            if cfg.wants(Strategy::Supergen) {
                for key in &b.unseen_intents {
                    push(POOL, key, quota, Some(cfg.generator.supergen_factor));
                }
            }
            if self.resume {
                jobs.retain(|(p, _)| !self.manifest.is_complete(p));
            }
            let only: Vec<GenerationJob> = jobs.iter().map(|(_, j)| j.clone()).collect();
            let results = generate_many(backend.as_ref(), &template, &only, &settings);
            for ((path, job), res) in jobs.iter().zip(results) {
                match res {
                    Ok(records) => {
                        let rows: Vec<UtteranceRecord> = records
                            .iter()
                            .map(|r| UtteranceRecord::from_generation(r, Origin::Generated, trial))
                            .collect();
                        self.write_records(path, &rows, "generate", trial)?;
                    }
                    Err(e) => {
                        log::warn!("trial {trial}, {}: {e}", job.key);
                        failures += 1;
                        self.manifest.failures.push(FailureRecord {
                            stage: "generate".into(),
                            trial_id: trial,
                            intent: job.key.to_string(),
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
        self.manifest.finish_stage("generate");
        self.manifest.save()?;
        if failures > 0 {
            return Err(Error::Backend {
                backend: backend.backend_id().to_string(),
                message: format!("{failures} intent file(s) incomplete; see the manifest's failures and rerun with --resume"),
            });
        }
        Ok(())
    }

    fn read_generated(&self, trial: u32, sub: &str, keys: &[IntentKey]) -> Result<BTreeMap<IntentKey, Vec<GenerationRecord>>> {
        let dir = trial_dir(&self.out(), trial).join(sub);
        keys.iter()
            .map(|k| {
                let path = dir.join(intent_file_name(k));
                if !path.exists() {
                    return Err(Error::Dependency(format!(
                        "trial {trial}: missing {}; run the `generate` stage first",
                        self.manifest.relative(&path)
                    )));
                }
                let rows: Vec<UtteranceRecord> = read_jsonl(&path)?;
                Ok((k.clone(), rows.iter().map(UtteranceRecord::to_generation).collect::<Result<Vec<_>>>()?))
            })
            .collect()
    }

    /// Baseline training sets: zerogen passes everything, supergen keeps the
    /// most confident candidates of the oversampled pool.
    pub fn select(&mut self) -> Result<()> {
        let cfg = self.config().clone();
        let out = self.out();
        let quota = cfg.unseen_quota();
        self.manifest.begin_stage("select");
        for plan in self.manifest.plans.clone() {
            let trial = plan.trial_id;
            let keys = self.unseen_keys(&plan)?;
            if cfg.wants(Strategy::Zerogen) {
                let mut rows = Vec::new();
                for (_, recs) in self.read_generated(trial, GENERATED, &keys)? {
                    rows.extend(
                        zerogen_select(recs)
                            .iter()
                            .map(|r| UtteranceRecord::from_generation(r, Origin::Generated, trial)),
                    );
                }
                self.write_records(&selected_path(&out, trial, Strategy::Zerogen), &rows, "select", trial)?;
            }
            if cfg.wants(Strategy::Supergen) {
                let mut rows = Vec::new();
                for (_, recs) in self.read_generated(trial, POOL, &keys)? {
                    let kept = supergen_select(score_all(recs)?, quota)?;
                    rows.extend(kept.iter().map(|r| UtteranceRecord::from_generation(r, Origin::Generated, trial)));
                }
                self.write_records(&selected_path(&out, trial, Strategy::Supergen), &rows, "select", trial)?;
            }
        }
        self.manifest.finish_stage("select");
        self.manifest.save()
    }

    fn unseen_keys(&self, plan: &ExperimentPlan) -> Result<Vec<IntentKey>> {
        let data = load_dataset(self.config())?;
        Ok(materialize_trial(plan, &data)?.unseen_intents)
    }

    fn texts(map: &BTreeMap<IntentKey, Vec<GenerationRecord>>) -> IntentTexts {
        map.iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|r| r.text.clone()).collect()))
            .collect()
    }

    /// Train one refiner per trial on seen domains and refine the unseen
    /// generations.
    pub fn refine(&mut self) -> Result<()> {
        let cfg = self.config().clone();
        if !cfg.wants(Strategy::Refined) {
            return Ok(());
        }
        let out = self.out();
        let seq2seq = self.seq2seq()?;
        let clf_backend = self.classifier()?;
        let streams = SeedStreams::new(cfg.seeds.root);
        let bundles = self.bundles()?;
        self.manifest.backends.insert("seq2seq".into(), seq2seq.backend_id().to_string());
        self.manifest.backends.insert("classifier".into(), clf_backend.backend_id().to_string());
        self.manifest.begin_stage("refine");
        for b in &bundles {
            let trial = b.plan.trial_id;
            if b.seen_val.is_empty() {
                return Err(Error::Precondition(format!(
                    "trial {trial}: the refiner needs at least one seen validation domain"
                )));
            }
            let seen_keys: Vec<IntentKey> = b.seen_intents().into_iter().collect();
            let seen_gen = Self::texts(&self.read_generated(trial, GENERATED, &seen_keys)?);
            let unseen_gen = Self::texts(&self.read_generated(trial, GENERATED, &b.unseen_intents)?);
            let rcfg = RefinerConfig {
                seed: streams.pairing(trial),
                ..cfg.refiner.clone()
            };
            let split_gen = |human: &Corpus| -> IntentTexts {
                seen_gen
                    .iter()
                    .filter(|(k, _)| human.count_for(k) > 0)
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect()
            };
            let pairs = sample_training_pairs(&split_gen(&b.seen_train), &b.seen_train.texts_by_intent(), &rcfg)?;
            let val_pairs = sample_training_pairs(&split_gen(&b.seen_val), &b.seen_val.texts_by_intent(), &rcfg)?;
            let spec = ClassifierTrainSpec {
                seed: streams.training(trial),
                ..cfg.classifier_train.clone()
            };
            let monitor_clf = train_intent_classifier(&b.seen_labeled(), &spec, clf_backend.as_ref())?;
            let mut monitor = ValidationMonitor::new(&monitor_clf, val_pairs.clone(), &rcfg)?;
            let handle = train_refiner(&pairs, &rcfg, seq2seq.as_ref(), &mut monitor)?;
            let sample_seed = streams.sampling(trial);
            let outcome = refine_corpus(&handle, &unseen_gen, &rcfg, sample_seed, Some(cfg.unseen_quota()))?;

            let prompt_id = format!("refiner-m{}-n{}", rcfg.m, rcfg.n);
            let mut rows = Vec::with_capacity(outcome.total());
            for (key, texts) in &outcome.texts {
                for (i, text) in texts.iter().enumerate() {
                    rows.push(UtteranceRecord {
                        text: text.clone(),
                        intent: key.intent().to_string(),
                        domain: key.domain().to_string(),
                        origin: Origin::Refined,
                        strategy: Some(Strategy::Refined),
                        trial_id: Some(trial),
                        token_probabilities: None,
                        provenance: Some(super::artifacts::Provenance {
                            backend_id: handle.backend_id().to_string(),
                            prompt_id: prompt_id.clone(),
                            seed: sample_seed,
                            index: i,
                        }),
                        split: None,
                        dataset: None,
                    });
                }
            }
            self.write_records(&selected_path(&out, trial, Strategy::Refined), &rows, "refine", trial)?;
            let reference = json!({
                "trial_id": trial,
                "training_pairs": pairs.len(),
                "validation_pairs": val_pairs.len(),
                "passthrough": outcome.passthrough,
                "refiner": handle.to_json(),
            });
            let path = refiner_reference_path(&out, trial);
            let mut bytes = serde_json::to_vec_pretty(&reference)?;
            bytes.push(b'\n');
            write_atomic(&path, &bytes)?;
            self.manifest.record(&path, "refine", Some(trial))?;
        }
        self.manifest.finish_stage("refine");
        self.manifest.save()
    }

    fn read_strategy_corpus(&self, trial: u32, s: Strategy, name: DatasetName) -> Result<Corpus> {
        let path = selected_path(&self.out(), trial, s);
        if !path.exists() {
            let stage = if s == Strategy::Refined { "refine" } else { "select" };
            return Err(Error::Dependency(format!(
                "trial {trial}: missing {} for strategy {s}; run the `{stage}` stage first",
                self.manifest.relative(&path)
            )));
        }
        let rows: Vec<UtteranceRecord> = read_jsonl(&path)?;
        let examples = rows
            .iter()
            .map(|r| Ok(LabeledExample::new(r.text.clone(), r.key()?, r.origin, SplitTag::Unassigned)))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(name, examples)
    }

    /// Per trial and strategy: classifier accuracy on human unseen-domain
    /// test data and length-equalized diversity.
    pub fn evaluate(&mut self) -> Result<AggregateReport> {
        let cfg = self.config().clone();
        let out = self.out();
        let clf_backend = self.classifier()?;
        let streams = SeedStreams::new(cfg.seeds.root);
        let bundles = self.bundles()?;
        self.manifest.backends.insert("classifier".into(), clf_backend.backend_id().to_string());
        self.manifest.begin_stage("evaluate");

        let mut reports = Vec::new();
        for b in &bundles {
            let trial = b.plan.trial_id;
            let mut train_sets = BTreeMap::new();
            for &s in &cfg.strategies {
                train_sets.insert(s, self.read_strategy_corpus(trial, s, b.unseen_test.name())?);
            }
            let spec = ClassifierTrainSpec {
                seed: streams.training(trial),
                ..cfg.classifier_train.clone()
            };
            let texts: BTreeMap<String, IntentTexts> =
                train_sets.iter().map(|(s, c)| (s.to_string(), c.texts_by_intent())).collect();
            let equalized = truncate_for_comparison(&texts, seed::derive(streams.sampling(trial), &["diversity"]))?;
            for (&s, train) in &train_sets {
                let handle = train_intent_classifier(train, &spec, clf_backend.as_ref())?;
                let docs = &equalized[s.as_str()];
                reports.push(TrialReport {
                    trial_id: trial,
                    strategy: s,
                    accuracy: evaluate_accuracy(&handle, &b.unseen_test)?,
                    distinct1: distinct_n_by_intent(docs, 1)?,
                    distinct2: distinct_n_by_intent(docs, 2)?,
                    n_train_utterances: train.len(),
                });
            }
        }
        let aggregate = aggregate_trials(&reports);
        let dir = reports_dir(&out);
        let trials_path = dir.join("trials.jsonl");
        write_atomic(&trials_path, &to_jsonl(&reports)?)?;
        self.manifest.record(&trials_path, "evaluate", None)?;
        let agg_path = dir.join("aggregate.json");
        let mut bytes = serde_json::to_vec_pretty(&aggregate)?;
        bytes.push(b'\n');
        write_atomic(&agg_path, &bytes)?;
        self.manifest.record(&agg_path, "evaluate", None)?;
        self.manifest.finish_stage("evaluate");
        self.manifest.save()?;
        Ok(aggregate)
    }

    /// Markdown tables and SVG charts from the evaluation outputs.
    pub fn report(&mut self) -> Result<PathBuf> {
        let dir = reports_dir(&self.out());
        let agg_path = dir.join("aggregate.json");
        if !agg_path.exists() {
            return Err(Error::Dependency(format!(
                "missing {}; run the `evaluate` stage first",
                self.manifest.relative(&agg_path)
            )));
        }
        let text = std::fs::read_to_string(&agg_path)?;
        let agg: AggregateReport = serde_json::from_str(&text).map_err(|e| Error::parse(&agg_path, &e))?;
        self.manifest.begin_stage("report");

        let names: Vec<String> = agg.strategies.iter().map(|s| s.strategy.to_string()).collect();
        let accuracy = bar_chart_svg(
            "Intent accuracy on unseen domains",
            "accuracy",
            &names,
            &[Series {
                name: "mean (stddev)".into(),
                values: agg.strategies.iter().map(|s| s.accuracy.mean).collect(),
                errors: agg.strategies.iter().map(|s| s.accuracy.stddev).collect(),
            }],
        );
        let diversity = bar_chart_svg(
            "Lexical diversity",
            "distinct-n",
            &names,
            &[
                Series {
                    name: "distinct-1".into(),
                    values: agg.strategies.iter().map(|s| s.distinct1.mean).collect(),
                    errors: agg.strategies.iter().map(|s| s.distinct1.stddev).collect(),
                },
                Series {
                    name: "distinct-2".into(),
                    values: agg.strategies.iter().map(|s| s.distinct2.mean).collect(),
                    errors: agg.strategies.iter().map(|s| s.distinct2.stddev).collect(),
                },
            ],
        );
        let md = dir.join("report.md");
        let files = [
            (md.clone(), agg.to_markdown().into_bytes()),
            (dir.join("accuracy.svg"), accuracy.into_bytes()),
            (dir.join("diversity.svg"), diversity.into_bytes()),
        ];
        for (path, bytes) in files {
            write_atomic(&path, &bytes)?;
            self.manifest.record(&path, "report", None)?;
        }
        self.manifest.finish_stage("report");
        self.manifest.save()?;
        Ok(md)
    }

    /// Every stage after `split`, in order.
    pub fn run_all(&mut self) -> Result<AggregateReport> {
        self.generate()?;
        self.select()?;
        self.refine()?;
        let agg = self.evaluate()?;
        self.report()?;
        Ok(agg)
    }
}
