//! Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use genrefine::corpus::fixtures::{clinc150_shaped, sgd_shaped, KeywordWorld};
use genrefine::corpus::IntentKey;
use genrefine::evalkit::{
    distinct_n_by_intent, paired_t_test_one_tail, train_intent_classifier, truncate_for_comparison, word_count,
    CentroidBackend, ClassifierBackend, ClassifierTrainSpec, IntentModel, IntentTexts, TrialReport,
};
use genrefine::genkit::GenerationRecord;
use genrefine::refiner::{sample_training_pairs, RefinerConfig};
use genrefine::runner::{read_jsonl, write_toy_workspace, Pipeline, PipelineConfig, ToyOptions};
use genrefine::seed::rng_from;
use genrefine::selection::{geometric_mean, score_all, supergen_select, ScoredUtterance, Strategy};
use genrefine::splitter::{materialize_trial, plan_clinc150_trials, plan_sgd_trials};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn split_arithmetic() -> Outcome {
    let corpus = clinc150_shaped(100, 30);
    let plans = plan_clinc150_trials(2024, 100).map_err(err)?;
    ensure!(plans.len() == 100, "{} plans", plans.len());
    for p in &plans {
        ensure!(p.is_partition(), "plan {} is not a partition", p.trial_id);
        let sizes = (p.unseen_domains.len(), p.seen_train_domains.len(), p.seen_val_domains.len());
        ensure!(sizes == (5, 4, 1), "plan {} sizes {sizes:?}", p.trial_id);
        let b = materialize_trial(p, &corpus).map_err(err)?;
        ensure!(b.unseen_intents.len() == 75, "plan {}: {} unseen intents", p.trial_id, b.unseen_intents.len());
        ensure!(b.seen_labeled().len() == 7_500, "plan {}: {} seen examples", p.trial_id, b.seen_labeled().len());
        ensure!(b.unseen_test.len() == 2_250, "plan {}: {} unseen test", p.trial_id, b.unseen_test.len());
    }
    Ok("100 plans: 5/4/1 domains, 75 unseen intents, 7,500 seen, 2,250 test".into())
}

fn sgd_protocol() -> Outcome {
    let corpus = sgd_shaped(5);
    ensure!(corpus.by_intent().values().any(|v| v.len() > 200), "fixture never exceeds the cap");
    let plans = plan_sgd_trials(2024, 100).map_err(err)?;
    for p in &plans {
        let sizes = (p.unseen_domains.len(), p.seen_train_domains.len(), p.seen_val_domains.len());
        ensure!(sizes == (8, 9, 3) && p.is_partition(), "plan {} sizes {sizes:?}", p.trial_id);
        let b = materialize_trial(p, &corpus).map_err(err)?;
        let seen = b.seen_labeled();
        let total = seen.intent_set().len() + b.unseen_intents.len();
        ensure!(total == 46, "plan {}: {total} intents", p.trial_id);
        let worst = seen.by_intent().values().map(Vec::len).max().unwrap_or(0);
        ensure!(worst <= 200, "plan {}: seen intent with {worst} examples", p.trial_id);
    }
    Ok("100 plans: 8/9/3 domains, 46 intents, seen intents capped at 200".into())
}

fn supergen_oracle() -> Outcome {
    let key = IntentKey::new("check_balance", "banking").map_err(err)?;
    let mut rng = rng_from(3, &["acceptance", "supergen"]);
    let records: Vec<GenerationRecord> = (0..200)
        .map(|i| {
            // coarse values force plenty of ties
            let p = rng.gen_range(1..=20) as f64 / 20.0;
            GenerationRecord {
                text: format!("utterance {i}"),
                key: key.clone(),
                token_probabilities: Some(vec![p; 1 + i % 3]),
                prompt_id: "p".into(),
                backend_id: "b".into(),
                seed: 0,
                index: i,
                strategy: None,
            }
        })
        .collect();
    let scored = score_all(records).map_err(err)?;
    let mut shuffled = scored.clone();
    shuffled.shuffle(&mut rng);
    let got: Vec<usize> = supergen_select(shuffled, 20).map_err(err)?.iter().map(|r| r.index).collect();

    // oracle: stable full sort of the generation-ordered list, then head
    let mut oracle: Vec<&ScoredUtterance> = scored.iter().collect();
    oracle.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("finite"));
    let want: Vec<usize> = oracle.iter().take(20).map(|s| s.record.index).collect();
    ensure!(got == want, "selection {got:?} != oracle {want:?}");

    let g = geometric_mean(&[0.9, 0.4, 0.1]).map_err(err)?;
    ensure!((g - 0.330193).abs() < 1e-6, "geometric mean {g}");
    let long = geometric_mean(&[0.9; 400]).map_err(err)?;
    ensure!((long - 0.9).abs() < 1e-12, "400-token mean {long}");
    Ok(format!("top-20 of 200 matches the oracle; gm = {g:.6}; 400 tokens -> {long}"))
}

fn oracle_distinct(docs: &IntentTexts, n: usize) -> f64 {
    let per: Vec<f64> = docs
        .values()
        .map(|utts| {
            let words: Vec<String> = utts.join(" ").split_whitespace().map(str::to_string).collect();
            let grams: HashSet<Vec<String>> = (0..words.len().saturating_sub(n - 1))
                .map(|i| words[i..i + n].to_vec())
                .collect();
            grams.len() as f64 / words.len() as f64
        })
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

fn distinct_oracle() -> Outcome {
    let vocab = ["book", "a", "flight", "now", "to", "paris", "please", "cancel", "my", "order"];
    let mut rng = rng_from(4, &["acceptance", "distinct"]);
    let mut max_err = 0.0_f64;
    for case in 0..50 {
        let mut docs = IntentTexts::new();
        for i in 0..rng.gen_range(1..=4) {
            let utts = (0..rng.gen_range(1..=5))
                .map(|_| {
                    (0..rng.gen_range(1..=6))
                        .map(|_| *vocab.choose(&mut rng).expect("vocab"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            docs.insert(IntentKey::new(&format!("intent_{i}"), "d").map_err(err)?, utts);
        }
        for n in [1, 2] {
            let got = distinct_n_by_intent(&docs, n).map_err(err)?;
            let want = oracle_distinct(&docs, n);
            max_err = max_err.max((got - want).abs());
            ensure!((got - want).abs() < 1e-12, "case {case}, n={n}: {got} vs {want}");
        }
    }

    let key = IntentKey::new("book_flight", "travel").map_err(err)?;
    let hand: IntentTexts = [(key.clone(), vec!["book a flight".to_string(), "book now".to_string()])].into();
    let (d1, d2) = (
        distinct_n_by_intent(&hand, 1).map_err(err)?,
        distinct_n_by_intent(&hand, 2).map_err(err)?,
    );
    ensure!(d1 == 0.8 && d2 == 0.8, "hand example gave {d1} / {d2}");

    let mut sets = BTreeMap::new();
    for (name, len) in [("short", 3), ("long", 9)] {
        let texts: IntentTexts = (0..3)
            .map(|i| {
                let k = IntentKey::new(&format!("intent_{i}"), "d").unwrap();
                let utts = (0..4 + i).map(|j| vec![vocab[(i + j) % 10]; len + j].join(" ")).collect();
                (k, utts)
            })
            .collect();
        sets.insert(name.to_string(), texts);
    }
    let eq = truncate_for_comparison(&sets, 9).map_err(err)?;
    let counts = |ds: &IntentTexts| -> Vec<usize> {
        ds.values().map(|u| u.iter().map(|t| word_count(t)).sum()).collect()
    };
    ensure!(counts(&eq["short"]) == counts(&eq["long"]), "truncation left unequal word counts");
    Ok(format!("50 random sets within {max_err:.1e}; hand example 0.8/0.8; truncation equalizes"))
}

fn sampling_contract() -> Outcome {
    let mk = |prefix: &str| -> IntentTexts {
        (0..100)
            .map(|j| {
                let k = IntentKey::new(&format!("intent_{j}"), "d").unwrap();
                (k, (0..100).map(|i| format!("{prefix} {j} {i}")).collect())
            })
            .collect()
    };
    let (gen, real) = (mk("gen"), mk("real"));
    let cfg = RefinerConfig::default();
    let pairs = sample_training_pairs(&gen, &real, &cfg).map_err(err)?;
    ensure!(pairs.len() == 10_000, "{} pairs", pairs.len());
    let mut slot0 = 0usize;
    let mut dup = 0usize;
    let mut seen_current: BTreeMap<&IntentKey, BTreeSet<&str>> = BTreeMap::new();
    for p in &pairs {
        ensure!(p.input_utterances.len() == 7, "m = {}", p.input_utterances.len());
        let current = p.input_utterances[0].as_str();
        if gen[&p.key].iter().any(|g| g == current) {
            slot0 += 1;
        }
        seen_current.entry(&p.key).or_default().insert(current);
        if p.input_utterances.iter().collect::<BTreeSet<_>>().len() < 7 {
            dup += 1;
        }
    }
    // every generated utterance is the current one exactly once
    let covered = seen_current.values().all(|s| s.len() == 100);
    ensure!(slot0 == pairs.len() && covered, "slot 0 is not the current utterance");
    let rate = dup as f64 / pairs.len() as f64;
    ensure!(rate > 0.10 && rate < 0.30, "duplicate rate {rate}");
    Ok(format!("slot 0 current in 100%; duplicate rate {:.1}%", rate * 100.0))
}

fn run_toy(opts: ToyOptions) -> Result<Vec<TrialReport>, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = write_toy_workspace(dir.path(), &opts).map_err(err)?;
    let mut p = Pipeline::split(PipelineConfig::load(&cfg).map_err(err)?).map_err(err)?;
    p.run_all().map_err(err)?;
    read_jsonl(&dir.path().join("out/reports/trials.jsonl")).map_err(err)
}

fn accuracy_by_trial(reports: &[TrialReport], s: Strategy) -> BTreeMap<u32, f64> {
    reports.iter().filter(|r| r.strategy == s).map(|r| (r.trial_id, r.accuracy)).collect()
}

fn identity_consistency() -> Outcome {
    let reports = run_toy(ToyOptions {
        seq2seq: "identity".into(),
        classifier: "centroid".into(),
        strategies: vec![Strategy::Zerogen, Strategy::Refined],
        noisy: true,
        n_trials: 3,
        ..Default::default()
    })?;
    let (z, r) = (
        accuracy_by_trial(&reports, Strategy::Zerogen),
        accuracy_by_trial(&reports, Strategy::Refined),
    );
    ensure!(z.len() == 3 && z == r, "zerogen {z:?} vs refined {r:?}");
    Ok(format!("refined == zerogen in all 3 trials: {:?}", z.values().collect::<Vec<_>>()))
}

fn learnable_signal() -> Outcome {
    let start = Instant::now();
    let reports = run_toy(ToyOptions {
        seq2seq: "lexical".into(),
        strategies: vec![Strategy::Zerogen, Strategy::Refined],
        noisy: true,
        n_trials: 3,
        ..Default::default()
    })?;
    let elapsed = start.elapsed();
    let mean = |m: BTreeMap<u32, f64>| m.values().sum::<f64>() / m.len() as f64;
    let z = mean(accuracy_by_trial(&reports, Strategy::Zerogen));
    let r = mean(accuracy_by_trial(&reports, Strategy::Refined));
    ensure!(r - z >= 0.05, "refined {r:.3} vs zerogen {z:.3}");
    ensure!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    Ok(format!(
        "refined {:.1}% vs zerogen {:.1}% in {:.1}s",
        r * 100.0,
        z * 100.0,
        elapsed.as_secs_f64()
    ))
}

fn t_test_oracle() -> Outcome {
    let d = [7.2, 4.9, 3.1, 5.7, 2.6];
    let t = paired_t_test_one_tail(&d, &[0.0; 5], 0.05).map_err(err)?;
    // scipy.stats.ttest_1samp(d, 0, alternative="greater")
    let want = 0.0025514836015898836;
    ensure!((t.p_value - want).abs() < 1e-3, "p = {}", t.p_value);
    let a = [0.7, 0.8, 0.75];
    let same = paired_t_test_one_tail(&a, &a, 0.05).map_err(err)?;
    ensure!(same.p_value == 0.5, "a = b gave p = {}", same.p_value);
    Ok(format!("p = {:.6} (oracle {want:.6}); a = b -> 0.5", t.p_value))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = write_toy_workspace(
        dir.path(),
        &ToyOptions {
            noisy: true,
            n_trials: 2,
            ..Default::default()
        },
    )
    .map_err(err)?;
    let mut p = Pipeline::split(PipelineConfig::load(&cfg).map_err(err)?).map_err(err)?;
    p.run_all().map_err(err)?;
    let jsonl = |p: &Pipeline| -> BTreeMap<String, String> {
        p.manifest
            .artifacts
            .iter()
            .filter(|a| a.path.ends_with(".jsonl"))
            .map(|a| (a.path.clone(), a.sha256.clone()))
            .collect()
    };
    let reference = jsonl(&p);
    let mut again = Pipeline::open(&dir.path().join("out")).map_err(err)?;
    again.generate().map_err(err)?;
    again.select().map_err(err)?;
    again.refine().map_err(err)?;
    again.evaluate().map_err(err)?;
    let now = jsonl(&again);
    ensure!(now == reference, "artifact hashes changed on rerun");
    for a in &again.manifest.artifacts {
        let on_disk = genrefine::runner::artifacts::sha256_file(&again.manifest.out_dir().join(&a.path)).map_err(err)?;
        ensure!(on_disk == a.sha256, "{} differs from its manifest hash", a.path);
    }
    Ok(format!("{} JSONL artifacts byte-identical across stage reruns", reference.len()))
}

#[derive(Default)]
struct CallLog {
    init_texts: Vec<String>,
    batches: Vec<usize>,
}

struct Logging {
    inner: CentroidBackend,
    log: Arc<Mutex<CallLog>>,
    /// Sharpen predictions with every step so validation keeps improving.
    sharpen: bool,
}

struct LoggingModel {
    inner: Box<dyn IntentModel>,
    log: Arc<Mutex<CallLog>>,
    steps: usize,
    sharpen: bool,
}

impl ClassifierBackend for Logging {
    fn backend_id(&self) -> &str {
        "logging-centroid"
    }

    fn init(&self, n_labels: usize, train_texts: &[&str], seed: u64) -> genrefine::Result<Box<dyn IntentModel>> {
        self.log.lock().unwrap().init_texts = train_texts.iter().map(|s| s.to_string()).collect();
        Ok(Box::new(LoggingModel {
            inner: self.inner.init(n_labels, train_texts, seed)?,
            log: self.log.clone(),
            steps: 0,
            sharpen: self.sharpen,
        }))
    }
}

impl IntentModel for LoggingModel {
    fn train_batch(&mut self, batch: &[(&str, usize)]) -> genrefine::Result<f64> {
        self.log.lock().unwrap().batches.push(batch.len());
        self.steps += 1;
        self.inner.train_batch(batch)
    }

    fn predict_proba(&self, text: &str) -> Vec<f64> {
        let p = self.inner.predict_proba(text);
        if !self.sharpen {
            return p;
        }
        let power = 1.0 + self.steps as f64 / 50.0;
        let q: Vec<f64> = p.iter().map(|x| x.powf(power)).collect();
        let z: f64 = q.iter().sum();
        q.iter().map(|x| x / z).collect()
    }

    fn snapshot(&self) -> Box<dyn IntentModel> {
        Box::new(LoggingModel {
            inner: self.inner.snapshot(),
            log: self.log.clone(),
            steps: self.steps,
            sharpen: self.sharpen,
        })
    }
}

fn classifier_recipe() -> Outcome {
    let world = KeywordWorld::new(2, 3, 6);
    let data = world.human_corpus(50, 0, 1);
    let text_intent: BTreeMap<&str, &IntentKey> = data.examples().iter().map(|e| (e.text.as_str(), &e.key)).collect();
    let run = |seed: u64, sharpen: bool| -> Result<(CallLog, genrefine::evalkit::TrainedClassifier), String> {
        let log = Arc::new(Mutex::new(CallLog::default()));
        let backend = Logging {
            inner: CentroidBackend,
            log: log.clone(),
            sharpen,
        };
        let spec = ClassifierTrainSpec {
            seed,
            ..ClassifierTrainSpec::default()
        };
        let handle = train_intent_classifier(&data, &spec, &backend).map_err(err)?;
        let log = std::mem::take(&mut *log.lock().unwrap());
        Ok((log, handle))
    };

    for sharpen in [false, true] {
        let (log, handle) = run(11, sharpen)?;
        let mut per_intent: BTreeMap<&IntentKey, usize> = BTreeMap::new();
        for t in &log.init_texts {
            *per_intent.entry(text_intent[t.as_str()]).or_default() += 1;
        }
        ensure!(
            per_intent.len() == 6 && per_intent.values().all(|&c| c == 40),
            "split is not a stratified 80/20: {per_intent:?}"
        );
        ensure!(log.batches.len() <= 1_800, "{} steps", log.batches.len());
        ensure!(log.batches.iter().all(|&b| b <= 60), "batch above 60");
        ensure!(log.batches.iter().filter(|&&b| b == 60).count() >= log.batches.len() - 1, "short batches");
        ensure!(log.batches.len() == handle.log().steps, "log disagrees with backend calls");
        if sharpen {
            ensure!(log.batches.len() == 1_800, "ever-improving run took {} steps", log.batches.len());
        }
    }
    let (a, _) = run(11, false)?;
    let (b, _) = run(11, false)?;
    let (c, _) = run(12, false)?;
    ensure!(a.init_texts == b.init_texts, "same seed, different split");
    ensure!(a.init_texts != c.init_texts, "split ignores the seed");
    Ok("stratified seeded 80/20 split, batch 60, capped at 1,800 steps".into())
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("split arithmetic", split_arithmetic),
        ("sgd protocol", sgd_protocol),
        ("supergen oracle equivalence", supergen_oracle),
        ("distinct-n oracle equivalence", distinct_oracle),
        ("sampling contract", sampling_contract),
        ("identity refiner consistency", identity_consistency),
        ("end-to-end learnable signal", learnable_signal),
        ("t-test oracle", t_test_oracle),
        ("reproducibility", reproducibility),
        ("classifier recipe conformance", classifier_recipe),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
