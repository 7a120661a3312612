//! A self-contained toy workspace: keyword corpus, mock generator script and
//! config, small enough to run every stage in seconds.

use std::path::{Path, PathBuf};

use rand::Rng as _;

use super::artifacts::{to_jsonl, write_atomic, write_corpus_jsonl};
use crate::corpus::fixtures::KeywordWorld;
use crate::corpus::IntentKey;
use crate::error::Result;
use crate::genkit::ScriptEntry;
use crate::seed;
use crate::selection::Strategy;

const JUNK: &str = "sure here is another example response note";

#[derive(Debug, Clone)]
pub struct ToyOptions {
    pub domains: usize,
    pub intents_per_domain: usize,
    pub keywords_per_intent: usize,
    pub train_per_intent: usize,
    pub test_per_intent: usize,
    /// Script lines per intent; also the per-intent generation count.
    pub script_lines: usize,
    /// Lines `i` with `i % 10` in {1, 4, 7} become noise: filler chatter plus
    /// keywords of a sibling intent.
    pub noisy: bool,
    pub seq2seq: String,
    pub classifier: String,
    pub strategies: Vec<Strategy>,
    pub n_trials: usize,
    pub seed: u64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        Self {
            domains: 3,
            intents_per_domain: 2,
            keywords_per_intent: 4,
            train_per_intent: 20,
            test_per_intent: 10,
            script_lines: 20,
            noisy: false,
            seq2seq: "lexical".into(),
            classifier: "centroid".into(),
            strategies: Strategy::ALL.to_vec(),
            n_trials: 3,
            seed: 7,
        }
    }
}

pub fn is_noise_line(i: usize) -> bool {
    matches!(i % 10, 1 | 4 | 7)
}

fn sibling<'a>(world: &'a KeywordWorld, key: &IntentKey) -> &'a IntentKey {
    let same: Vec<&IntentKey> = world.intents().filter(|k| k.domain() == key.domain()).collect();
    let at = same.iter().position(|k| *k == key).unwrap_or(0);
    same[(at + 1) % same.len()]
}

/// Mock script: clean keyword utterances, optionally with 30% noise lines.
pub fn toy_script(world: &KeywordWorld, opts: &ToyOptions) -> Vec<ScriptEntry> {
    let mut out = Vec::new();
    for key in world.intents() {
        let mut rng = seed::rng_from(opts.seed, &["toy-script", key.domain(), key.intent()]);
        for i in 0..opts.script_lines {
            let text = if opts.noisy && is_noise_line(i) {
                let kws = &world.keywords[sibling(world, key)];
                let extra: Vec<&str> = (0..6).map(|j| kws[j % kws.len()].as_str()).collect();
                format!("{JUNK} {}", extra.join(" "))
            } else {
                world.utterance(key, &mut rng)
            };
            let n = text.split_whitespace().count();
            let probs = (0..n).map(|_| rng.gen_range(0.3..0.99)).collect();
            out.push(ScriptEntry {
                intent: key.intent().to_string(),
                text,
                token_probabilities: Some(probs),
            });
        }
    }
    out
}

/// Write `corpus.jsonl`, `script.jsonl` and `config.toml` into `dir`; returns
/// the config path. Runs write to `dir/out`.
pub fn write_toy_workspace(dir: &Path, opts: &ToyOptions) -> Result<PathBuf> {
    let world = KeywordWorld::new(opts.domains, opts.intents_per_domain, opts.keywords_per_intent);
    let corpus = world.human_corpus(opts.train_per_intent, opts.test_per_intent, opts.seed);
    write_corpus_jsonl(&dir.join("corpus.jsonl"), &corpus)?;
    write_atomic(&dir.join("script.jsonl"), &to_jsonl(&toy_script(&world, opts))?)?;
    let strategies: Vec<String> = opts.strategies.iter().map(|s| format!("\"{s}\"")).collect();
    let config = format!(
        r#"dataset = "custom"
dataset_path = "corpus.jsonl"
n_trials = {trials}
strategies = [{strategies}]
output_dir = "out"

[seeds]
root = {seed}

[split]
unseen_domains = 1
val_domains = 1
per_intent_generation_count = {lines}

[generator]
kind = "mock"
script = "script.jsonl"

[seq2seq]
kind = "{seq2seq}"

[classifier]
kind = "{classifier}"
"#,
        trials = opts.n_trials,
        strategies = strategies.join(", "),
        seed = opts.seed,
        lines = opts.script_lines,
        seq2seq = opts.seq2seq,
        classifier = opts.classifier,
    );
    let path = dir.join("config.toml");
    write_atomic(&path, config.as_bytes())?;
    Ok(path)
}
