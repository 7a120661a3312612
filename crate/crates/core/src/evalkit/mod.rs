//! Downstream utility (intent classification accuracy), lexical diversity and
//! multi-trial statistics.

mod bow;
mod classifier;
mod diversity;
mod stats;

pub use bow::{classifier_backend, CentroidBackend, SoftmaxBackend};
pub use classifier::{
    evaluate_accuracy, stratified_split, train_intent_classifier, ClassifierBackend, ClassifierTrainSpec, IntentModel,
    TrainedClassifier, TrainingLog,
};
pub use diversity::{distinct_n, distinct_n_by_intent, tokenize, truncate_for_comparison, word_count, IntentTexts};
pub use stats::{
    aggregate_trials, aggregate_trials_at, paired_t_test_one_tail, AggregateReport, Comparison, MetricSummary,
    StrategySummary, TTestResult, TrialReport, DEFAULT_ALPHA,
};
