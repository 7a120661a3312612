//! Paired significance tests and multi-trial aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::selection::Strategy;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    pub significant: bool,
}

/// One-tailed paired t-test of `mean(a) > mean(b)`.
///
/// Zero-variance differences: a positive mean gives `t = +inf, p = 0`, a
/// negative one `t = -inf, p = 1`, all-zero differences `t = 0, p = 0.5`.
pub fn paired_t_test_one_tail(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("paired samples differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Argument("paired t-test needs at least 2 pairs".into()));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;
    let (t, p) = if var == 0.0 {
        if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        }
    } else {
        let t = mean / (var.sqrt() / n.sqrt());
        let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Domain(e.to_string()))?;
        (t, dist.sf(t))
    };
    Ok(TTestResult {
        t_statistic: t,
        p_value: p,
        degrees_of_freedom: df,
        significant: p < alpha,
    })
}

/// Metrics of one strategy in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial_id: u32,
    pub strategy: Strategy,
    pub accuracy: f64,
    pub distinct1: f64,
    pub distinct2: f64,
    pub n_train_utterances: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub stddev: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stddev = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, stddev }
    }

    /// `mean (stddev)` with `decimals` digits after scaling by `scale`.
    pub fn format(&self, scale: f64, decimals: usize) -> String {
        format!("{:.*} ({:.*})", decimals, self.mean * scale, decimals, self.stddev * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub trials: usize,
    pub single_trial: bool,
    pub accuracy: MetricSummary,
    pub distinct1: MetricSummary,
    pub distinct2: MetricSummary,
    pub n_train_utterances: MetricSummary,
}

/// Refined vs one baseline on one metric, paired by trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: Strategy,
    pub metric: String,
    pub pairs: usize,
    pub test: Option<TTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub alpha: f64,
    pub strategies: Vec<StrategySummary>,
    pub comparisons: Vec<Comparison>,
}

fn metric(r: &TrialReport, name: &str) -> f64 {
    match name {
        "accuracy" => r.accuracy,
        "distinct1" => r.distinct1,
        _ => r.distinct2,
    }
}

const METRICS: [&str; 3] = ["accuracy", "distinct1", "distinct2"];

pub fn aggregate_trials(reports: &[TrialReport]) -> AggregateReport {
    aggregate_trials_at(reports, DEFAULT_ALPHA)
}

pub fn aggregate_trials_at(reports: &[TrialReport], alpha: f64) -> AggregateReport {
    let mut by_strategy: BTreeMap<Strategy, Vec<&TrialReport>> = BTreeMap::new();
    for r in reports {
        by_strategy.entry(r.strategy).or_default().push(r);
    }
    let strategies = by_strategy
        .iter()
        .map(|(&strategy, rs)| {
            let col = |f: &dyn Fn(&TrialReport) -> f64| MetricSummary::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            StrategySummary {
                strategy,
                trials: rs.len(),
                single_trial: rs.len() == 1,
                accuracy: col(&|r| r.accuracy),
                distinct1: col(&|r| r.distinct1),
                distinct2: col(&|r| r.distinct2),
                n_train_utterances: col(&|r| r.n_train_utterances as f64),
            }
        })
        .collect();

    let mut comparisons = Vec::new();
    if let Some(refined) = by_strategy.get(&Strategy::Refined) {
        for (&baseline, base) in by_strategy.iter().filter(|(s, _)| **s != Strategy::Refined) {
            let pairs: Vec<(&TrialReport, &TrialReport)> = refined
                .iter()
                .filter_map(|r| base.iter().find(|b| b.trial_id == r.trial_id).map(|b| (*r, *b)))
                .collect();
            for m in METRICS {
                let a: Vec<f64> = pairs.iter().map(|(r, _)| metric(r, m)).collect();
                let b: Vec<f64> = pairs.iter().map(|(_, b)| metric(b, m)).collect();
                comparisons.push(Comparison {
                    baseline,
                    metric: m.to_string(),
                    pairs: pairs.len(),
                    test: paired_t_test_one_tail(&a, &b, alpha).ok(),
                });
            }
        }
    }
    AggregateReport {
        alpha,
        strategies,
        comparisons,
    }
}

impl AggregateReport {
    /// Markdown table: accuracy in percent, diversity as fractions, `mean (stddev)`.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| strategy | trials | accuracy (%) | distinct-1 | distinct-2 |\n|---|---|---|---|---|\n");
        for st in &self.strategies {
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                st.strategy,
                st.trials,
                st.accuracy.format(100.0, 1),
                st.distinct1.format(1.0, 3),
                st.distinct2.format(1.0, 3),
            ));
        }
        if !self.comparisons.is_empty() {
            s.push_str(&format!(
                "\n| refined vs | metric | pairs | t | one-tail p | significant (alpha={}) |\n|---|---|---|---|---|---|\n",
                self.alpha
            ));
            for c in &self.comparisons {
                match &c.test {
                    Some(t) => s.push_str(&format!(
                        "| {} | {} | {} | {:.3} | {:.4} | {} |\n",
                        c.baseline,
                        c.metric,
                        c.pairs,
                        t.t_statistic,
                        t.p_value,
                        if t.significant { "yes" } else { "no" }
                    )),
                    None => s.push_str(&format!("| {} | {} | {} | - | - | n/a |\n", c.baseline, c.metric, c.pairs)),
                }
            }
        }
        s
    }
}
