//! Baseline data strategies: raw generations (ZeroGen) and confidence-based
//! selection by geometric-mean token probability (SuperGen).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genkit::GenerationRecord;

/// How the synthetic training data of a run was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Zerogen,
    Supergen,
    Refined,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Zerogen, Strategy::Supergen, Strategy::Refined];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Zerogen => "zerogen",
            Strategy::Supergen => "supergen",
            Strategy::Refined => "refined",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("strategy: unknown strategy `{s}` (expected zerogen, supergen or refined)")))
    }
}

/// Use the generations as they are; only the provenance is stamped.
pub fn zerogen_select(generated: Vec<GenerationRecord>) -> Vec<GenerationRecord> {
    generated
        .into_iter()
        .map(|mut r| {
            r.strategy = Some(Strategy::Zerogen);
            r
        })
        .collect()
}

/// Geometric mean of probabilities, computed as `exp(mean(ln p))` with a
/// compensated sum.
pub fn geometric_mean(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::Capability("no token probabilities to score".into()));
    }
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for &p in probabilities {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("token probability {p} outside (0, 1]")));
        }
        let x = p.ln();
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    Ok(((sum + comp) / probabilities.len() as f64).exp())
}

pub fn supergen_score(record: &GenerationRecord) -> Result<f64> {
    let probs = record.token_probabilities.as_deref().ok_or_else(|| {
        Error::Capability(format!("record {:?} has no token probabilities", record.text))
    })?;
    geometric_mean(probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub record: GenerationRecord,
    pub score: f64,
}

pub fn score_all(records: Vec<GenerationRecord>) -> Result<Vec<ScoredUtterance>> {
    records
        .into_iter()
        .map(|record| Ok(ScoredUtterance { score: supergen_score(&record)?, record }))
        .collect()
}

/// Keep the `keep` highest-scoring records, best first; equal scores keep
/// generation order.
pub fn supergen_select(scored: Vec<ScoredUtterance>, keep: usize) -> Result<Vec<GenerationRecord>> {
    if keep > scored.len() {
        return Err(Error::Argument(format!(
            "cannot keep {keep} of {} scored records",
            scored.len()
        )));
    }
    let mut scored = scored;
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.record.index.cmp(&b.record.index))
    });
    Ok(scored
        .into_iter()
        .take(keep)
        .map(|s| {
            let mut r = s.record;
            r.strategy = Some(Strategy::Supergen);
            r
        })
        .collect())
}
