//! Subgroup AUC, discrimination and Bias scores.
//!
//! Accuracy of a protected group `a` at legitimate combination `x` is the AUC
//! of that bucket's pairs against every pair of the opposite polarity. The
//! discrimination of a bucket is the best group's AUC at the same combo minus
//! its own, and the Bias of a polarity is the spread between the largest and
//! smallest per-group average discrimination.
//!
//! Every AUC is a ratio of integer rank counts, so the report is invariant
//! under any strictly increasing transform of the scores, bit for bit.

mod auc;
mod discrimination;
mod grouped;
mod report;

pub use auc::{auc, Orientation, SortedScores};
pub use discrimination::{bias_score, discrimination, ComboDenominator, DiscriminationTable};
pub use grouped::{AucEntry, SubgroupAucTable};
pub use report::{ReportError, ReportSummary};

pub(crate) use discrimination::average_over;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairgen::{Polarity, VerificationPair};
use crate::schema::{ComboKey, PairGroup};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("AUC is undefined without both positive and negative scores")]
    UndefinedAuc,
    #[error("no {0} pairs to contrast against")]
    EmptyContrast(Polarity),
    #[error("no subgroup entries for {0} pairs")]
    EmptyTable(Polarity),
    #[error("no combo is shared by every group for {0} pairs")]
    EmptyIntersection(Polarity),
    #[error("{} pair(s) have no score, first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    MissingScores(Vec<String>),
    #[error("score for pair `{0}` is not finite")]
    NonFiniteScore(String),
    #[error("pair `{0}` is scored twice")]
    DuplicateScore(String),
}

/// One submission's confidence per pair; higher means more likely the same
/// person.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub submission_id: String,
    scores: HashMap<String, f64>,
}

impl ScoreSet {
    pub fn new(
        submission_id: impl Into<String>,
        scores: impl IntoIterator<Item = (String, f64)>,
    ) -> Result<Self, MetricsError> {
        let mut map = HashMap::new();
        for (id, s) in scores {
            if !s.is_finite() {
                return Err(MetricsError::NonFiniteScore(id));
            }
            // fold -0.0 into 0.0
            if map.insert(id.clone(), s + 0.0).is_some() {
                return Err(MetricsError::DuplicateScore(id));
            }
        }
        Ok(Self {
            submission_id: submission_id.into(),
            scores: map,
        })
    }

    pub fn get(&self, pair_id: &str) -> Option<f64> {
        self.scores.get(pair_id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Applies `f` to every score, e.g. a monotone transform.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<Self, MetricsError> {
        Self::new(
            self.submission_id.clone(),
            self.scores.iter().map(|(k, &v)| (k.clone(), f(v))),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Buckets with fewer focal pairs are dropped from the subgroup tables.
    pub min_pairs: usize,
    pub combo_denominator: ComboDenominator,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            min_pairs: 1,
            combo_denominator: ComboDenominator::PerGroup,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ScoredPair {
    pub polarity: Polarity,
    pub group: PairGroup,
    pub combo: ComboKey,
    pub score: f64,
}

fn attach_scores(pairs: &[VerificationPair], scores: &ScoreSet) -> Result<Vec<ScoredPair>, MetricsError> {
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        match scores.get(&p.pair_id) {
            Some(score) => out.push(ScoredPair {
                polarity: p.polarity,
                group: p.group,
                combo: p.combo,
                score,
            }),
            None => missing.push(p.pair_id.clone()),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(MetricsError::MissingScores(missing))
    }
}

/// Subgroup AUC table of one polarity. Mixed-group negatives only ever act as
/// contrast samples.
pub fn grouped_auc(
    pairs: &[VerificationPair],
    scores: &ScoreSet,
    polarity: Polarity,
    config: &EvalConfig,
) -> Result<SubgroupAucTable, MetricsError> {
    grouped::grouped_auc_scored(&attach_scores(pairs, scores)?, polarity, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarityResult {
    pub auc: SubgroupAucTable,
    pub discrimination: DiscriminationTable,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub positive_pairs: u64,
    pub negative_pairs: u64,
    /// Negatives spanning two protected groups (contrast and accuracy only).
    pub mixed_negative_pairs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub submission_id: String,
    /// Overall AUC of all positives against all negatives.
    pub accuracy: f64,
    pub bias_positive: f64,
    pub bias_negative: f64,
    pub positive: PolarityResult,
    pub negative: PolarityResult,
    pub counts: PairCounts,
    pub config: EvalConfig,
}

fn polarity_result(
    scored: &[ScoredPair],
    polarity: Polarity,
    config: &EvalConfig,
) -> Result<PolarityResult, MetricsError> {
    let auc = grouped::grouped_auc_scored(scored, polarity, config)?;
    let discrimination = discrimination(&auc, config.combo_denominator)?;
    let bias = bias_score(&discrimination)?;
    Ok(PolarityResult {
        auc,
        discrimination,
        bias,
    })
}

/// Runs the full protocol for one submission.
pub fn evaluate(
    pairs: &[VerificationPair],
    scores: &ScoreSet,
    config: &EvalConfig,
) -> Result<EvaluationReport, MetricsError> {
    let scored = attach_scores(pairs, scores)?;
    let mut counts = PairCounts::default();
    for p in &scored {
        match p.polarity {
            Polarity::Positive => counts.positive_pairs += 1,
            Polarity::Negative => {
                counts.negative_pairs += 1;
                if p.group == PairGroup::Mixed {
                    counts.mixed_negative_pairs += 1;
                }
            }
        }
    }
    let (pos, neg): (Vec<&ScoredPair>, Vec<&ScoredPair>) =
        scored.iter().partition(|p| p.polarity == Polarity::Positive);
    let accuracy = auc(
        &pos.iter().map(|p| p.score).collect::<Vec<_>>(),
        &neg.iter().map(|p| p.score).collect::<Vec<_>>(),
    )?;
    let positive = polarity_result(&scored, Polarity::Positive, config)?;
    let negative = polarity_result(&scored, Polarity::Negative, config)?;
    Ok(EvaluationReport {
        submission_id: scores.submission_id.clone(),
        accuracy,
        bias_positive: positive.bias,
        bias_negative: negative.bias,
        positive,
        negative,
        counts,
        config: *config,
    })
}

impl EvaluationReport {
    pub fn polarity(&self, polarity: Polarity) -> &PolarityResult {
        match polarity {
            Polarity::Positive => &self.positive,
            Polarity::Negative => &self.negative,
        }
    }
}
