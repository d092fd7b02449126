//! Post-hoc bias analysis over discrimination tables: per-group averages,
//! how often each group is the most discriminated one, how a single
//! legitimate attribute splits the picture, and the hardest pairs of a
//! submission.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{average_over, DiscriminationTable, EvaluationReport, ScoreSet};
use crate::pairgen::{Polarity, VerificationPair};
use crate::schema::{AttributeSchema, Designation, GroupKey};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{0}` is {1}, not legitimate")]
    NotLegitimate(String, Designation),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("pair `{0}` has no score")]
    MissingScore(String),
}

/// Per-group average discrimination, as used for the Bias score.
pub fn avg_discrimination_by_group(table: &DiscriminationTable) -> BTreeMap<GroupKey, f64> {
    table.group_averages.clone()
}

/// Share of combos in which each group has the largest discrimination.
/// Groups tied at the maximum split that combo evenly.
pub fn most_discriminated_frequency(table: &DiscriminationTable) -> BTreeMap<GroupKey, f64> {
    let counted = table.counted_combos();
    let mut counts: BTreeMap<GroupKey, f64> = table.groups().into_iter().map(|g| (g, 0.0)).collect();
    let mut total = 0usize;
    for (combo, groups) in table.by_combo() {
        if !counted.contains(&combo) {
            continue;
        }
        total += 1;
        let max = groups.iter().map(|&(_, d)| d).fold(f64::NEG_INFINITY, f64::max);
        let top: Vec<GroupKey> = groups.iter().filter(|&&(_, d)| d == max).map(|&(g, _)| g).collect();
        let share = 1.0 / top.len() as f64;
        for g in top {
            *counts.get_mut(&g).expect("group listed") += share;
        }
    }
    if total > 0 {
        for v in counts.values_mut() {
            *v /= total as f64;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extreme {
    pub value: f64,
    pub group: GroupKey,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeImpactRow {
    pub polarity: Polarity,
    pub attribute: String,
    /// Sorted value-index pair of the subset, e.g. (0, 1) for `G0-G1`.
    pub subset: (usize, usize),
    pub subset_label: String,
    pub n_combos: usize,
    pub max: Extreme,
    pub min: Extreme,
}

/// Splits the combos by the unordered value pair of `attribute` and reports,
/// per subset, the largest and smallest per-group average discrimination.
/// On ties the group with the lower key wins.
pub fn attribute_impact(
    table: &DiscriminationTable,
    schema: &AttributeSchema,
    attribute: &str,
) -> Result<Vec<AttributeImpactRow>, AnalysisError> {
    let attr = schema
        .attribute_index(attribute)
        .ok_or_else(|| AnalysisError::UnknownAttribute(attribute.into()))?;
    let def = &schema.attributes()[attr];
    if def.designation != Designation::Legitimate {
        return Err(AnalysisError::NotLegitimate(attribute.into(), def.designation));
    }
    let slot = schema.legitimate().iter().position(|&a| a == attr).expect("legitimate");
    let counted = table.counted_combos();
    let mut subsets: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &c in &counted {
        *subsets.entry(schema.combo_component(c, slot)).or_default() += 1;
    }
    let mut rows = Vec::with_capacity(subsets.len());
    for (subset, n_combos) in subsets {
        let averages = average_over(&table.entries, |c| {
            counted.contains(&c) && schema.combo_component(c, slot) == subset
        });
        let mut it = averages.iter();
        let (&g0, &v0) = it.next().expect("subset has entries");
        let (mut max, mut min) = (Extreme { value: v0, group: g0 }, Extreme { value: v0, group: g0 });
        for (&g, &v) in it {
            if v > max.value {
                max = Extreme { value: v, group: g };
            }
            if v < min.value {
                min = Extreme { value: v, group: g };
            }
        }
        rows.push(AttributeImpactRow {
            polarity: table.polarity,
            attribute: attribute.into(),
            subset,
            subset_label: schema.pair_label(attr, subset),
            n_combos,
            max,
            min,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardPair {
    pub pair_id: String,
    pub image_a: String,
    pub image_b: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardestSamples {
    /// Lowest-scored positive pairs.
    pub positives: Vec<HardPair>,
    /// Highest-scored negative pairs.
    pub negatives: Vec<HardPair>,
    /// Set when fewer than `k` pairs of some polarity exist.
    pub truncated: bool,
}

/// The `k` hardest pairs of each polarity; ties are ordered by pair id.
pub fn hardest_samples(
    pairs: &[VerificationPair],
    scores: &ScoreSet,
    k: usize,
) -> Result<HardestSamples, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::ZeroK);
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for p in pairs {
        let score = scores
            .get(&p.pair_id)
            .ok_or_else(|| AnalysisError::MissingScore(p.pair_id.clone()))?;
        let hp = HardPair {
            pair_id: p.pair_id.clone(),
            image_a: p.image_a.clone(),
            image_b: p.image_b.clone(),
            score,
        };
        match p.polarity {
            Polarity::Positive => pos.push(hp),
            Polarity::Negative => neg.push(hp),
        }
    }
    pos.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.pair_id.cmp(&b.pair_id)));
    neg.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.pair_id.cmp(&b.pair_id)));
    let truncated = pos.len() < k || neg.len() < k;
    pos.truncate(k);
    neg.truncate(k);
    Ok(HardestSamples {
        positives: pos,
        negatives: neg,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupValue {
    pub group: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExtreme {
    pub value: f64,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactDocument {
    pub attribute: String,
    pub subset: String,
    pub n_combos: usize,
    pub max: LabeledExtreme,
    pub min: LabeledExtreme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityAnalysis {
    pub polarity: Polarity,
    pub avg_discrimination: Vec<GroupValue>,
    pub most_discriminated_frequency: Vec<GroupValue>,
    pub attribute_impact: Vec<ImpactDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub submission_id: String,
    pub positive: PolarityAnalysis,
    pub negative: PolarityAnalysis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hardest: Option<HardestSamples>,
}

fn labeled(schema: &AttributeSchema, m: &BTreeMap<GroupKey, f64>) -> Vec<GroupValue> {
    m.iter()
        .map(|(&g, &value)| GroupValue {
            group: schema.group_label(g),
            value,
        })
        .collect()
}

fn analyze_polarity(schema: &AttributeSchema, table: &DiscriminationTable) -> PolarityAnalysis {
    let mut impact = Vec::new();
    for &attr in schema.legitimate() {
        let name = &schema.attributes()[attr].name;
        for row in attribute_impact(table, schema, name).expect("legitimate attribute") {
            impact.push(ImpactDocument {
                attribute: row.attribute,
                subset: row.subset_label,
                n_combos: row.n_combos,
                max: LabeledExtreme {
                    value: row.max.value,
                    group: schema.group_label(row.max.group),
                },
                min: LabeledExtreme {
                    value: row.min.value,
                    group: schema.group_label(row.min.group),
                },
            });
        }
    }
    PolarityAnalysis {
        polarity: table.polarity,
        avg_discrimination: labeled(schema, &avg_discrimination_by_group(table)),
        most_discriminated_frequency: labeled(schema, &most_discriminated_frequency(table)),
        attribute_impact: impact,
    }
}

/// Every table for both polarities of a stored report.
pub fn analyze_report(
    schema: &AttributeSchema,
    report: &EvaluationReport,
    hardest: Option<HardestSamples>,
) -> AnalysisReport {
    AnalysisReport {
        submission_id: report.submission_id.clone(),
        positive: analyze_polarity(schema, &report.positive.discrimination),
        negative: analyze_polarity(schema, &report.negative.discrimination),
        hardest,
    }
}
