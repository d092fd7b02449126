//! JSON form of an [`EvaluationReport`]. Keys are written as schema labels
//! so reports are readable and diffable on their own; loading one back needs
//! the schema it was produced with.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    AucEntry, DiscriminationTable, EvalConfig, EvaluationReport, PairCounts, PolarityResult, SubgroupAucTable,
};
use crate::pairgen::Polarity;
use crate::schema::AttributeSchema;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report was produced with attributes {found:?}, schema has {expected:?}")]
    SchemaMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("unknown group label `{0}`")]
    UnknownGroup(String),
    #[error("unknown combo label `{0}`")]
    UnknownCombo(String),
}

#[derive(Serialize, Deserialize)]
struct ReportDocument {
    submission_id: String,
    accuracy: f64,
    bias_positive: f64,
    bias_negative: f64,
    config: EvalConfig,
    counts: PairCounts,
    group_attributes: Vec<String>,
    combo_attributes: Vec<String>,
    positive: PolarityDocument,
    negative: PolarityDocument,
}

#[derive(Serialize, Deserialize)]
struct PolarityDocument {
    bias: f64,
    group_averages: Vec<GroupAverage>,
    entries: Vec<EntryDocument>,
}

#[derive(Serialize, Deserialize)]
struct GroupAverage {
    group: String,
    average: f64,
}

#[derive(Serialize, Deserialize)]
struct EntryDocument {
    group: String,
    combo: String,
    auc: f64,
    n_focal: u64,
    d: f64,
}

/// The headline numbers of a report; enough to build a leaderboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub submission_id: String,
    pub bias_positive: f64,
    pub bias_negative: f64,
    pub accuracy: f64,
}

impl ReportSummary {
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

impl From<&EvaluationReport> for ReportSummary {
    fn from(r: &EvaluationReport) -> Self {
        Self {
            submission_id: r.submission_id.clone(),
            bias_positive: r.bias_positive,
            bias_negative: r.bias_negative,
            accuracy: r.accuracy,
        }
    }
}

fn names(schema: &AttributeSchema, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| schema.attributes()[i].name.clone()).collect()
}

fn polarity_doc(schema: &AttributeSchema, r: &PolarityResult) -> PolarityDocument {
    PolarityDocument {
        bias: r.bias,
        group_averages: r
            .discrimination
            .group_averages
            .iter()
            .map(|(&g, &average)| GroupAverage {
                group: schema.group_label(g),
                average,
            })
            .collect(),
        entries: r
            .auc
            .entries
            .iter()
            .map(|(&(g, c), e)| EntryDocument {
                group: schema.group_label(g),
                combo: schema.combo_label(c),
                auc: e.auc,
                n_focal: e.n_focal,
                d: r.discrimination.entries[&(g, c)],
            })
            .collect(),
    }
}

fn polarity_from_doc(
    schema: &AttributeSchema,
    polarity: Polarity,
    config: &EvalConfig,
    doc: PolarityDocument,
) -> Result<PolarityResult, ReportError> {
    let group = |label: &str| {
        schema
            .parse_group_label(label)
            .ok_or_else(|| ReportError::UnknownGroup(label.to_string()))
    };
    let mut auc = SubgroupAucTable::new(polarity);
    let mut d = BTreeMap::new();
    for e in doc.entries {
        let g = group(&e.group)?;
        let c = schema
            .parse_combo_label(&e.combo)
            .ok_or_else(|| ReportError::UnknownCombo(e.combo.clone()))?;
        auc.entries.insert(
            (g, c),
            AucEntry {
                auc: e.auc,
                n_focal: e.n_focal,
            },
        );
        d.insert((g, c), e.d);
    }
    let mut group_averages = BTreeMap::new();
    for a in doc.group_averages {
        group_averages.insert(group(&a.group)?, a.average);
    }
    Ok(PolarityResult {
        auc,
        discrimination: DiscriminationTable {
            polarity,
            entries: d,
            group_averages,
            denominator: config.combo_denominator,
        },
        bias: doc.bias,
    })
}

impl EvaluationReport {
    /// Pretty-printed JSON with a fixed field order.
    pub fn to_json(&self, schema: &AttributeSchema) -> String {
        let doc = ReportDocument {
            submission_id: self.submission_id.clone(),
            accuracy: self.accuracy,
            bias_positive: self.bias_positive,
            bias_negative: self.bias_negative,
            config: self.config,
            counts: self.counts,
            group_attributes: names(schema, schema.protected()),
            combo_attributes: names(schema, schema.legitimate()),
            positive: polarity_doc(schema, &self.positive),
            negative: polarity_doc(schema, &self.negative),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(schema: &AttributeSchema, text: &str) -> Result<Self, ReportError> {
        let doc: ReportDocument = serde_json::from_str(text)?;
        for (expected, found) in [
            (names(schema, schema.protected()), &doc.group_attributes),
            (names(schema, schema.legitimate()), &doc.combo_attributes),
        ] {
            if &expected != found {
                return Err(ReportError::SchemaMismatch {
                    expected,
                    found: found.clone(),
                });
            }
        }
        Ok(Self {
            submission_id: doc.submission_id,
            accuracy: doc.accuracy,
            bias_positive: doc.bias_positive,
            bias_negative: doc.bias_negative,
            positive: polarity_from_doc(schema, Polarity::Positive, &doc.config, doc.positive)?,
            negative: polarity_from_doc(schema, Polarity::Negative, &doc.config, doc.negative)?,
            counts: doc.counts,
            config: doc.config,
        })
    }
}
