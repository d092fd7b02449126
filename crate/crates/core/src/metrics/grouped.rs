use std::collections::BTreeMap;

use super::auc::{auc_from_credit, Orientation, SortedScores};
use super::{EvalConfig, MetricsError, ScoredPair};
use crate::pairgen::Polarity;
use crate::schema::{ComboKey, GroupKey, PairGroup};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucEntry {
    pub auc: f64,
    pub n_focal: u64,
}

/// AUC per (protected group, legitimate combo) bucket for one polarity. The
/// focal pairs of a bucket are scored against every pair of the opposite
/// polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupAucTable {
    pub polarity: Polarity,
    pub entries: BTreeMap<(GroupKey, ComboKey), AucEntry>,
}

impl SubgroupAucTable {
    pub fn new(polarity: Polarity) -> Self {
        Self {
            polarity,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a table from explicit `(group, combo, auc)` triples, one focal
    /// pair each. Handy for fixtures.
    pub fn from_aucs(polarity: Polarity, aucs: impl IntoIterator<Item = (GroupKey, ComboKey, f64)>) -> Self {
        let entries = aucs
            .into_iter()
            .map(|(g, c, auc)| ((g, c), AucEntry { auc, n_focal: 1 }))
            .collect();
        Self { polarity, entries }
    }
}

/// Per-bucket AUCs for `polarity`. The contrast set is sorted once, then each
/// focal score costs two binary searches, so the whole table is
/// `O((F + C) log C)` for F focal and C contrast pairs.
pub(crate) fn grouped_auc_scored(
    scored: &[ScoredPair],
    polarity: Polarity,
    config: &EvalConfig,
) -> Result<SubgroupAucTable, MetricsError> {
    let contrast = SortedScores::new(scored.iter().filter(|p| p.polarity != polarity).map(|p| p.score));
    if contrast.is_empty() {
        return Err(MetricsError::EmptyContrast(polarity.opposite()));
    }
    let orientation = match polarity {
        Polarity::Positive => Orientation::Above,
        Polarity::Negative => Orientation::Below,
    };
    let mut acc: BTreeMap<(GroupKey, ComboKey), (u64, u64)> = BTreeMap::new();
    for p in scored.iter().filter(|p| p.polarity == polarity) {
        let PairGroup::Group(group) = p.group else {
            continue;
        };
        let slot = acc.entry((group, p.combo)).or_insert((0, 0));
        slot.0 += contrast.credit2(p.score, orientation);
        slot.1 += 1;
    }
    let n_contrast = contrast.len() as u64;
    let entries = acc
        .into_iter()
        .filter(|(_, (_, n))| *n >= config.min_pairs.max(1) as u64)
        .map(|(key, (credit, n))| {
            (
                key,
                AucEntry {
                    auc: auc_from_credit(credit, n, n_contrast),
                    n_focal: n,
                },
            )
        })
        .collect();
    Ok(SubgroupAucTable { polarity, entries })
}
