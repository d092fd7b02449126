use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::grouped::SubgroupAucTable;
use super::MetricsError;
use crate::pairgen::Polarity;
use crate::schema::{ComboKey, GroupKey};

/// Which combos enter a group's average discrimination.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComboDenominator {
    /// Every combo where the group has an entry.
    #[default]
    PerGroup,
    /// Only combos where every group of the table has an entry.
    Intersection,
}

impl std::str::FromStr for ComboDenominator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-group" => Ok(Self::PerGroup),
            "intersection" => Ok(Self::Intersection),
            other => Err(format!(
                "unknown combo denominator `{other}` (per-group | intersection)"
            )),
        }
    }
}

/// Gap between the best group's AUC and each group's AUC, per combo.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationTable {
    pub polarity: Polarity,
    pub entries: BTreeMap<(GroupKey, ComboKey), f64>,
    pub group_averages: BTreeMap<GroupKey, f64>,
    pub denominator: ComboDenominator,
}

impl DiscriminationTable {
    /// Entries regrouped per combo, groups in key order.
    pub fn by_combo(&self) -> BTreeMap<ComboKey, Vec<(GroupKey, f64)>> {
        let mut out: BTreeMap<ComboKey, Vec<(GroupKey, f64)>> = BTreeMap::new();
        for (&(g, c), &d) in &self.entries {
            out.entry(c).or_default().push((g, d));
        }
        out
    }

    pub fn groups(&self) -> BTreeSet<GroupKey> {
        self.entries.keys().map(|&(g, _)| g).collect()
    }

    /// Combos that count towards the averages under the table's denominator.
    pub fn counted_combos(&self) -> BTreeSet<ComboKey> {
        let by_combo = self.by_combo();
        match self.denominator {
            ComboDenominator::PerGroup => by_combo.into_keys().collect(),
            ComboDenominator::Intersection => {
                let all = self.groups().len();
                by_combo
                    .into_iter()
                    .filter(|(_, gs)| gs.len() == all)
                    .map(|(c, _)| c)
                    .collect()
            }
        }
    }
}

/// Mean discrimination per group over `combos`, restricted to the combos
/// where the group has an entry. Groups without any entry are omitted.
pub(crate) fn average_over(
    entries: &BTreeMap<(GroupKey, ComboKey), f64>,
    combos: impl Fn(ComboKey) -> bool,
) -> BTreeMap<GroupKey, f64> {
    let mut sums: BTreeMap<GroupKey, (f64, u64)> = BTreeMap::new();
    for (&(g, c), &d) in entries {
        if combos(c) {
            let s = sums.entry(g).or_insert((0.0, 0));
            s.0 += d;
            s.1 += 1;
        }
    }
    sums.into_iter().map(|(g, (s, n))| (g, s / n as f64)).collect()
}

/// Discrimination of every bucket: the best AUC among the groups present at
/// the bucket's combo minus the bucket's own AUC.
pub fn discrimination(
    table: &SubgroupAucTable,
    denominator: ComboDenominator,
) -> Result<DiscriminationTable, MetricsError> {
    if table.entries.is_empty() {
        return Err(MetricsError::EmptyTable(table.polarity));
    }
    let mut best: BTreeMap<ComboKey, f64> = BTreeMap::new();
    for (&(_, c), e) in &table.entries {
        let b = best.entry(c).or_insert(f64::NEG_INFINITY);
        if e.auc > *b {
            *b = e.auc;
        }
    }
    let entries: BTreeMap<(GroupKey, ComboKey), f64> = table
        .entries
        .iter()
        .map(|(&(g, c), e)| ((g, c), best[&c] - e.auc))
        .collect();
    let mut out = DiscriminationTable {
        polarity: table.polarity,
        entries,
        group_averages: BTreeMap::new(),
        denominator,
    };
    let counted = out.counted_combos();
    if counted.is_empty() {
        return Err(MetricsError::EmptyIntersection(table.polarity));
    }
    out.group_averages = average_over(&out.entries, |c| counted.contains(&c));
    Ok(out)
}

/// Average discrimination of the most discriminated group minus that of the
/// least discriminated one.
pub fn bias_score(table: &DiscriminationTable) -> Result<f64, MetricsError> {
    let mut values = table.group_averages.values().copied();
    let first = values.next().ok_or(MetricsError::EmptyTable(table.polarity))?;
    let (lo, hi) = values.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}
