use super::MetricsError;

/// Contrast scores sorted once for repeated rank lookups.
///
/// Scores must be finite. `-0.0` is folded into `0.0` so that the sort order
/// agrees with `==` on ties.
#[derive(Debug, Clone)]
pub struct SortedScores(Vec<f64>);

/// Which side of the contrast set earns credit for the focal score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Focal positives: credit for every contrast score strictly below.
    Above,
    /// Focal negatives: credit for every contrast score strictly above.
    Below,
}

impl SortedScores {
    pub fn new(scores: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = scores.into_iter().map(|s| s + 0.0).collect();
        v.sort_unstable_by(f64::total_cmp);
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Twice the Mann-Whitney credit of one focal score: 2 per strict win,
    /// 1 per tie. Kept integral so sums are exact.
    pub fn credit2(&self, score: f64, orientation: Orientation) -> u64 {
        let below = self.0.partition_point(|&c| c < score);
        let through = self.0.partition_point(|&c| c <= score);
        match orientation {
            Orientation::Above => (below + through) as u64,
            Orientation::Below => (2 * self.0.len() - below - through) as u64,
        }
    }
}

/// Converts an accumulated doubled credit into an AUC value.
pub(crate) fn auc_from_credit(credit2: u64, n_focal: u64, n_contrast: u64) -> f64 {
    credit2 as f64 / (2 * n_focal * n_contrast) as f64
}

/// Mann-Whitney AUC: the probability that a positive outscores a negative,
/// ties counting one half. `O((P + N) log N)`.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64, MetricsError> {
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricsError::UndefinedAuc);
    }
    let sorted = SortedScores::new(neg.iter().copied());
    let credit: u64 = pos.iter().map(|&p| sorted.credit2(p + 0.0, Orientation::Above)).sum();
    Ok(auc_from_credit(credit, pos.len() as u64, neg.len() as u64))
}
