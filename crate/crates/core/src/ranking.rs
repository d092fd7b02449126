//! Leaderboards: dense ranks per metric, averaged.
//!
//! Submissions are ranked on bias for positive pairs (ascending), bias for
//! negative pairs (ascending) and accuracy (descending). Tied values share a
//! rank and the next distinct value takes the next integer. The baseline is
//! ranked alongside the submissions; anything not above its accuracy is
//! kept on the board but flagged as excluded.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::ReportSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Smaller is better.
    Ascending,
    /// Larger is better.
    Descending,
}

fn dense_rank_by<T>(values: &[T], cmp: impl Fn(&T, &T) -> Ordering) -> Vec<u32> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| cmp(&values[a], &values[b]));
    let mut ranks = vec![0; values.len()];
    let mut rank = 0;
    for (k, &i) in order.iter().enumerate() {
        if k == 0 || cmp(&values[order[k - 1]], &values[i]) != Ordering::Equal {
            rank += 1;
        }
        ranks[i] = rank;
    }
    ranks
}

/// Dense ranks starting at 1.
pub fn dense_rank(values: &[f64], direction: Direction) -> Vec<u32> {
    match direction {
        Direction::Ascending => dense_rank_by(values, |a, b| a.total_cmp(b)),
        Direction::Descending => dense_rank_by(values, |a, b| b.total_cmp(a)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Dense position by average ranking.
    pub position: u32,
    pub submission_id: String,
    pub bias_positive: f64,
    pub bias_negative: f64,
    pub accuracy: f64,
    pub rank_bias_pos: u32,
    pub rank_bias_neg: u32,
    pub rank_acc: u32,
    pub average_ranking: f64,
    pub baseline: bool,
    /// Why the entry does not compete, if it does not.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeaderboardOptions {
    /// Decimal places metric values are rounded to before ranking, matching
    /// the published board; `None` ranks on full precision.
    pub precision: Option<u32>,
}

impl Default for LeaderboardOptions {
    fn default() -> Self {
        Self { precision: Some(6) }
    }
}

fn rank_column(values: &[f64], direction: Direction, precision: Option<u32>) -> Vec<u32> {
    match precision {
        Some(p) => {
            let scale = 10f64.powi(p as i32);
            let keys: Vec<i64> = values.iter().map(|v| (v * scale).round() as i64).collect();
            match direction {
                Direction::Ascending => dense_rank_by(&keys, |a, b| a.cmp(b)),
                Direction::Descending => dense_rank_by(&keys, |a, b| b.cmp(a)),
            }
        }
        None => dense_rank(values, direction),
    }
}

/// Ranks every submission together with the baseline and sorts the board by
/// average ranking, then bias on positive pairs, then submission id.
pub fn build_leaderboard(
    reports: &[ReportSummary],
    baseline: &ReportSummary,
    options: &LeaderboardOptions,
) -> Vec<LeaderboardEntry> {
    let mut rows: Vec<&ReportSummary> = vec![baseline];
    rows.extend(reports.iter().filter(|r| r.submission_id != baseline.submission_id));
    let col = |f: fn(&ReportSummary) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let bp = rank_column(&col(|r| r.bias_positive), Direction::Ascending, options.precision);
    let bn = rank_column(&col(|r| r.bias_negative), Direction::Ascending, options.precision);
    let acc = rank_column(&col(|r| r.accuracy), Direction::Descending, options.precision);
    let sums: Vec<u32> = (0..rows.len()).map(|i| bp[i] + bn[i] + acc[i]).collect();
    let positions = dense_rank_by(&sums, |a, b| a.cmp(b));
    let mut board: Vec<LeaderboardEntry> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let is_baseline = i == 0;
            let excluded = (!is_baseline && r.accuracy <= baseline.accuracy).then(|| {
                format!(
                    "accuracy {:.6} does not exceed baseline accuracy {:.6}",
                    r.accuracy, baseline.accuracy
                )
            });
            LeaderboardEntry {
                position: positions[i],
                submission_id: r.submission_id.clone(),
                bias_positive: r.bias_positive,
                bias_negative: r.bias_negative,
                accuracy: r.accuracy,
                rank_bias_pos: bp[i],
                rank_bias_neg: bn[i],
                rank_acc: acc[i],
                average_ranking: sums[i] as f64 / 3.0,
                baseline: is_baseline,
                excluded,
            }
        })
        .collect();
    board.sort_by(|a, b| {
        a.average_ranking
            .total_cmp(&b.average_ranking)
            .then(a.bias_positive.total_cmp(&b.bias_positive))
            .then_with(|| a.submission_id.cmp(&b.submission_id))
    });
    board
}

/// Plain-text board in the published column layout.
pub fn render_text(board: &[LeaderboardEntry], precision: usize) -> String {
    let header = [
        "Participant",
        "Average Ranking",
        "Bias (+ pairs)",
        "Bias (- pairs)",
        "Accuracy",
        "Note",
    ];
    let rows: Vec<[String; 6]> = board
        .iter()
        .map(|e| {
            let note = if e.baseline {
                "baseline".to_string()
            } else if e.excluded.is_some() {
                "excluded".to_string()
            } else {
                String::new()
            };
            [
                e.submission_id.clone(),
                format!("{:.6} ({})", e.average_ranking, e.position),
                format!("{:.precision$} ({})", e.bias_positive, e.rank_bias_pos),
                format!("{:.precision$} ({})", e.bias_negative, e.rank_bias_neg),
                format!("{:.precision$} ({})", e.accuracy, e.rank_acc),
                note,
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    for r in &rows {
        line(&mut out, &r.each_ref().map(String::as_str));
    }
    out
}
