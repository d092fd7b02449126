//! Shared fixtures and brute-force reference implementations for the
//! integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fairverify_core::metrics::ScoreSet;
use fairverify_core::pairgen::{Polarity, VerificationPair};
use fairverify_core::schema::{ComboKey, GroupKey, PairGroup};

pub use fairverify_core::metrics::ReportSummary;

/// Quadratic AUC with tie credit one half: the focal scores are "better"
/// when higher for positives and when lower for negatives.
pub fn oracle_auc(focal: &[f64], contrast: &[f64], polarity: Polarity) -> f64 {
    let mut credit2: u64 = 0;
    for &f in focal {
        for &c in contrast {
            let (better, tie) = match polarity {
                Polarity::Positive => (f > c, f == c),
                Polarity::Negative => (f < c, f == c),
            };
            credit2 += 2 * better as u64 + tie as u64;
        }
    }
    credit2 as f64 / (2.0 * focal.len() as f64 * contrast.len() as f64)
}

/// Brute-force subgroup AUC table of one polarity.
pub fn oracle_grouped(
    pairs: &[VerificationPair],
    scores: &ScoreSet,
    polarity: Polarity,
) -> BTreeMap<(GroupKey, ComboKey), f64> {
    let contrast: Vec<f64> = pairs
        .iter()
        .filter(|p| p.polarity != polarity)
        .map(|p| scores.get(&p.pair_id).unwrap())
        .collect();
    let mut focal: BTreeMap<(GroupKey, ComboKey), Vec<f64>> = BTreeMap::new();
    for p in pairs.iter().filter(|p| p.polarity == polarity) {
        if let PairGroup::Group(g) = p.group {
            focal
                .entry((g, p.combo))
                .or_default()
                .push(scores.get(&p.pair_id).unwrap());
        }
    }
    focal
        .into_iter()
        .map(|(k, f)| (k, oracle_auc(&f, &contrast, polarity)))
        .collect()
}

/// Reference discrimination (per-group combo denominator): per-group
/// averages of `best AUC at the combo - own AUC`, and their spread.
pub fn oracle_bias(aucs: &BTreeMap<(GroupKey, ComboKey), f64>) -> (BTreeMap<GroupKey, f64>, f64) {
    let mut best: BTreeMap<ComboKey, f64> = BTreeMap::new();
    for (&(_, c), &a) in aucs {
        let b = best.entry(c).or_insert(f64::NEG_INFINITY);
        *b = b.max(a);
    }
    let mut sums: BTreeMap<GroupKey, (f64, f64)> = BTreeMap::new();
    for (&(g, c), &a) in aucs {
        let s = sums.entry(g).or_insert((0.0, 0.0));
        s.0 += best[&c] - a;
        s.1 += 1.0;
    }
    let avgs: BTreeMap<GroupKey, f64> = sums.into_iter().map(|(g, (s, n))| (g, s / n)).collect();
    let hi = avgs.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = avgs.values().copied().fold(f64::INFINITY, f64::min);
    (avgs, hi - lo)
}

/// One published leaderboard row: values and the parenthesized ranks.
pub struct BoardRow {
    pub name: &'static str,
    pub average: &'static str,
    pub position: u32,
    pub bias_positive: f64,
    pub rank_bias_pos: u32,
    pub bias_negative: f64,
    pub rank_bias_neg: u32,
    pub accuracy: f64,
    pub rank_acc: u32,
}

/// Parses `name avg pos bias+ rank bias- rank acc rank` lines.
pub fn parse_board(text: &'static str) -> Vec<BoardRow> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&'static str> = l.split_whitespace().collect();
            assert_eq!(f.len(), 9, "bad fixture line {l}");
            BoardRow {
                name: f[0],
                average: f[1],
                position: f[2].parse().unwrap(),
                bias_positive: f[3].parse().unwrap(),
                rank_bias_pos: f[4].parse().unwrap(),
                bias_negative: f[5].parse().unwrap(),
                rank_bias_neg: f[6].parse().unwrap(),
                accuracy: f[7].parse().unwrap(),
                rank_acc: f[8].parse().unwrap(),
            }
        })
        .collect()
}

pub fn summaries(rows: &[BoardRow]) -> Vec<ReportSummary> {
    rows.iter()
        .map(|r| ReportSummary {
            submission_id: r.name.into(),
            bias_positive: r.bias_positive,
            bias_negative: r.bias_negative,
            accuracy: r.accuracy,
        })
        .collect()
}

/// Development-phase leaderboard (40 rows including the baseline).
pub const DEV_BOARD: &str = "
ustc-nelslip 2.333333 1 0.000142 1 0.002956 3 0.999287 3
zheng.zhu 3.666667 2 0.000344 3 0.003781 7 0.999442 1
CdtQin 3.666667 2 0.000472 5 0.002334 1 0.998477 5
crisp 4.666667 3 0.000935 8 0.003193 4 0.999394 2
haoxl 4.666667 3 0.000348 4 0.003678 6 0.998699 4
cam_vision 5.000000 4 0.000731 6 0.002488 2 0.995621 7
Hyg 6.000000 5 0.000814 7 0.003305 5 0.998402 6
senlin11 9.333333 6 0.000165 2 0.010091 16 0.992093 10
hanamichi 10.666667 7 0.001631 9 0.006760 10 0.987382 13
paranoidai 12.000000 8 0.003779 12 0.007745 13 0.988359 11
six_god 13.000000 9 0.006400 23 0.004670 8 0.993343 8
vuvko 13.333333 10 0.005018 17 0.006880 11 0.988125 12
camel 14.333333 11 0.007078 25 0.005986 9 0.993202 9
debias 15.333333 12 0.002808 11 0.010383 17 0.977708 18
UAM_Ignacio 15.666667 13 0.005009 16 0.010054 15 0.981019 16
zhaixingzi 15.666667 13 0.005322 19 0.010022 14 0.984689 14
clessvna 17.000000 14 0.006617 24 0.007572 12 0.981362 15
ddddddqiu 18.666667 15 0.002675 10 0.015141 21 0.967389 25
jjjjjjjm 19.000000 16 0.004937 15 0.013108 19 0.972278 23
clearlove10 19.333333 17 0.005039 18 0.012280 18 0.972329 22
ai 19.666667 18 0.004123 13 0.019420 25 0.974442 21
hanhao1415 20.000000 19 0.005686 21 0.014742 20 0.977388 19
zhangkun 21.666667 20 0.004896 14 0.020322 27 0.968208 24
YSTBER 23.000000 21 0.008250 27 0.015763 22 0.977343 20
season 24.000000 22 0.011135 31 0.017689 24 0.978085 17
TCxu 25.333333 23 0.005972 22 0.021329 28 0.964486 26
Finn_zhang 28.333333 24 0.005468 20 0.044931 36 0.947747 29
okpeng 29.000000 25 0.010581 30 0.025169 30 0.949839 27
wg1234567p 30.666667 26 0.007765 26 0.042682 35 0.939736 31
Serendi 31.000000 27 0.021709 34 0.021855 29 0.946445 30
baoqianyue 31.000000 27 0.009132 28 0.031606 32 0.938430 33
suhk 31.333333 28 0.014761 33 0.016355 23 0.840568 38
burning 32.333333 29 0.024901 37 0.020274 26 0.915005 34
quentinyq 32.333333 29 0.022878 35 0.037616 34 0.949130 28
jieson_zheng 33.666667 30 0.014731 32 0.045830 37 0.939732 32
yuchun_wang 34.666667 31 0.010568 29 0.052194 38 0.868556 37
fireant 34.666667 31 0.023675 36 0.034809 33 0.903129 35
mengtzu.chiu 36.000000 32 0.050556 38 0.025790 31 0.837854 39
Baseline 38.333333 33 0.057620 40 0.054311 39 0.889264 36
VisTeam 39.666667 34 0.054725 39 0.061032 40 0.820067 40
";

/// Test-phase leaderboard (36 rows including the baseline).
pub const TEST_BOARD: &str = "
paranoidai 1.333333 1 0.000059 2 0.000012 1 0.999966 1
ustc-nelslip 3.666667 2 0.000175 4 0.000172 2 0.999569 5
CdtQin 4.000000 3 0.000036 1 0.000405 9 0.999827 2
debias 4.666667 4 0.000036 1 0.000460 10 0.999825 3
zhaixingzi 5.000000 5 0.000116 3 0.000237 8 0.999698 4
bestone 5.333333 6 0.000175 4 0.000197 5 0.999565 7
haoxl 5.333333 6 0.000178 6 0.000195 4 0.999568 6
Early 5.333333 6 0.000175 4 0.000190 3 0.999547 9
lemoner20 7.000000 7 0.000176 5 0.000201 6 0.999507 10
ai 7.333333 8 0.000180 7 0.000217 7 0.999560 8
six_god 12.333333 9 0.000540 13 0.000984 11 0.998785 13
mcga 13.000000 10 0.000341 11 0.001228 12 0.998265 16
lwx 13.000000 10 0.000327 10 0.001444 14 0.998545 15
doinb 13.333333 11 0.000580 14 0.001599 15 0.999297 11
clearlove10 13.333333 11 0.000687 15 0.001362 13 0.999270 12
Hans 13.666667 12 0.000206 8 0.002497 16 0.998157 17
YSTBER 14.333333 13 0.000396 12 0.003352 17 0.998573 14
hanamichi 15.000000 14 0.000280 9 0.005279 18 0.996242 18
burning 18.333333 15 0.000969 16 0.005815 19 0.992119 20
zheng.zhu 18.666667 16 0.001206 17 0.006573 20 0.993509 19
hq2172 20.000000 17 0.001503 18 0.007151 21 0.990733 21
vuvko 22.000000 18 0.003961 21 0.007562 22 0.983437 23
cam_vision 22.000000 18 0.002094 19 0.008945 25 0.989470 22
UAM_Ignacio 23.000000 19 0.003478 20 0.008249 23 0.974710 26
camel 25.000000 20 0.006143 24 0.010392 27 0.981795 24
DeepBlueAI 25.333333 21 0.008111 25 0.009572 26 0.977451 25
ztelily 25.666667 22 0.005236 22 0.014847 28 0.962481 27
baoqianyue 27.666667 23 0.005377 23 0.021418 31 0.951101 29
yuchun_wang 28.666667 24 0.011524 28 0.008660 24 0.881282 34
lijianshu 28.666667 24 0.008862 26 0.021511 32 0.962229 28
VisTeam 31.000000 25 0.019902 31 0.016837 29 0.917651 33
jieson_zheng 31.000000 25 0.011107 27 0.033817 35 0.941330 31
wg1234567p 31.000000 25 0.012173 30 0.022290 33 0.941947 30
Finn_zhang 31.666667 26 0.011554 29 0.024265 34 0.940516 32
mengtzu.chiu 32.666667 27 0.023490 32 0.018914 30 0.830624 36
Baseline 34.666667 28 0.059694 33 0.058601 36 0.859175 35
";

/// Builds pairs with explicit keys (no dataset needed) and their scores.
pub fn keyed_pairs(spec: &[(Polarity, PairGroup, u32, f64)]) -> (Vec<VerificationPair>, ScoreSet) {
    let mut pairs = Vec::with_capacity(spec.len());
    let mut scores = Vec::with_capacity(spec.len());
    for (i, &(polarity, group, combo, score)) in spec.iter().enumerate() {
        let id = format!("{}{i:07}", &polarity.as_str()[..1]);
        pairs.push(VerificationPair {
            pair_id: id.clone(),
            image_a: format!("a{i}"),
            image_b: format!("b{i}"),
            polarity,
            group,
            combo: ComboKey(combo),
        });
        scores.push((id, score));
    }
    (pairs, ScoreSet::new("fixture", scores).unwrap())
}
