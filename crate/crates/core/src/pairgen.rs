//! Verification pair generation.
//!
//! Pairs are drawn so that as many distinct legitimate-attribute
//! combinations as possible are represented. Images are bucketed by their
//! legitimate-value profile; a *cell* is a pool (one identity for positives,
//! one protected group or the whole dataset for negatives) together with an
//! unordered pair of profiles, so every image pair in a cell shares one combo
//! key. Generation walks the feasible combo keys round-robin, and within a
//! key rotates through its cells, always taking the least-used eligible image
//! pair. No combo receives a second pair before every feasible combo has one.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::schema::{ComboKey, Dataset, PairGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" | "pos" | "+" | "1" => Ok(Polarity::Positive),
            "negative" | "neg" | "-" | "0" => Ok(Polarity::Negative),
            other => Err(format!("unknown polarity `{other}`")),
        }
    }
}

/// An image pair with its derived group and combo keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationPair {
    pub pair_id: String,
    pub image_a: String,
    pub image_b: String,
    pub polarity: Polarity,
    pub group: PairGroup,
    pub combo: ComboKey,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairGenOptions {
    /// Allow negatives whose identities belong to different protected groups.
    /// Such pairs carry [`PairGroup::Mixed`].
    pub mixed_negatives: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub positive_missing: usize,
    pub negative_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairGenOutput {
    pub pairs: Vec<VerificationPair>,
    /// Set when the eligible population could not meet a target.
    pub shortfall: Option<Shortfall>,
}

/// Cells whose full candidate list is at most this long are enumerated
/// eagerly; larger ones are sampled.
const LIST_LIMIT: usize = 4096;
const SAMPLE_TRIES: usize = 64;
const SAMPLE_CANDIDATES: usize = 4;

/// Images of one pool, bucketed by legitimate profile.
struct Pool {
    profiles: BTreeMap<u32, Vec<u32>>,
}

fn profile_code(dataset: &Dataset, image: usize) -> u32 {
    let schema = dataset.schema();
    let mut code = 0u32;
    for (&attr, &v) in schema.legitimate().iter().zip(dataset.profile(image)) {
        code = code * schema.attributes()[attr].values.len() as u32 + v as u32;
    }
    code
}

fn pools(dataset: &Dataset, polarity: Polarity, mixed: bool) -> Vec<Pool> {
    let mut keyed: BTreeMap<u32, BTreeMap<u32, Vec<u32>>> = BTreeMap::new();
    for image in 0..dataset.images().len() {
        let pool = match polarity {
            Polarity::Positive => dataset.identity_of(image) as u32,
            Polarity::Negative if mixed => 0,
            Polarity::Negative => dataset.image_group(image).0,
        };
        keyed
            .entry(pool)
            .or_default()
            .entry(profile_code(dataset, image))
            .or_default()
            .push(image as u32);
    }
    keyed.into_values().map(|profiles| Pool { profiles }).collect()
}

fn distinct_identities(dataset: &Dataset, images: &[u32]) -> BTreeSet<usize> {
    images.iter().map(|&i| dataset.identity_of(i as usize)).collect()
}

/// Whether some image pair in `left x right` is eligible for `polarity`.
fn cell_feasible(dataset: &Dataset, polarity: Polarity, left: &[u32], right: &[u32], same: bool) -> bool {
    match polarity {
        // a positive pool is a single identity
        Polarity::Positive => !same || left.len() >= 2,
        Polarity::Negative => {
            let l = distinct_identities(dataset, left);
            if same {
                l.len() >= 2
            } else {
                let r = distinct_identities(dataset, right);
                !(l.len() == 1 && l == r)
            }
        }
    }
}

/// Exact set of combo keys realized by at least one eligible pair.
pub fn enumerate_feasible_combos(
    dataset: &Dataset,
    polarity: Polarity,
    options: &PairGenOptions,
) -> BTreeSet<ComboKey> {
    let mut out = BTreeSet::new();
    for pool in pools(dataset, polarity, options.mixed_negatives) {
        let entries: Vec<&Vec<u32>> = pool.profiles.values().collect();
        for (i, left) in entries.iter().enumerate() {
            for (offset, right) in entries[i..].iter().enumerate() {
                if cell_feasible(dataset, polarity, left, right, offset == 0) {
                    out.insert(dataset.combo_of(left[0] as usize, right[0] as usize));
                }
            }
        }
    }
    out
}

enum CellSource {
    Listed(Vec<(u32, u32)>),
    Sampled {
        left: Vec<u32>,
        right: Vec<u32>,
        same: bool,
    },
}

struct Cell {
    source: CellSource,
}

struct Drawer<'a> {
    dataset: &'a Dataset,
    polarity: Polarity,
    usage: Vec<u32>,
    used: HashSet<(u32, u32)>,
    rng: ChaCha8Rng,
}

impl Drawer<'_> {
    fn eligible(&self, a: u32, b: u32) -> bool {
        let same_identity = self.dataset.identity_of(a as usize) == self.dataset.identity_of(b as usize);
        a != b && same_identity == (self.polarity == Polarity::Positive) && !self.used.contains(&ordered(a, b))
    }

    fn cost(&self, (a, b): (u32, u32)) -> u32 {
        self.usage[a as usize] + self.usage[b as usize]
    }

    fn take(&mut self, pair: (u32, u32)) -> (u32, u32) {
        let pair = ordered(pair.0, pair.1);
        self.usage[pair.0 as usize] += 1;
        self.usage[pair.1 as usize] += 1;
        self.used.insert(pair);
        pair
    }

    /// Next pair from `cell`, or `None` once the cell is exhausted.
    fn draw(&mut self, cell: &mut Cell) -> Option<(u32, u32)> {
        if let CellSource::Sampled { left, right, same } = &cell.source {
            let mut found: Vec<(u32, u32)> = Vec::with_capacity(SAMPLE_CANDIDATES);
            for _ in 0..SAMPLE_TRIES {
                let a = left[self.rng.random_range(0..left.len())];
                let b = right[self.rng.random_range(0..right.len())];
                let p = ordered(a, b);
                if self.eligible(a, b) && !found.contains(&p) {
                    found.push(p);
                    if found.len() == SAMPLE_CANDIDATES {
                        break;
                    }
                }
            }
            if let Some(&best) = found.iter().min_by_key(|&&p| self.cost(p)) {
                return Some(self.take(best));
            }
            // sampling stalls near exhaustion: fall back to the explicit list
            let listed = self.list(left, right, *same);
            cell.source = CellSource::Listed(listed);
        }
        let CellSource::Listed(candidates) = &mut cell.source else {
            unreachable!()
        };
        candidates.retain(|&(a, b)| !self.used.contains(&(a, b)));
        let (pos, _) = candidates.iter().enumerate().min_by_key(|(_, &p)| self.cost(p))?;
        let pair = candidates.swap_remove(pos);
        Some(self.take(pair))
    }

    fn list(&mut self, left: &[u32], right: &[u32], same: bool) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (i, &a) in left.iter().enumerate() {
            let rest = if same { &right[i + 1..] } else { right };
            for &b in rest {
                if self.eligible(a, b) {
                    out.push(ordered(a, b));
                }
            }
        }
        out.shuffle(&mut self.rng);
        out
    }
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn build_cells(drawer: &mut Drawer<'_>, polarity: Polarity, mixed: bool) -> BTreeMap<ComboKey, Vec<Cell>> {
    let dataset = drawer.dataset;
    let mut by_combo: BTreeMap<ComboKey, Vec<Cell>> = BTreeMap::new();
    for pool in pools(dataset, polarity, mixed) {
        let entries: Vec<&Vec<u32>> = pool.profiles.values().collect();
        for (i, left) in entries.iter().enumerate() {
            for (offset, right) in entries[i..].iter().enumerate() {
                let same = offset == 0;
                if !cell_feasible(dataset, polarity, left, right, same) {
                    continue;
                }
                let combo = dataset.combo_of(left[0] as usize, right[0] as usize);
                let size = if same {
                    left.len() * (left.len() - 1) / 2
                } else {
                    left.len() * right.len()
                };
                let source = if polarity == Polarity::Positive || size <= LIST_LIMIT {
                    CellSource::Listed(drawer.list(left, right, same))
                } else {
                    CellSource::Sampled {
                        left: (*left).clone(),
                        right: (*right).clone(),
                        same,
                    }
                };
                if matches!(&source, CellSource::Listed(v) if v.is_empty()) {
                    continue;
                }
                by_combo.entry(combo).or_default().push(Cell { source });
            }
        }
    }
    for cells in by_combo.values_mut() {
        cells.shuffle(&mut drawer.rng);
    }
    by_combo
}

fn generate_polarity(drawer: &mut Drawer<'_>, polarity: Polarity, target: usize, mixed: bool) -> Vec<(u32, u32)> {
    drawer.polarity = polarity;
    let mut by_combo = build_cells(drawer, polarity, mixed);
    let mut order: Vec<ComboKey> = by_combo.keys().copied().collect();
    order.shuffle(&mut drawer.rng);
    let mut cursor: BTreeMap<ComboKey, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(target);
    while out.len() < target && !order.is_empty() {
        let mut next_round = Vec::with_capacity(order.len());
        for combo in order {
            if out.len() == target {
                break;
            }
            let cells = by_combo.get_mut(&combo).expect("combo has cells");
            let at = cursor.entry(combo).or_insert(0);
            while !cells.is_empty() {
                let idx = *at % cells.len();
                match drawer.draw(&mut cells[idx]) {
                    Some(pair) => {
                        out.push(pair);
                        *at = idx + 1;
                        break;
                    }
                    None => {
                        cells.remove(idx);
                        *at = idx;
                    }
                }
            }
            if !cells.is_empty() {
                next_round.push(combo);
            }
        }
        order = next_round;
    }
    out
}

/// Generates up to `target_positive` positive and `target_negative` negative
/// pairs. Deterministic for a given dataset, targets, options and seed.
pub fn generate_pairs(
    dataset: &Dataset,
    target_positive: usize,
    target_negative: usize,
    seed: u64,
    options: &PairGenOptions,
) -> PairGenOutput {
    let mut drawer = Drawer {
        dataset,
        polarity: Polarity::Positive,
        usage: vec![0; dataset.images().len()],
        used: HashSet::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let positives = generate_polarity(&mut drawer, Polarity::Positive, target_positive, false);
    let negatives = generate_polarity(
        &mut drawer,
        Polarity::Negative,
        target_negative,
        options.mixed_negatives,
    );
    let shortfall = (positives.len() < target_positive || negatives.len() < target_negative).then(|| Shortfall {
        positive_missing: target_positive - positives.len(),
        negative_missing: target_negative - negatives.len(),
    });
    let mut pairs = Vec::with_capacity(positives.len() + negatives.len());
    for (polarity, prefix, list) in [
        (Polarity::Positive, 'p', positives),
        (Polarity::Negative, 'n', negatives),
    ] {
        for (i, (a, b)) in list.into_iter().enumerate() {
            let (a, b) = (a as usize, b as usize);
            pairs.push(VerificationPair {
                pair_id: format!("{prefix}{:07}", i + 1),
                image_a: dataset.images()[a].image_id.clone(),
                image_b: dataset.images()[b].image_id.clone(),
                polarity,
                group: dataset.group_of(a, b),
                combo: dataset.combo_of(a, b),
            });
        }
    }
    PairGenOutput { pairs, shortfall }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{AttributeSchema, IdentityRecord, ImageRecord};

    fn img(id: &str, ident: &str, glasses: &str) -> ImageRecord {
        ImageRecord::new(
            id,
            ident,
            &[
                ("age_group", "A1"),
                ("pose", "frontal"),
                ("source", "still"),
                ("glasses", glasses),
                ("bbox", "big"),
            ],
        )
    }

    fn person(id: &str, gender: &str, skin: &str) -> IdentityRecord {
        IdentityRecord::new(id, &[("gender", gender), ("skin", skin)])
    }

    fn dataset(images: Vec<ImageRecord>, identities: Vec<IdentityRecord>) -> Dataset {
        Dataset::new(AttributeSchema::challenge_default(), images, identities).unwrap()
    }

    fn glasses_labels(d: &Dataset, keys: &BTreeSet<ComboKey>) -> Vec<String> {
        let slot = 3;
        keys.iter()
            .map(|&k| {
                let pair = d.schema().combo_component(k, slot);
                d.schema().pair_label(d.schema().legitimate()[slot], pair)
            })
            .collect()
    }

    #[test]
    fn two_images_one_identity_gives_one_positive() {
        let d = dataset(
            vec![img("a", "p", "G0"), img("b", "p", "G0")],
            vec![person("p", "male", "light")],
        );
        let out = generate_pairs(&d, 1, 0, 7, &PairGenOptions::default());
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].polarity, Polarity::Positive);
        assert!(out.shortfall.is_none());
        let feasible = enumerate_feasible_combos(&d, Polarity::Positive, &PairGenOptions::default());
        assert_eq!(feasible.len(), 1);
    }

    #[test]
    fn singletons_admit_no_positive() {
        let d = dataset(
            vec![img("a", "p", "G0"), img("b", "q", "G0")],
            vec![person("p", "male", "light"), person("q", "male", "light")],
        );
        assert!(enumerate_feasible_combos(&d, Polarity::Positive, &PairGenOptions::default()).is_empty());
        let out = generate_pairs(&d, 3, 0, 1, &PairGenOptions::default());
        assert!(out.pairs.is_empty());
        assert_eq!(
            out.shortfall,
            Some(Shortfall {
                positive_missing: 3,
                negative_missing: 0
            })
        );
    }

    #[test]
    fn glasses_toy_positive_combos() {
        let d = dataset(
            vec![img("a", "p", "G0"), img("b", "p", "G0"), img("c", "p", "G1")],
            vec![person("p", "female", "dark")],
        );
        let combos = enumerate_feasible_combos(&d, Polarity::Positive, &PairGenOptions::default());
        assert_eq!(glasses_labels(&d, &combos), vec!["G0-G0", "G0-G1"]);
    }

    #[test]
    fn negatives_stay_within_group_by_default() {
        let d = dataset(
            vec![img("a", "p", "G0"), img("b", "q", "G0"), img("c", "r", "G1")],
            vec![
                person("p", "male", "light"),
                person("q", "male", "light"),
                person("r", "female", "light"),
            ],
        );
        let out = generate_pairs(&d, 0, 5, 3, &PairGenOptions::default());
        assert_eq!(out.pairs.len(), 1);
        assert!(matches!(out.pairs[0].group, PairGroup::Group(_)));
        let mixed = PairGenOptions { mixed_negatives: true };
        let out = generate_pairs(&d, 0, 5, 3, &mixed);
        assert_eq!(out.pairs.len(), 3);
        assert_eq!(out.pairs.iter().filter(|p| p.group == PairGroup::Mixed).count(), 2);
    }
}
