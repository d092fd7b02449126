//! Seeded synthetic datasets and scores with known ground truth.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`: stream 0 draws the dataset, stream 1 the scores.
//! Draws happen in a fixed order (identities by index, then images by
//! index, attributes in schema order; scores in pair order), so a config and
//! seed fully determine every output.
//!
//! Identities are split across protected groups by largest-remainder quotas
//! of the configured shares. Every other attribute is drawn independently
//! from its per-value marginal. A pair's score is
//! `location + spread * (u - 0.5)` with `u` uniform on `[0, 1)`, where the
//! location depends on the pair's polarity and protected group.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ScoreSet;
use crate::pairgen::{Polarity, VerificationPair};
use crate::schema::{AttributeSchema, Designation, GroupKey, IdentityRecord, ImageRecord, PairGroup, Scope};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config must ask for at least one identity")]
    ZeroIdentities,
    #[error("images_per_identity must be an increasing range starting at 1 or more, got {0}..={1}")]
    BadRange(u32, u32),
    #[error("unknown protected group `{0}`")]
    UnknownGroup(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("`{0}` is protected; set its distribution through group shares")]
    ProtectedMarginal(String),
    #[error("`{attribute}` has {expected} values but {got} probabilities were given")]
    WrongArity {
        attribute: String,
        expected: usize,
        got: usize,
    },
    #[error("{0}: probabilities must be non-negative and sum to 1")]
    BadProbabilities(String),
    #[error("score spread must be finite and non-negative")]
    BadSpread,
    #[error("score locations must be finite")]
    BadLocation,
    #[error("malformed synth config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Per-(polarity, group) score locations and the shared spread. Fields left
/// out of a config file take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreModel {
    /// Width `w` of every uniform score distribution.
    pub spread: f64,
    /// Location for positives of groups not listed in `positive`.
    pub default_positive: f64,
    /// Location for negatives of groups not listed in `negative`.
    pub default_negative: f64,
    /// Location for negatives spanning two groups; defaults to
    /// `default_negative`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_negative: Option<f64>,
    /// Group label -> positive location.
    #[serde(default)]
    pub positive: BTreeMap<String, f64>,
    /// Group label -> negative location.
    #[serde(default)]
    pub negative: BTreeMap<String, f64>,
}

impl Default for ScoreModel {
    fn default() -> Self {
        Self {
            spread: 1.0,
            default_positive: 0.75,
            default_negative: 0.25,
            mixed_negative: None,
            positive: BTreeMap::new(),
            negative: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_identities: u32,
    /// Inclusive range of images per identity.
    pub images_per_identity: [u32; 2],
    /// Group label -> share of identities; uniform when empty.
    #[serde(default)]
    pub group_shares: BTreeMap<String, f64>,
    /// Attribute -> probability per value in schema order; uniform when
    /// absent.
    #[serde(default)]
    pub marginals: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub scores: ScoreModel,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_identities: 100,
            images_per_identity: [2, 6],
            group_shares: BTreeMap::new(),
            marginals: BTreeMap::new(),
            scores: ScoreModel::default(),
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("synth config serializes")
    }
}

const PROB_TOLERANCE: f64 = 1e-9;

fn check_probabilities(what: &str, p: &[f64]) -> Result<(), SynthError> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(SynthError::BadProbabilities(what.into()));
    }
    Ok(())
}

/// Group shares indexed by group key.
fn group_shares(schema: &AttributeSchema, config: &SynthConfig) -> Result<Vec<f64>, SynthError> {
    let n = schema.group_count() as usize;
    if config.group_shares.is_empty() {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let mut shares = vec![0.0; n];
    for (label, &p) in &config.group_shares {
        let g = schema
            .parse_group_label(label)
            .ok_or_else(|| SynthError::UnknownGroup(label.clone()))?;
        shares[g.0 as usize] = p;
    }
    check_probabilities("group_shares", &shares)?;
    Ok(shares)
}

/// Marginal per attribute index (protected attributes get `None`).
fn marginals(schema: &AttributeSchema, config: &SynthConfig) -> Result<Vec<Option<Vec<f64>>>, SynthError> {
    for (name, p) in &config.marginals {
        let def = schema
            .attribute(name)
            .ok_or_else(|| SynthError::UnknownAttribute(name.clone()))?;
        if def.designation == Designation::Protected {
            return Err(SynthError::ProtectedMarginal(name.clone()));
        }
        if p.len() != def.values.len() {
            return Err(SynthError::WrongArity {
                attribute: name.clone(),
                expected: def.values.len(),
                got: p.len(),
            });
        }
        check_probabilities(name, p)?;
    }
    Ok(schema
        .attributes()
        .iter()
        .map(|def| match def.designation {
            Designation::Protected => None,
            _ => Some(
                config
                    .marginals
                    .get(&def.name)
                    .cloned()
                    .unwrap_or_else(|| vec![1.0 / def.values.len() as f64; def.values.len()]),
            ),
        })
        .collect())
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // rounding left the total just under 1: take the last possible value
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

/// Largest-remainder apportionment of `n` items by `shares`; ties go to the
/// lower index.
fn apportion(n: u32, shares: &[f64]) -> Vec<u32> {
    let exact: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<u32> = exact.iter().map(|e| e.floor() as u32).collect();
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..shares.len()).filter(|&i| shares[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Draws identities and their images.
pub fn generate_dataset(
    schema: &AttributeSchema,
    config: &SynthConfig,
) -> Result<(Vec<IdentityRecord>, Vec<ImageRecord>), SynthError> {
    if config.n_identities == 0 {
        return Err(SynthError::ZeroIdentities);
    }
    let [lo, hi] = config.images_per_identity;
    if lo == 0 || lo > hi {
        return Err(SynthError::BadRange(lo, hi));
    }
    let shares = group_shares(schema, config)?;
    let marginals = marginals(schema, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut groups: Vec<GroupKey> = apportion(config.n_identities, &shares)
        .iter()
        .enumerate()
        .flat_map(|(g, &c)| std::iter::repeat_n(GroupKey(g as u32), c as usize))
        .collect();
    groups.shuffle(&mut rng);

    let id_width = config.n_identities.to_string().len().max(5);
    let mut identities = Vec::with_capacity(groups.len());
    let mut images = Vec::new();
    for (i, &g) in groups.iter().enumerate() {
        let identity_id = format!("id{:0id_width$}", i + 1);
        let protected = schema.group_value_indices(g);
        let mut labels = BTreeMap::new();
        for (attr, def) in schema.attributes().iter().enumerate() {
            if def.scope != Scope::Identity {
                continue;
            }
            let v = match &marginals[attr] {
                None => {
                    let slot = schema.protected().iter().position(|&a| a == attr).expect("protected");
                    protected[slot]
                }
                Some(p) => draw(&mut rng, p),
            };
            labels.insert(def.name.clone(), def.values[v].clone());
        }
        identities.push(IdentityRecord {
            identity_id: identity_id.clone(),
            labels,
        });
        let n_images = rng.random_range(lo..=hi);
        for _ in 0..n_images {
            let mut labels = BTreeMap::new();
            for (attr, def) in schema.attributes().iter().enumerate() {
                if def.scope != Scope::Image {
                    continue;
                }
                let p = marginals[attr]
                    .as_ref()
                    .expect("protected attributes are identity-scoped");
                labels.insert(def.name.clone(), def.values[draw(&mut rng, p)].clone());
            }
            images.push(ImageRecord {
                image_id: format!("img{:07}", images.len() + 1),
                identity_id: identity_id.clone(),
                labels,
            });
        }
    }
    Ok((identities, images))
}

/// Score locations resolved against a schema.
struct Locations {
    positive: Vec<f64>,
    negative: Vec<f64>,
    mixed: f64,
    spread: f64,
}

fn locations(schema: &AttributeSchema, model: &ScoreModel) -> Result<Locations, SynthError> {
    if !model.spread.is_finite() || model.spread < 0.0 {
        return Err(SynthError::BadSpread);
    }
    let n = schema.group_count() as usize;
    let resolve = |default: f64, overrides: &BTreeMap<String, f64>| {
        let mut out = vec![default; n];
        for (label, &mu) in overrides {
            let g = schema
                .parse_group_label(label)
                .ok_or_else(|| SynthError::UnknownGroup(label.clone()))?;
            out[g.0 as usize] = mu;
        }
        Ok::<_, SynthError>(out)
    };
    let loc = Locations {
        positive: resolve(model.default_positive, &model.positive)?,
        negative: resolve(model.default_negative, &model.negative)?,
        mixed: model.mixed_negative.unwrap_or(model.default_negative),
        spread: model.spread,
    };
    if loc
        .positive
        .iter()
        .chain(&loc.negative)
        .chain([&loc.mixed])
        .any(|x| !x.is_finite())
    {
        return Err(SynthError::BadLocation);
    }
    Ok(loc)
}

/// One score per pair, in pair order.
pub fn generate_score_rows(
    schema: &AttributeSchema,
    pairs: &[VerificationPair],
    config: &SynthConfig,
) -> Result<Vec<(String, f64)>, SynthError> {
    let loc = locations(schema, &config.scores)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    Ok(pairs
        .iter()
        .map(|p| {
            let mu = match (p.polarity, p.group) {
                (Polarity::Positive, PairGroup::Group(g)) => loc.positive[g.0 as usize],
                (Polarity::Negative, PairGroup::Group(g)) => loc.negative[g.0 as usize],
                (_, PairGroup::Mixed) => loc.mixed,
            };
            let u: f64 = rng.random();
            (p.pair_id.clone(), mu + loc.spread * (u - 0.5))
        })
        .collect())
}

pub fn generate_scores(
    schema: &AttributeSchema,
    pairs: &[VerificationPair],
    config: &SynthConfig,
    submission_id: &str,
) -> Result<ScoreSet, SynthError> {
    let rows = generate_score_rows(schema, pairs, config)?;
    Ok(ScoreSet::new(submission_id, rows).expect("generated scores are finite and unique"))
}

/// AUC of `U[a - w/2, a + w/2]` against `U[b - w/2, b + w/2]` for location
/// gap `a - b`; lets tests steer subgroup AUCs.
pub fn uniform_shift_auc(gap: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        return if gap > 0.0 {
            1.0
        } else if gap < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let t = (gap / spread).clamp(-1.0, 1.0);
    if t >= 0.0 {
        1.0 - (1.0 - t).powi(2) / 2.0
    } else {
        (1.0 + t).powi(2) / 2.0
    }
}
