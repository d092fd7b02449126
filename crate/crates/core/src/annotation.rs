//! Turning raw annotator votes into final dataset labels.
//!
//! Categorical attributes are majority-voted after mapping raw labels to
//! final values (per image, or pooled over all images of an identity for
//! identity-scoped attributes). Ages are corrected per annotator by an affine
//! map fitted on images of known age, averaged, and thresholded into groups.
//! Bounding boxes are classified from their pixel size.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{AttributeDef, AttributeSchema, IdentityRecord, ImageRecord, LabelRule, Scope};

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("`{target}` has no votes for `{attribute}`")]
    NoVotes { target: String, attribute: String },
    #[error("`{value}` is not a raw label of `{attribute}`")]
    UnknownRawLabel { attribute: String, value: String },
    #[error("vote for unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("vote targets unknown image or identity `{0}`")]
    UnknownTarget(String),
    #[error("`{attribute}` is image-scoped but the vote targets identity `{target}`")]
    ScopeMismatch { target: String, attribute: String },
    #[error("age calibration needs at least two points")]
    TooFewPoints,
    #[error("age calibration is degenerate: all annotated ages are equal")]
    DegenerateCalibration,
    #[error("annotator `{0}` has no age calibration")]
    MissingCalibration(String),
    #[error("`{0}` is not a valid age")]
    BadAge(String),
    #[error("`{0}` is not a WIDTHxHEIGHT box size")]
    BadBox(String),
    #[error("bounding box sides must be positive, got {0}x{1}")]
    NonPositiveBox(f64, f64),
    #[error("image `{0}` appears twice in the image index")]
    DuplicateImage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorVote {
    pub annotator_id: String,
    /// Image id, or identity id for identity-scoped attributes.
    pub target_id: String,
    pub attribute: String,
    pub value: String,
}

/// Result of a vote: the winning value index and whether the top count was
/// shared (broken by schema value order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aggregated {
    pub value: usize,
    pub tie: bool,
}

fn majority(counts: &[usize]) -> Aggregated {
    let best = *counts.iter().max().expect("attribute has values");
    let value = counts.iter().position(|&c| c == best).expect("max exists");
    let tie = counts.iter().filter(|&&c| c == best).count() > 1;
    Aggregated { value, tie }
}

fn vote_categorical(def: &AttributeDef, target: &str, votes: &[&str]) -> Result<Aggregated, AnnotationError> {
    if votes.is_empty() {
        return Err(AnnotationError::NoVotes {
            target: target.into(),
            attribute: def.name.clone(),
        });
    }
    let mut counts = vec![0usize; def.values.len()];
    for raw in votes {
        let v = def.map_raw(raw).ok_or_else(|| AnnotationError::UnknownRawLabel {
            attribute: def.name.clone(),
            value: raw.to_string(),
        })?;
        counts[v] += 1;
    }
    Ok(majority(&counts))
}

/// Modal value over every vote cast for one identity, pooled across its
/// images.
pub fn aggregate_identity_attribute(def: &AttributeDef, votes: &[&str]) -> Result<Aggregated, AnnotationError> {
    vote_categorical(def, "identity", votes)
}

/// Modal value of one image's votes, after raw labels are mapped (for
/// example transparent glasses and sunglasses both count as glasses).
pub fn aggregate_image_attribute(def: &AttributeDef, votes: &[&str]) -> Result<Aggregated, AnnotationError> {
    vote_categorical(def, "image", votes)
}

/// Affine correction of one annotator's age estimates:
/// `adjusted = k * annotated + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorCalibration {
    pub k: f64,
    pub q: f64,
}

impl AnnotatorCalibration {
    pub const IDENTITY: Self = Self { k: 1.0, q: 0.0 };

    pub fn adjust(&self, annotated: f64) -> f64 {
        self.k * annotated + self.q
    }
}

/// Least-squares fit of true age on annotated age from `(annotated, true)`
/// points.
pub fn calibrate_age_annotator(known: &[(f64, f64)]) -> Result<AnnotatorCalibration, AnnotationError> {
    if known.len() < 2 {
        return Err(AnnotationError::TooFewPoints);
    }
    if let Some(&(x, y)) = known.iter().find(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(AnnotationError::BadAge(format!("({x}, {y})")));
    }
    let n = known.len() as f64;
    let mean_x = known.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = known.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = known.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = known.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(AnnotationError::DegenerateCalibration);
    }
    let k = sxy / sxx;
    Ok(AnnotatorCalibration {
        k,
        q: mean_y - k * mean_x,
    })
}

/// Index of the age group for a (mean adjusted) age: the first group whose
/// upper threshold lies above it. Thresholds belong to the older group.
pub fn age_group(age: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().position(|&t| age < t).unwrap_or(thresholds.len())
}

/// Mean of the calibrated estimates, thresholded into a group index.
/// Returns the group and the mean.
pub fn aggregate_age(
    votes: &[(&str, f64)],
    calibrations: &HashMap<String, AnnotatorCalibration>,
    thresholds: &[f64],
) -> Result<(usize, f64), AnnotationError> {
    if votes.is_empty() {
        return Err(AnnotationError::NoVotes {
            target: "image".into(),
            attribute: "age".into(),
        });
    }
    let mut sum = 0.0;
    for &(annotator, age) in votes {
        let cal = calibrations
            .get(annotator)
            .ok_or_else(|| AnnotationError::MissingCalibration(annotator.into()))?;
        sum += cal.adjust(age);
    }
    let mean = sum / votes.len() as f64;
    Ok((age_group(mean, thresholds), mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxSize {
    Big,
    Small,
}

/// Big iff both sides are strictly larger than `min_side` pixels.
pub fn classify_bbox(width: f64, height: f64, min_side: f64) -> Result<BoxSize, AnnotationError> {
    if !(width > 0.0 && height > 0.0) {
        return Err(AnnotationError::NonPositiveBox(width, height));
    }
    Ok(if width > min_side && height > min_side {
        BoxSize::Big
    } else {
        BoxSize::Small
    })
}

fn parse_box(raw: &str) -> Result<(f64, f64), AnnotationError> {
    let bad = || AnnotationError::BadBox(raw.into());
    let (w, h) = raw.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: f64 = w.trim().parse().map_err(|_| bad())?;
    let h: f64 = h.trim().parse().map_err(|_| bad())?;
    Ok((w, h))
}

/// An image of known age rated by one annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownAge {
    pub annotator_id: String,
    pub age_annotated: f64,
    pub age_true: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieNotice {
    pub target_id: String,
    pub attribute: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub images: Vec<ImageRecord>,
    pub identities: Vec<IdentityRecord>,
    pub ties: Vec<TieNotice>,
    pub calibrations: BTreeMap<String, AnnotatorCalibration>,
}

/// Fits one calibration per annotator from known-age ratings.
pub fn fit_calibrations(known: &[KnownAge]) -> Result<BTreeMap<String, AnnotatorCalibration>, AnnotationError> {
    let mut by_annotator: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for k in known {
        by_annotator
            .entry(&k.annotator_id)
            .or_default()
            .push((k.age_annotated, k.age_true));
    }
    by_annotator
        .into_iter()
        .map(|(a, pts)| Ok((a.to_string(), calibrate_age_annotator(&pts)?)))
        .collect()
}

/// Runs the whole label pipeline.
///
/// `image_index` lists `(image_id, identity_id)` for every image. Votes for
/// identity-scoped attributes may target an image (pooled into its identity)
/// or an identity id. Without `known_ages`, age estimates are used as given.
pub fn aggregate_labels(
    schema: &AttributeSchema,
    image_index: &[(String, String)],
    votes: &[AnnotatorVote],
    known_ages: Option<&[KnownAge]>,
) -> Result<Aggregation, AnnotationError> {
    let mut image_pos: HashMap<&str, usize> = HashMap::new();
    let mut identity_order: Vec<&str> = Vec::new();
    let mut identity_pos: HashMap<&str, usize> = HashMap::new();
    for (i, (image, identity)) in image_index.iter().enumerate() {
        if image_pos.insert(image.as_str(), i).is_some() {
            return Err(AnnotationError::DuplicateImage(image.clone()));
        }
        if !identity_pos.contains_key(identity.as_str()) {
            identity_pos.insert(identity.as_str(), identity_order.len());
            identity_order.push(identity.as_str());
        }
    }
    let calibrations = match known_ages {
        Some(k) => Some(fit_calibrations(k)?),
        None => None,
    };

    // (scope-specific target position, attribute index) -> votes
    let mut image_votes: HashMap<(usize, usize), Vec<&AnnotatorVote>> = HashMap::new();
    let mut identity_votes: HashMap<(usize, usize), Vec<&AnnotatorVote>> = HashMap::new();
    for v in votes {
        let attr = schema
            .attribute_index(&v.attribute)
            .ok_or_else(|| AnnotationError::UnknownAttribute(v.attribute.clone()))?;
        let scope = schema.attributes()[attr].scope;
        if let Some(&img) = image_pos.get(v.target_id.as_str()) {
            match scope {
                Scope::Image => image_votes.entry((img, attr)).or_default().push(v),
                Scope::Identity => {
                    let ident = identity_pos[image_index[img].1.as_str()];
                    identity_votes.entry((ident, attr)).or_default().push(v)
                }
            }
        } else if let Some(&ident) = identity_pos.get(v.target_id.as_str()) {
            if scope == Scope::Image {
                return Err(AnnotationError::ScopeMismatch {
                    target: v.target_id.clone(),
                    attribute: v.attribute.clone(),
                });
            }
            identity_votes.entry((ident, attr)).or_default().push(v);
        } else {
            return Err(AnnotationError::UnknownTarget(v.target_id.clone()));
        }
    }

    let mut ties = Vec::new();
    let mut decide = |def: &AttributeDef, target: &str, vs: Option<&Vec<&AnnotatorVote>>| {
        let vs = vs.map(Vec::as_slice).unwrap_or_default();
        if vs.is_empty() {
            return Err(AnnotationError::NoVotes {
                target: target.into(),
                attribute: def.name.clone(),
            });
        }
        let picked = match def.label_rule() {
            LabelRule::Categorical => {
                let raw: Vec<&str> = vs.iter().map(|v| v.value.as_str()).collect();
                vote_categorical(def, target, &raw)?
            }
            LabelRule::Age { thresholds } => {
                let mut ages = Vec::with_capacity(vs.len());
                for v in vs {
                    let age: f64 = v
                        .value
                        .trim()
                        .parse()
                        .ok()
                        .filter(|a: &f64| a.is_finite() && *a >= 0.0)
                        .ok_or_else(|| AnnotationError::BadAge(v.value.clone()))?;
                    ages.push((v.annotator_id.as_str(), age));
                }
                let cal: HashMap<String, AnnotatorCalibration> = match &calibrations {
                    Some(c) => c.iter().map(|(k, v)| (k.clone(), *v)).collect(),
                    None => ages
                        .iter()
                        .map(|(a, _)| (a.to_string(), AnnotatorCalibration::IDENTITY))
                        .collect(),
                };
                let (value, _) = aggregate_age(&ages, &cal, thresholds)?;
                Aggregated { value, tie: false }
            }
            LabelRule::BoundingBox { min_side } => {
                let mut counts = [0usize; 2];
                for v in vs {
                    let (w, h) = parse_box(&v.value)?;
                    match classify_bbox(w, h, min_side as f64)? {
                        BoxSize::Big => counts[0] += 1,
                        BoxSize::Small => counts[1] += 1,
                    }
                }
                majority(&counts)
            }
        };
        if picked.tie {
            ties.push(TieNotice {
                target_id: target.into(),
                attribute: def.name.clone(),
                value: def.values[picked.value].clone(),
            });
        }
        Ok(def.values[picked.value].clone())
    };

    let mut identities = Vec::with_capacity(identity_order.len());
    for (ident, &id) in identity_order.iter().enumerate() {
        let mut labels = BTreeMap::new();
        for (attr, def) in schema.attributes().iter().enumerate() {
            if def.scope == Scope::Identity {
                labels.insert(def.name.clone(), decide(def, id, identity_votes.get(&(ident, attr)))?);
            }
        }
        identities.push(IdentityRecord {
            identity_id: id.to_string(),
            labels,
        });
    }
    let mut images = Vec::with_capacity(image_index.len());
    for (img, (image_id, identity_id)) in image_index.iter().enumerate() {
        let mut labels = BTreeMap::new();
        for (attr, def) in schema.attributes().iter().enumerate() {
            if def.scope == Scope::Image {
                labels.insert(def.name.clone(), decide(def, image_id, image_votes.get(&(img, attr)))?);
            }
        }
        images.push(ImageRecord {
            image_id: image_id.clone(),
            identity_id: identity_id.clone(),
            labels,
        });
    }
    Ok(Aggregation {
        images,
        identities,
        ties,
        calibrations: calibrations.unwrap_or_default(),
    })
}
