use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AttributeSchema, ComboKey, GroupKey, PairGroup, Scope};
use crate::pairgen::{Polarity, VerificationPair};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub identity_id: String,
    /// Image-scoped attribute -> final value.
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub identity_id: String,
    /// Identity-scoped attribute -> final value.
    pub labels: BTreeMap<String, String>,
}

impl ImageRecord {
    pub fn new(image_id: &str, identity_id: &str, labels: &[(&str, &str)]) -> Self {
        Self {
            image_id: image_id.into(),
            identity_id: identity_id.into(),
            labels: labels.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl IdentityRecord {
    pub fn new(identity_id: &str, labels: &[(&str, &str)]) -> Self {
        Self {
            identity_id: identity_id.into(),
            labels: labels.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateImage {
        image_id: String,
    },
    DuplicateIdentity {
        identity_id: String,
    },
    DanglingIdentity {
        image_id: String,
        identity_id: String,
    },
    MissingLabel {
        record: String,
        attribute: String,
    },
    UnknownValue {
        record: String,
        attribute: String,
        value: String,
    },
    UnexpectedAttribute {
        record: String,
        attribute: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateImage { image_id } => write!(f, "duplicate image id `{image_id}`"),
            Violation::DuplicateIdentity { identity_id } => {
                write!(f, "duplicate identity id `{identity_id}`")
            }
            Violation::DanglingIdentity { image_id, identity_id } => {
                write!(f, "image `{image_id}` references unknown identity `{identity_id}`")
            }
            Violation::MissingLabel { record, attribute } => {
                write!(f, "`{record}` has no `{attribute}` label")
            }
            Violation::UnknownValue {
                record,
                attribute,
                value,
            } => {
                write!(f, "`{record}`: `{value}` is not a value of `{attribute}`")
            }
            Violation::UnexpectedAttribute { record, attribute } => {
                write!(
                    f,
                    "`{record}` carries `{attribute}`, which is not an attribute of this record scope"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_labels(
    schema: &AttributeSchema,
    scope: Scope,
    record: &str,
    labels: &BTreeMap<String, String>,
    out: &mut Vec<Violation>,
) {
    for attr in schema.scoped(scope) {
        match labels.get(&attr.name) {
            None => out.push(Violation::MissingLabel {
                record: record.into(),
                attribute: attr.name.clone(),
            }),
            Some(v) if attr.value_index(v).is_none() => out.push(Violation::UnknownValue {
                record: record.into(),
                attribute: attr.name.clone(),
                value: v.clone(),
            }),
            Some(_) => {}
        }
    }
    for name in labels.keys() {
        if schema.attribute(name).map(|a| a.scope) != Some(scope) {
            out.push(Violation::UnexpectedAttribute {
                record: record.into(),
                attribute: name.clone(),
            });
        }
    }
}

/// Lists every problem with a dataset; it is acceptable iff the report is empty.
pub fn validate_dataset(
    schema: &AttributeSchema,
    images: &[ImageRecord],
    identities: &[IdentityRecord],
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut ids = HashSet::new();
    for ident in identities {
        if !ids.insert(ident.identity_id.as_str()) {
            violations.push(Violation::DuplicateIdentity {
                identity_id: ident.identity_id.clone(),
            });
        }
        check_labels(
            schema,
            Scope::Identity,
            &ident.identity_id,
            &ident.labels,
            &mut violations,
        );
    }
    let mut seen = HashSet::new();
    for img in images {
        if !seen.insert(img.image_id.as_str()) {
            violations.push(Violation::DuplicateImage {
                image_id: img.image_id.clone(),
            });
        }
        if !ids.contains(img.identity_id.as_str()) {
            violations.push(Violation::DanglingIdentity {
                image_id: img.image_id.clone(),
                identity_id: img.identity_id.clone(),
            });
        }
        check_labels(schema, Scope::Image, &img.image_id, &img.labels, &mut violations);
    }
    ValidationReport { violations }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairError {
    #[error("pair `{pair_id}` references unknown image `{image_id}`")]
    UnknownImage { pair_id: String, image_id: String },
    #[error("pair `{0}` pairs an image with itself")]
    SameImage(String),
    #[error("positive pair `{0}` spans two identities")]
    PositiveAcrossIdentities(String),
    #[error("negative pair `{0}` is a single identity")]
    NegativeSameIdentity(String),
}

/// A validated dataset with per-image keys precomputed.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: AttributeSchema,
    images: Vec<ImageRecord>,
    identities: Vec<IdentityRecord>,
    image_index: HashMap<String, u32>,
    image_identity: Vec<u32>,
    identity_group: Vec<GroupKey>,
    /// Legitimate value indices per image, `legitimate().len()` per row.
    profiles: Vec<u16>,
}

impl Dataset {
    pub fn new(
        schema: AttributeSchema,
        images: Vec<ImageRecord>,
        identities: Vec<IdentityRecord>,
    ) -> Result<Self, ValidationReport> {
        let report = validate_dataset(&schema, &images, &identities);
        if !report.is_empty() {
            return Err(report);
        }
        let identity_index: HashMap<&str, u32> = identities
            .iter()
            .enumerate()
            .map(|(i, r)| (r.identity_id.as_str(), i as u32))
            .collect();
        let identity_group = identities
            .iter()
            .map(|r| {
                let idx: Vec<usize> = schema
                    .protected()
                    .iter()
                    .map(|&a| {
                        let def = &schema.attributes()[a];
                        def.value_index(&r.labels[&def.name]).expect("validated")
                    })
                    .collect();
                schema.group_key(&idx)
            })
            .collect();
        let image_identity: Vec<u32> = images
            .iter()
            .map(|img| identity_index[img.identity_id.as_str()])
            .collect();
        let mut profiles = Vec::with_capacity(images.len() * schema.legitimate().len());
        for (img, &ident) in images.iter().zip(&image_identity) {
            for &a in schema.legitimate() {
                let def = &schema.attributes()[a];
                let value = match def.scope {
                    Scope::Image => &img.labels[&def.name],
                    Scope::Identity => &identities[ident as usize].labels[&def.name],
                };
                profiles.push(def.value_index(value).expect("validated") as u16);
            }
        }
        let image_index = images
            .iter()
            .enumerate()
            .map(|(i, r)| (r.image_id.clone(), i as u32))
            .collect();
        Ok(Self {
            schema,
            images,
            identities,
            image_index,
            image_identity,
            identity_group,
            profiles,
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn identities(&self) -> &[IdentityRecord] {
        &self.identities
    }

    pub fn image_position(&self, image_id: &str) -> Option<usize> {
        self.image_index.get(image_id).map(|&i| i as usize)
    }

    /// Identity position of the image at `image`.
    pub fn identity_of(&self, image: usize) -> usize {
        self.image_identity[image] as usize
    }

    pub fn identity_group(&self, identity: usize) -> GroupKey {
        self.identity_group[identity]
    }

    pub fn image_group(&self, image: usize) -> GroupKey {
        self.identity_group[self.identity_of(image)]
    }

    pub fn profile(&self, image: usize) -> &[u16] {
        let w = self.schema.legitimate().len();
        &self.profiles[image * w..(image + 1) * w]
    }

    pub fn combo_of(&self, a: usize, b: usize) -> ComboKey {
        self.schema.combo_key(self.profile(a), self.profile(b))
    }

    pub fn group_of(&self, a: usize, b: usize) -> PairGroup {
        let (ga, gb) = (self.image_group(a), self.image_group(b));
        if ga == gb {
            PairGroup::Group(ga)
        } else {
            PairGroup::Mixed
        }
    }

    /// Builds a pair record, deriving its group and combo keys and checking
    /// the polarity against the identities.
    pub fn resolve_pair(
        &self,
        pair_id: &str,
        image_a: &str,
        image_b: &str,
        polarity: Polarity,
    ) -> Result<VerificationPair, PairError> {
        let lookup = |id: &str| {
            self.image_position(id).ok_or_else(|| PairError::UnknownImage {
                pair_id: pair_id.into(),
                image_id: id.into(),
            })
        };
        let (a, b) = (lookup(image_a)?, lookup(image_b)?);
        if a == b {
            return Err(PairError::SameImage(pair_id.into()));
        }
        let same = self.identity_of(a) == self.identity_of(b);
        match polarity {
            Polarity::Positive if !same => return Err(PairError::PositiveAcrossIdentities(pair_id.into())),
            Polarity::Negative if same => return Err(PairError::NegativeSameIdentity(pair_id.into())),
            _ => {}
        }
        Ok(VerificationPair {
            pair_id: pair_id.into(),
            image_a: image_a.into(),
            image_b: image_b.into(),
            polarity,
            group: self.group_of(a, b),
            combo: self.combo_of(a, b),
        })
    }
}
