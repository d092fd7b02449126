//! Attribute universe and variable roles.
//!
//! Every attribute carries a designation that places it in the fixed causal
//! diagram used for evaluation: protected attributes act directly on the
//! verifier output, legitimate attributes are conditioned on, and proxy
//! attributes are marginalized out. Only the designations are configurable;
//! the shape of the diagram is not.

mod dataset;
mod keys;

pub use dataset::{validate_dataset, Dataset, IdentityRecord, ImageRecord, PairError, ValidationReport, Violation};
pub use keys::{ComboKey, GroupKey, PairGroup};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters that are reserved by the key label encodings.
const RESERVED: &[char] = &['-', '/', ';', '=', ',', '|', '"'];

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("attribute `{0}` must declare at least two values")]
    TooFewValues(String),
    #[error("attribute `{attribute}` declares value `{value}` twice")]
    DuplicateValue { attribute: String, value: String },
    #[error("invalid name `{0}`: must be non-empty and avoid whitespace and the characters - / ; = , | \"")]
    InvalidName(String),
    #[error("schema needs at least one protected attribute")]
    NoProtected,
    #[error("schema needs at least one legitimate attribute")]
    NoLegitimate,
    #[error("protected attribute `{0}` must be identity-scoped")]
    ProtectedImageScope(String),
    #[error("attribute `{attribute}`: raw label `{raw}` maps to unknown value `{value}`")]
    BadRawMapping {
        attribute: String,
        raw: String,
        value: String,
    },
    #[error("attribute `{0}`: {1}")]
    BadRule(String, String),
    #[error("key space too large ({0} keys)")]
    KeySpaceOverflow(u64),
    #[error("cannot read schema file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse schema file: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Designation {
    Protected,
    Legitimate,
    Proxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Identity,
    Image,
}

/// How raw annotator labels for an attribute turn into a final value.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelRule<'a> {
    /// Raw label is mapped through `raw` (or taken verbatim) and majority-voted.
    Categorical,
    /// Raw label is an age in years; calibrated estimates are averaged and
    /// thresholded. `values[i]` covers ages below `thresholds[i]`.
    Age { thresholds: &'a [f64] },
    /// Raw label is `WIDTHxHEIGHT`; first value iff both sides exceed `min_side`.
    BoundingBox { min_side: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub values: Vec<String>,
    pub designation: Designation,
    pub scope: Scope,
    /// Raw annotator label -> final value.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_thresholds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox_min_side: Option<u32>,
}

impl AttributeDef {
    pub fn new(name: &str, values: &[&str], designation: Designation, scope: Scope) -> Self {
        Self {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
            designation,
            scope,
            raw: BTreeMap::new(),
            age_thresholds: None,
            bbox_min_side: None,
        }
    }

    pub fn with_raw(mut self, pairs: &[(&str, &str)]) -> Self {
        self.raw = pairs.iter().map(|(r, v)| (r.to_string(), v.to_string())).collect();
        self
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }

    pub fn label_rule(&self) -> LabelRule<'_> {
        if let Some(t) = &self.age_thresholds {
            LabelRule::Age { thresholds: t }
        } else if let Some(min_side) = self.bbox_min_side {
            LabelRule::BoundingBox { min_side }
        } else {
            LabelRule::Categorical
        }
    }

    /// Maps a raw categorical label to its final value index.
    pub fn map_raw(&self, raw: &str) -> Option<usize> {
        match self.raw.get(raw) {
            Some(v) => self.value_index(v),
            None => self.value_index(raw),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    #[serde(rename = "attribute")]
    attributes: Vec<AttributeDef>,
}

/// Validated attribute schema with precomputed key layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    attributes: Vec<AttributeDef>,
    protected: Vec<usize>,
    legitimate: Vec<usize>,
    group_count: u32,
    combo_count: u32,
}

fn check_name(name: &str) -> Result<(), SchemaError> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c)) {
        return Err(SchemaError::InvalidName(name.to_string()));
    }
    Ok(())
}

/// Number of unordered pairs (with repetition) over `n` values.
pub(crate) fn unordered_pairs(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of the sorted pair `(i, j)`, `i <= j`, in the order
/// (0,0), (0,1), .., (0,n-1), (1,1), ...
pub(crate) fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i <= j && j < n);
    // pairs whose first element is below i: sum over k < i of (n - k)
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

pub(crate) fn pair_from_index(mut idx: usize, n: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i;
        if idx < row {
            return (i, i + idx);
        }
        idx -= row;
    }
    panic!("pair index out of range");
}

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self, SchemaError> {
        let mut seen = HashSet::new();
        for a in &attributes {
            check_name(&a.name)?;
            if !seen.insert(a.name.as_str()) {
                return Err(SchemaError::DuplicateAttribute(a.name.clone()));
            }
            if a.values.len() < 2 {
                return Err(SchemaError::TooFewValues(a.name.clone()));
            }
            let mut vals = HashSet::new();
            for v in &a.values {
                check_name(v)?;
                if !vals.insert(v.as_str()) {
                    return Err(SchemaError::DuplicateValue {
                        attribute: a.name.clone(),
                        value: v.clone(),
                    });
                }
            }
            if a.designation == Designation::Protected && a.scope != Scope::Identity {
                return Err(SchemaError::ProtectedImageScope(a.name.clone()));
            }
            for (raw, v) in &a.raw {
                if a.value_index(v).is_none() {
                    return Err(SchemaError::BadRawMapping {
                        attribute: a.name.clone(),
                        raw: raw.clone(),
                        value: v.clone(),
                    });
                }
            }
            if a.age_thresholds.is_some() && a.bbox_min_side.is_some() {
                return Err(SchemaError::BadRule(
                    a.name.clone(),
                    "age_thresholds and bbox_min_side are exclusive".into(),
                ));
            }
            if let Some(t) = &a.age_thresholds {
                if t.len() + 1 != a.values.len() {
                    return Err(SchemaError::BadRule(
                        a.name.clone(),
                        "age_thresholds must have one entry fewer than values".into(),
                    ));
                }
                if t.iter().any(|x| !x.is_finite()) || t.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SchemaError::BadRule(
                        a.name.clone(),
                        "age_thresholds must be finite and strictly increasing".into(),
                    ));
                }
            }
            if a.bbox_min_side.is_some() && a.values.len() != 2 {
                return Err(SchemaError::BadRule(
                    a.name.clone(),
                    "bounding-box attributes take exactly two values (big, small)".into(),
                ));
            }
        }
        let protected: Vec<usize> = (0..attributes.len())
            .filter(|&i| attributes[i].designation == Designation::Protected)
            .collect();
        let legitimate: Vec<usize> = (0..attributes.len())
            .filter(|&i| attributes[i].designation == Designation::Legitimate)
            .collect();
        if protected.is_empty() {
            return Err(SchemaError::NoProtected);
        }
        if legitimate.is_empty() {
            return Err(SchemaError::NoLegitimate);
        }
        let group_count = protected
            .iter()
            .map(|&i| attributes[i].values.len() as u64)
            .product::<u64>();
        let combo_count = legitimate
            .iter()
            .map(|&i| unordered_pairs(attributes[i].values.len()) as u64)
            .product::<u64>();
        for count in [group_count, combo_count] {
            if count > u32::MAX as u64 / 2 {
                return Err(SchemaError::KeySpaceOverflow(count));
            }
        }
        Ok(Self {
            attributes,
            protected,
            legitimate,
            group_count: group_count as u32,
            combo_count: combo_count as u32,
        })
    }

    /// The challenge schema: gender and skin colour protected, five
    /// image-level legitimate attributes, no proxies.
    pub fn challenge_default() -> Self {
        use Designation::*;
        use Scope::*;
        let mut age = AttributeDef::new("age_group", &["A0", "A1", "A2"], Legitimate, Image);
        age.age_thresholds = Some(vec![35.0, 65.0]);
        let mut bbox = AttributeDef::new("bbox", &["big", "small"], Legitimate, Image);
        bbox.bbox_min_side = Some(224);
        let attrs = vec![
            AttributeDef::new("gender", &["male", "female"], Protected, Identity),
            AttributeDef::new("skin", &["light", "dark"], Protected, Identity).with_raw(&[
                ("I", "light"),
                ("II", "light"),
                ("III", "light"),
                ("IV", "dark"),
                ("V", "dark"),
                ("VI", "dark"),
            ]),
            age,
            AttributeDef::new("pose", &["frontal", "other"], Legitimate, Image).with_raw(&[
                ("front", "frontal"),
                ("front-left", "frontal"),
                ("front-right", "frontal"),
                ("left", "other"),
                ("right", "other"),
                ("back-left", "other"),
                ("back-right", "other"),
                ("back", "other"),
            ]),
            AttributeDef::new("source", &["still", "frame"], Legitimate, Image),
            AttributeDef::new("glasses", &["G0", "G1"], Legitimate, Image).with_raw(&[
                ("none", "G0"),
                ("transparent", "G1"),
                ("sunglasses", "G1"),
            ]),
            bbox,
        ];
        Self::new(attrs).expect("built-in schema is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SchemaError> {
        let file: SchemaFile = toml::from_str(text)?;
        Self::new(file.attributes)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SchemaFile {
            attributes: self.attributes.clone(),
        };
        toml::to_string(&file).expect("schema serializes")
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Attribute indices of the protected attributes, in schema order.
    pub fn protected(&self) -> &[usize] {
        &self.protected
    }

    /// Attribute indices of the legitimate attributes, in schema order.
    pub fn legitimate(&self) -> &[usize] {
        &self.legitimate
    }

    pub fn scoped(&self, scope: Scope) -> impl Iterator<Item = &AttributeDef> {
        self.attributes.iter().filter(move |a| a.scope == scope)
    }

    pub fn group_count(&self) -> u32 {
        self.group_count
    }

    pub fn combo_space_size(&self) -> u32 {
        self.combo_count
    }

    /// Group key from value indices of the protected attributes (schema order).
    pub fn group_key(&self, values: &[usize]) -> GroupKey {
        debug_assert_eq!(values.len(), self.protected.len());
        let mut code = 0u32;
        for (&attr, &v) in self.protected.iter().zip(values) {
            code = code * self.attributes[attr].values.len() as u32 + v as u32;
        }
        GroupKey(code)
    }

    pub fn group_value_indices(&self, key: GroupKey) -> Vec<usize> {
        let mut code = key.0;
        let mut out = vec![0; self.protected.len()];
        for (slot, &attr) in self.protected.iter().enumerate().rev() {
            let n = self.attributes[attr].values.len() as u32;
            out[slot] = (code % n) as usize;
            code /= n;
        }
        out
    }

    pub fn group_values(&self, key: GroupKey) -> Vec<&str> {
        self.group_value_indices(key)
            .into_iter()
            .zip(&self.protected)
            .map(|(v, &attr)| self.attributes[attr].values[v].as_str())
            .collect()
    }

    /// `male/light` style label.
    pub fn group_label(&self, key: GroupKey) -> String {
        self.group_values(key).join("/")
    }

    pub fn parse_group_label(&self, label: &str) -> Option<GroupKey> {
        let parts: Vec<&str> = label.split('/').collect();
        if parts.len() != self.protected.len() {
            return None;
        }
        let mut idx = Vec::with_capacity(parts.len());
        for (p, &attr) in parts.iter().zip(&self.protected) {
            idx.push(self.attributes[attr].value_index(p)?);
        }
        Some(self.group_key(&idx))
    }

    pub fn groups(&self) -> impl Iterator<Item = GroupKey> {
        (0..self.group_count).map(GroupKey)
    }

    /// Canonical combo key for two legitimate-value profiles (value indices
    /// of the legitimate attributes in schema order). Symmetric in its
    /// arguments.
    pub fn combo_key(&self, a: &[u16], b: &[u16]) -> ComboKey {
        debug_assert_eq!(a.len(), self.legitimate.len());
        debug_assert_eq!(b.len(), self.legitimate.len());
        let mut code = 0u32;
        for ((&attr, &x), &y) in self.legitimate.iter().zip(a).zip(b) {
            let n = self.attributes[attr].values.len();
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            code = code * unordered_pairs(n) as u32 + pair_index(lo as usize, hi as usize, n) as u32;
        }
        ComboKey(code)
    }

    /// Per legitimate attribute, the sorted value-index pair encoded by `key`.
    pub fn combo_pairs(&self, key: ComboKey) -> Vec<(usize, usize)> {
        let mut code = key.0;
        let mut out = vec![(0, 0); self.legitimate.len()];
        for (slot, &attr) in self.legitimate.iter().enumerate().rev() {
            let n = self.attributes[attr].values.len();
            let m = unordered_pairs(n) as u32;
            out[slot] = pair_from_index((code % m) as usize, n);
            code /= m;
        }
        out
    }

    /// Component of `key` for the legitimate attribute at position `slot`.
    pub fn combo_component(&self, key: ComboKey, slot: usize) -> (usize, usize) {
        self.combo_pairs(key)[slot]
    }

    /// `age_group=A0-A1;pose=frontal-frontal;...` style label.
    pub fn combo_label(&self, key: ComboKey) -> String {
        self.combo_pairs(key)
            .into_iter()
            .zip(&self.legitimate)
            .map(|((i, j), &attr)| {
                let a = &self.attributes[attr];
                format!("{}={}-{}", a.name, a.values[i], a.values[j])
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse_combo_label(&self, label: &str) -> Option<ComboKey> {
        let parts: Vec<&str> = label.split(';').collect();
        if parts.len() != self.legitimate.len() {
            return None;
        }
        let mut a = Vec::with_capacity(parts.len());
        let mut b = Vec::with_capacity(parts.len());
        for (part, &attr) in parts.iter().zip(&self.legitimate) {
            let def = &self.attributes[attr];
            let (name, pair) = part.split_once('=')?;
            if name != def.name {
                return None;
            }
            let (x, y) = pair.split_once('-')?;
            a.push(def.value_index(x)? as u16);
            b.push(def.value_index(y)? as u16);
        }
        Some(self.combo_key(&a, &b))
    }

    /// Label of one unordered value pair, e.g. `G0-G1`.
    pub fn pair_label(&self, attr: usize, pair: (usize, usize)) -> String {
        let a = &self.attributes[attr];
        format!("{}-{}", a.values[pair.0], a.values[pair.1])
    }
}

impl fmt::Display for Designation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Designation::Protected => "protected",
            Designation::Legitimate => "legitimate",
            Designation::Proxy => "proxy",
        };
        f.write_str(s)
    }
}
