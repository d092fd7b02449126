//! CSV exchange formats. Every file is UTF-8, comma separated, with a header
//! row:
//!
//! | file        | columns                                                    |
//! |-------------|------------------------------------------------------------|
//! | images      | `image_id, identity_id`, one column per image attribute    |
//! | identities  | `identity_id`, one column per identity attribute           |
//! | pairs       | `pair_id, image_a, image_b, polarity`                      |
//! | scores      | `pair_id, score`                                           |
//! | votes       | `annotator_id, target_id, attribute, value`                |
//! | known ages  | `annotator_id, age_annotated, age_true`                    |
//! | image index | `image_id, identity_id`                                    |
//!
//! Attribute columns are written in schema order. Group and combo keys are
//! never stored; they are derived from the dataset when pairs are loaded.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotatorVote, KnownAge};
use crate::metrics::{MetricsError, ScoreSet};
use crate::pairgen::{Polarity, VerificationPair};
use crate::schema::{AttributeSchema, Dataset, IdentityRecord, ImageRecord, PairError, Scope, ValidationReport};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: `{value}` is not a valid {what}")]
    BadValue {
        row: usize,
        what: &'static str,
        value: String,
    },
    #[error("pair id `{0}` appears twice")]
    DuplicatePair(String),
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("dataset failed validation:\n{0}")]
    Validation(ValidationReport),
}

/// Opens `path` for reading, naming it in the error.
pub fn open(path: impl AsRef<Path>) -> Result<File, IoError> {
    let path = path.as_ref();
    File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Creates (or truncates) `path`, naming it in the error.
pub fn create(path: impl AsRef<Path>) -> Result<File, IoError> {
    let path = path.as_ref();
    File::create(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IoError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IoError::MissingColumn(name.into()))
}

/// Labels from every non-id column; blank cells are left out so validation
/// reports them as missing.
fn labels(headers: &csv::StringRecord, row: &csv::StringRecord, ids: &[usize]) -> BTreeMap<String, String> {
    headers
        .iter()
        .zip(row.iter())
        .enumerate()
        .filter(|(i, (_, v))| !ids.contains(i) && !v.is_empty())
        .map(|(_, (h, v))| (h.to_string(), v.to_string()))
        .collect()
}

pub fn read_images<R: Read>(r: R) -> Result<Vec<ImageRecord>, IoError> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let (img, ident) = (column(&headers, "image_id")?, column(&headers, "identity_id")?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(ImageRecord {
            image_id: row[img].to_string(),
            identity_id: row[ident].to_string(),
            labels: labels(&headers, &row, &[img, ident]),
        });
    }
    Ok(out)
}

pub fn read_identities<R: Read>(r: R) -> Result<Vec<IdentityRecord>, IoError> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let ident = column(&headers, "identity_id")?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(IdentityRecord {
            identity_id: row[ident].to_string(),
            labels: labels(&headers, &row, &[ident]),
        });
    }
    Ok(out)
}

fn scoped_names(schema: &AttributeSchema, scope: Scope) -> Vec<&str> {
    schema.scoped(scope).map(|a| a.name.as_str()).collect()
}

pub fn write_images<W: Write>(w: W, schema: &AttributeSchema, images: &[ImageRecord]) -> Result<(), IoError> {
    let names = scoped_names(schema, Scope::Image);
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["image_id", "identity_id"];
    header.extend(&names);
    wtr.write_record(&header)?;
    for im in images {
        let mut row = vec![im.image_id.as_str(), im.identity_id.as_str()];
        row.extend(names.iter().map(|n| im.labels.get(*n).map_or("", String::as_str)));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_identities<W: Write>(
    w: W,
    schema: &AttributeSchema,
    identities: &[IdentityRecord],
) -> Result<(), IoError> {
    let names = scoped_names(schema, Scope::Identity);
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["identity_id"];
    header.extend(&names);
    wtr.write_record(&header)?;
    for id in identities {
        let mut row = vec![id.identity_id.as_str()];
        row.extend(names.iter().map(|n| id.labels.get(*n).map_or("", String::as_str)));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads and validates an images/identities file pair.
pub fn load_dataset(
    schema: AttributeSchema,
    images: impl AsRef<Path>,
    identities: impl AsRef<Path>,
) -> Result<Dataset, IoError> {
    let images = read_images(open(images)?)?;
    let identities = read_identities(open(identities)?)?;
    Dataset::new(schema, images, identities).map_err(IoError::Validation)
}

/// A pairs-file row before its keys are derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRow {
    pub pair_id: String,
    pub image_a: String,
    pub image_b: String,
    pub polarity: String,
}

pub fn read_pair_rows<R: Read>(r: R) -> Result<Vec<PairRow>, IoError> {
    Ok(reader(r).deserialize().collect::<Result<_, _>>()?)
}

/// Checks polarities and pair ids and derives every pair's group and combo.
pub fn resolve_pairs(dataset: &Dataset, rows: &[PairRow]) -> Result<Vec<VerificationPair>, IoError> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let polarity: Polarity = row.polarity.parse().map_err(|_| IoError::BadValue {
            row: i + 1,
            what: "polarity",
            value: row.polarity.clone(),
        })?;
        if !seen.insert(row.pair_id.as_str()) {
            return Err(IoError::DuplicatePair(row.pair_id.clone()));
        }
        out.push(dataset.resolve_pair(&row.pair_id, &row.image_a, &row.image_b, polarity)?);
    }
    Ok(out)
}

pub fn read_pairs<R: Read>(r: R, dataset: &Dataset) -> Result<Vec<VerificationPair>, IoError> {
    resolve_pairs(dataset, &read_pair_rows(r)?)
}

pub fn write_pairs<W: Write>(w: W, pairs: &[VerificationPair]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in pairs {
        wtr.serialize(PairRow {
            pair_id: p.pair_id.clone(),
            image_a: p.image_a.clone(),
            image_b: p.image_b.clone(),
            polarity: p.polarity.as_str().into(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    pair_id: String,
    score: String,
}

pub fn read_scores<R: Read>(r: R, submission_id: &str) -> Result<ScoreSet, IoError> {
    let mut rows = Vec::new();
    for (i, row) in reader(r).deserialize::<ScoreRow>().enumerate() {
        let row = row?;
        let score: f64 = row.score.parse().map_err(|_| IoError::BadValue {
            row: i + 1,
            what: "score",
            value: row.score.clone(),
        })?;
        rows.push((row.pair_id, score));
    }
    Ok(ScoreSet::new(submission_id, rows)?)
}

/// Writes scores in the given pair order; values use the shortest text that
/// reads back to the same float.
pub fn write_scores<W: Write>(w: W, scores: &[(String, f64)]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pair_id", "score"])?;
    for (id, s) in scores {
        wtr.write_record([id.as_str(), &format!("{s}")])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_votes<R: Read>(r: R) -> Result<Vec<AnnotatorVote>, IoError> {
    Ok(reader(r).deserialize().collect::<Result<_, _>>()?)
}

pub fn write_votes<W: Write>(w: W, votes: &[AnnotatorVote]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    for v in votes {
        wtr.serialize(v)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_known_ages<R: Read>(r: R) -> Result<Vec<KnownAge>, IoError> {
    Ok(reader(r).deserialize().collect::<Result<_, _>>()?)
}

pub fn write_known_ages<W: Write>(w: W, known: &[KnownAge]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    for k in known {
        wtr.serialize(k)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct IndexRow {
    image_id: String,
    identity_id: String,
}

pub fn read_image_index<R: Read>(r: R) -> Result<Vec<(String, String)>, IoError> {
    reader(r)
        .deserialize::<IndexRow>()
        .map(|row| {
            let row = row?;
            Ok((row.image_id, row.identity_id))
        })
        .collect()
}

pub fn write_image_index<W: Write>(w: W, index: &[(String, String)]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    for (image_id, identity_id) in index {
        wtr.serialize(IndexRow {
            image_id: image_id.clone(),
            identity_id: identity_id.clone(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}
