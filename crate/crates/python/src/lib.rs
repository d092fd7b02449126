//! Python bindings: schema, datasets, pair generation, evaluation and
//! leaderboards. Files use the same CSV formats as the command-line tool.

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use fairverify_core::analysis::avg_discrimination_by_group;
use fairverify_core::io::{self, IoError, PairRow};
use fairverify_core::metrics::{self, ComboDenominator, EvalConfig, EvaluationReport, ReportSummary, ScoreSet};
use fairverify_core::pairgen::{self, PairGenOptions, Polarity};
use fairverify_core::ranking::{self, Direction, LeaderboardOptions};
use fairverify_core::schema::AttributeSchema;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: IoError) -> PyErr {
    match e {
        IoError::File { .. } | IoError::Io(_) => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn parse_polarity(s: &str) -> PyResult<Polarity> {
    s.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown polarity `{s}`")))
}

/// Attribute schema: protected and legitimate attributes with their values.
#[pyclass(name = "Schema", module = "fairverify", frozen)]
struct PySchema {
    inner: AttributeSchema,
}

#[pymethods]
impl PySchema {
    /// The built-in challenge schema.
    #[new]
    fn new() -> Self {
        Self {
            inner: AttributeSchema::challenge_default(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: AttributeSchema::from_toml_str(text).map_err(value_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Attribute names in schema order.
    #[getter]
    fn attributes(&self) -> Vec<String> {
        self.inner.attributes().iter().map(|a| a.name.clone()).collect()
    }

    /// Protected group labels such as `male/dark`, in key order.
    #[getter]
    fn groups(&self) -> Vec<String> {
        (0..self.inner.group_count())
            .map(|k| self.inner.group_label(fairverify_core::schema::GroupKey(k)))
            .collect()
    }

    #[getter]
    fn combo_space_size(&self) -> u32 {
        self.inner.combo_space_size()
    }
}

/// A validated dataset loaded from images and identities CSV files.
#[pyclass(name = "Dataset", module = "fairverify", frozen)]
struct PyDataset {
    inner: fairverify_core::schema::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (images, identities, schema=None))]
    fn new(images: &str, identities: &str, schema: Option<&PySchema>) -> PyResult<Self> {
        let schema = schema.map_or_else(AttributeSchema::challenge_default, |s| s.inner.clone());
        let inner = match io::load_dataset(schema, images, identities) {
            Ok(d) => d,
            Err(IoError::Validation(report)) => {
                let lines: Vec<String> = report.violations.iter().take(10).map(|v| v.to_string()).collect();
                return Err(PyValueError::new_err(format!(
                    "dataset failed validation with {} violation(s):\n{}",
                    report.violations.len(),
                    lines.join("\n")
                )));
            }
            Err(e) => return Err(io_err(e)),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn n_images(&self) -> usize {
        self.inner.images().len()
    }

    #[getter]
    fn n_identities(&self) -> usize {
        self.inner.identities().len()
    }

    fn __len__(&self) -> usize {
        self.inner.images().len()
    }
}

/// One evaluated submission.
#[pyclass(name = "Report", module = "fairverify", frozen)]
struct PyReport {
    inner: EvaluationReport,
    schema: AttributeSchema,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn submission_id(&self) -> &str {
        &self.inner.submission_id
    }

    #[getter]
    fn accuracy(&self) -> f64 {
        self.inner.accuracy
    }

    #[getter]
    fn bias_positive(&self) -> f64 {
        self.inner.bias_positive
    }

    #[getter]
    fn bias_negative(&self) -> f64 {
        self.inner.bias_negative
    }

    /// Average discrimination per protected group for `positive` or
    /// `negative` pairs.
    fn group_discrimination(&self, polarity: &str) -> PyResult<HashMap<String, f64>> {
        let table = &self.inner.polarity(parse_polarity(polarity)?).discrimination;
        Ok(avg_discrimination_by_group(table)
            .into_iter()
            .map(|(g, v)| (self.schema.group_label(g), v))
            .collect())
    }

    /// The report in the same JSON form `fairverify evaluate` writes.
    fn to_json(&self) -> String {
        self.inner.to_json(&self.schema)
    }

    #[staticmethod]
    #[pyo3(signature = (text, schema=None))]
    fn from_json(text: &str, schema: Option<&PySchema>) -> PyResult<Self> {
        let schema = schema.map_or_else(AttributeSchema::challenge_default, |s| s.inner.clone());
        let inner = EvaluationReport::from_json(&schema, text).map_err(value_err)?;
        Ok(Self { inner, schema })
    }

    fn __repr__(&self) -> String {
        format!(
            "Report({:?}, accuracy={:.6}, bias_positive={:.6}, bias_negative={:.6})",
            self.inner.submission_id, self.inner.accuracy, self.inner.bias_positive, self.inner.bias_negative
        )
    }
}

/// AUC of positive against negative scores, ties counting one half.
#[pyfunction]
fn auc(positive: Vec<f64>, negative: Vec<f64>) -> PyResult<f64> {
    metrics::auc(&positive, &negative).map_err(value_err)
}

/// Dense ranks starting at 1; smallest first unless `descending`.
#[pyfunction]
#[pyo3(signature = (values, descending=false))]
fn dense_rank(values: Vec<f64>, descending: bool) -> Vec<u32> {
    let dir = if descending {
        Direction::Descending
    } else {
        Direction::Ascending
    };
    ranking::dense_rank(&values, dir)
}

/// Balanced pairs as `(pair_id, image_a, image_b, polarity)` tuples.
#[pyfunction]
#[pyo3(signature = (dataset, positive, negative, seed=0, mixed_negatives=false))]
fn generate_pairs(
    dataset: &PyDataset,
    positive: usize,
    negative: usize,
    seed: u64,
    mixed_negatives: bool,
) -> Vec<(String, String, String, String)> {
    let out = pairgen::generate_pairs(
        &dataset.inner,
        positive,
        negative,
        seed,
        &PairGenOptions { mixed_negatives },
    );
    out.pairs
        .into_iter()
        .map(|p| (p.pair_id, p.image_a, p.image_b, p.polarity.as_str().to_string()))
        .collect()
}

/// Evaluates `scores` (pair id -> score) on `pairs`
/// (`(pair_id, image_a, image_b, polarity)` tuples).
#[pyfunction]
#[pyo3(signature = (dataset, pairs, scores, submission_id="submission", min_pairs=1, combo_denominator="per-group"))]
fn evaluate(
    dataset: &PyDataset,
    pairs: Vec<(String, String, String, String)>,
    scores: HashMap<String, f64>,
    submission_id: &str,
    min_pairs: usize,
    combo_denominator: &str,
) -> PyResult<PyReport> {
    if min_pairs == 0 {
        return Err(PyValueError::new_err("min_pairs must be at least 1"));
    }
    let rows: Vec<PairRow> = pairs
        .into_iter()
        .map(|(pair_id, image_a, image_b, polarity)| PairRow {
            pair_id,
            image_a,
            image_b,
            polarity,
        })
        .collect();
    let pairs = io::resolve_pairs(&dataset.inner, &rows).map_err(io_err)?;
    let mut scores: Vec<(String, f64)> = scores.into_iter().collect();
    scores.sort_by(|a, b| a.0.cmp(&b.0));
    let scores = ScoreSet::new(submission_id, scores).map_err(value_err)?;
    let config = EvalConfig {
        min_pairs,
        combo_denominator: combo_denominator
            .parse::<ComboDenominator>()
            .map_err(PyValueError::new_err)?,
    };
    let inner = metrics::evaluate(&pairs, &scores, &config).map_err(value_err)?;
    Ok(PyReport {
        inner,
        schema: dataset.inner.schema().clone(),
    })
}

/// Leaderboard rows (dicts) for `reports` ranked together with `baseline`.
#[pyfunction]
#[pyo3(signature = (reports, baseline, precision=Some(6)))]
fn leaderboard(
    py: Python<'_>,
    reports: Vec<PyRef<'_, PyReport>>,
    baseline: PyRef<'_, PyReport>,
    precision: Option<u32>,
) -> PyResult<Vec<Py<PyAny>>> {
    let summaries: Vec<ReportSummary> = reports.iter().map(|r| ReportSummary::from(&r.inner)).collect();
    let base = ReportSummary::from(&baseline.inner);
    let board = ranking::build_leaderboard(&summaries, &base, &LeaderboardOptions { precision });
    let json = py.import("json")?;
    board
        .iter()
        .map(|e| {
            let text = serde_json::to_string(e).map_err(value_err)?;
            Ok(json.call_method1("loads", (text,))?.unbind())
        })
        .collect()
}

#[pymodule]
fn fairverify(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchema>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(dense_rank, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(leaderboard, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
