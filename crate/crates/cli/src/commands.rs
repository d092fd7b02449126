//! One function per subcommand.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use fairverify_core::analysis::{analyze_report, hardest_samples, AnalysisReport, PolarityAnalysis};
use fairverify_core::annotation::aggregate_labels;
use fairverify_core::io::{self, IoError};
use fairverify_core::metrics::{self, ComboDenominator, EvalConfig, EvaluationReport, MetricsError, ReportSummary};
use fairverify_core::pairgen::{enumerate_feasible_combos, generate_pairs, PairGenOptions, Polarity};
use fairverify_core::ranking::{build_leaderboard, render_text, LeaderboardEntry, LeaderboardOptions};
use fairverify_core::schema::{AttributeSchema, Dataset, ValidationReport};
use fairverify_core::synth::{generate_dataset, generate_score_rows, SynthConfig};

use crate::manifest::Run;
use crate::{DatasetArgs, SchemaArg, CONFIG_DIR_VAR};

/// Input data failed validation; maps to exit code 3.
#[derive(Debug)]
pub struct ValidationFailure(pub String);

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailure {}

/// Writes `<dir>/<name>.validation.json` and returns the error pointing at it.
fn validation_failure(dir: &Path, name: &str, summary: &str, detail: serde_json::Value) -> anyhow::Error {
    let path = dir.join(format!("{name}.validation.json"));
    let body = json!({ "error": summary, "detail": detail });
    let written = std::fs::write(
        &path,
        format!("{}\n", serde_json::to_string_pretty(&body).unwrap_or_default()),
    );
    match written {
        Ok(()) => ValidationFailure(format!("{summary} (report: {})", path.display())).into(),
        Err(_) => ValidationFailure(summary.to_string()).into(),
    }
}

fn is_validation(err: &IoError) -> bool {
    !matches!(err, IoError::File { .. } | IoError::Io(_))
}

/// Config files are looked up as given, then in the config directory.
fn resolve_config(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
        let candidate = Path::new(&dir).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}

fn load_schema(arg: &SchemaArg, run: &mut Run) -> Result<AttributeSchema> {
    let path = match &arg.schema {
        Some(p) => Some(resolve_config(p)),
        None => std::env::var_os(CONFIG_DIR_VAR)
            .map(|d| Path::new(&d).join("schema.toml"))
            .filter(|p| p.exists()),
    };
    match path {
        Some(p) => {
            let schema = AttributeSchema::from_file(&p).with_context(|| format!("loading schema {}", p.display()))?;
            run.input(p);
            Ok(schema)
        }
        None => Ok(AttributeSchema::challenge_default()),
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn load_dataset(schema: AttributeSchema, args: &DatasetArgs, out: &Path, name: &str, run: &mut Run) -> Result<Dataset> {
    run.input(&args.images);
    run.input(&args.identities);
    match io::load_dataset(schema, &args.images, &args.identities) {
        Ok(d) => Ok(d),
        Err(IoError::Validation(report)) => Err(dataset_failure(out, name, &report)),
        Err(e) => Err(e).context("loading dataset"),
    }
}

fn dataset_failure(out: &Path, name: &str, report: &ValidationReport) -> anyhow::Error {
    for v in report.violations.iter().take(20) {
        eprintln!("  {v}");
    }
    let summary = format!(
        "dataset failed validation with {} violation(s)",
        report.violations.len()
    );
    validation_failure(out, name, &summary, serde_json::to_value(report).unwrap_or_default())
}

fn load_pairs(
    dataset: &Dataset,
    path: &Path,
    out: &Path,
    name: &str,
    run: &mut Run,
) -> Result<Vec<fairverify_core::pairgen::VerificationPair>> {
    run.input(path);
    let file = io::open(path)?;
    io::read_pairs(file, dataset).map_err(|e| {
        if is_validation(&e) {
            validation_failure(out, name, &format!("{}: {e}", path.display()), json!(null))
        } else {
            anyhow!(e)
        }
    })
}

fn load_scores(path: &Path, id: &str, out: &Path, name: &str, run: &mut Run) -> Result<metrics::ScoreSet> {
    run.input(path);
    let file = io::open(path)?;
    io::read_scores(file, id).map_err(|e| {
        if is_validation(&e) {
            validation_failure(out, name, &format!("{}: {e}", path.display()), json!(null))
        } else {
            anyhow!(e)
        }
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_with(path: &Path, f: impl FnOnce(std::fs::File) -> Result<(), IoError>) -> Result<()> {
    f(io::create(path)?).with_context(|| format!("writing {}", path.display()))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

// ---------------------------------------------------------------- aggregate

pub fn aggregate(
    schema_arg: &SchemaArg,
    votes_path: &Path,
    index_path: &Path,
    known_ages: Option<&Path>,
    out: &Path,
) -> Result<()> {
    create_dir(out)?;
    let mut run = Run::new(
        "aggregate",
        json!({
            "votes": path_str(votes_path),
            "image_index": path_str(index_path),
            "known_ages": known_ages.map(path_str),
        }),
    );
    let schema = load_schema(schema_arg, &mut run)?;
    run.input(votes_path);
    run.input(index_path);
    let votes = io::read_votes(io::open(votes_path)?).with_context(|| format!("reading {}", votes_path.display()))?;
    let index =
        io::read_image_index(io::open(index_path)?).with_context(|| format!("reading {}", index_path.display()))?;
    let known = match known_ages {
        Some(p) => {
            run.input(p);
            Some(io::read_known_ages(io::open(p)?).with_context(|| format!("reading {}", p.display()))?)
        }
        None => None,
    };
    let agg = aggregate_labels(&schema, &index, &votes, known.as_deref())
        .map_err(|e| validation_failure(out, "aggregate", &format!("label aggregation failed: {e}"), json!(null)))?;
    if let Err(report) = Dataset::new(schema.clone(), agg.images.clone(), agg.identities.clone()) {
        return Err(dataset_failure(out, "aggregate", &report));
    }
    for t in &agg.ties {
        eprintln!(
            "tie: `{}` {} -> {} (first value in schema order)",
            t.target_id, t.attribute, t.value
        );
    }
    let images = out.join("images.csv");
    let identities = out.join("identities.csv");
    let summary = out.join("aggregate.summary.json");
    write_with(&images, |f| io::write_images(f, &schema, &agg.images))?;
    write_with(&identities, |f| io::write_identities(f, &schema, &agg.identities))?;
    write_json(
        &summary,
        &json!({
            "images": agg.images.len(),
            "identities": agg.identities.len(),
            "ties": agg.ties,
            "age_calibrations": agg.calibrations,
        }),
    )?;
    for p in [images, identities, summary] {
        run.output(p);
    }
    run.write(out, "aggregate")?;
    eprintln!(
        "aggregated {} images and {} identities into {}",
        agg.images.len(),
        agg.identities.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- genpairs

pub fn genpairs(
    schema_arg: &SchemaArg,
    dataset: &DatasetArgs,
    positive: usize,
    negative: usize,
    seed: u64,
    mixed_negatives: bool,
    out: &Path,
) -> Result<()> {
    create_dir(out)?;
    let mut run = Run::new(
        "genpairs",
        json!({
            "images": path_str(&dataset.images),
            "identities": path_str(&dataset.identities),
            "positive": positive,
            "negative": negative,
            "seed": seed,
            "mixed_negatives": mixed_negatives,
        }),
    );
    let schema = load_schema(schema_arg, &mut run)?;
    let d = load_dataset(schema, dataset, out, "genpairs", &mut run)?;
    let opts = PairGenOptions { mixed_negatives };
    let generated = generate_pairs(&d, positive, negative, seed, &opts);
    let pairs_path = out.join("pairs.csv");
    write_with(&pairs_path, |f| io::write_pairs(f, &generated.pairs))?;

    let realized = |p: Polarity| {
        generated
            .pairs
            .iter()
            .filter(|x| x.polarity == p)
            .map(|x| x.combo)
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    };
    let count = |p: Polarity| generated.pairs.iter().filter(|x| x.polarity == p).count();
    if let Some(s) = generated.shortfall {
        eprintln!(
            "warning: dataset supports fewer pairs than requested ({} positive, {} negative missing)",
            s.positive_missing, s.negative_missing
        );
    }
    let summary_path = out.join("genpairs.summary.json");
    write_json(
        &summary_path,
        &json!({
            "positive": count(Polarity::Positive),
            "negative": count(Polarity::Negative),
            "positive_missing": generated.shortfall.map_or(0, |s| s.positive_missing),
            "negative_missing": generated.shortfall.map_or(0, |s| s.negative_missing),
            "feasible_positive_combos": enumerate_feasible_combos(&d, Polarity::Positive, &opts).len(),
            "feasible_negative_combos": enumerate_feasible_combos(&d, Polarity::Negative, &opts).len(),
            "positive_combos": realized(Polarity::Positive),
            "negative_combos": realized(Polarity::Negative),
        }),
    )?;
    run.output(pairs_path);
    run.output(summary_path);
    run.write(out, "genpairs")?;
    eprintln!("wrote {} pairs to {}", generated.pairs.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------- evaluate

fn submission_id_from(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for suffix in [".scores.csv", ".csv"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            return stem.to_string();
        }
    }
    name
}

fn check_submission_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !ok {
        bail!("submission id `{id}` must be non-empty ASCII letters, digits, `-`, `_` or `.`");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    schema_arg: &SchemaArg,
    dataset: &DatasetArgs,
    pairs_path: &Path,
    scores_path: &Path,
    submission_id: Option<String>,
    out: &Path,
    min_pairs: usize,
    combo_denominator: ComboDenominator,
) -> Result<()> {
    let id = submission_id.unwrap_or_else(|| submission_id_from(scores_path));
    check_submission_id(&id)?;
    if min_pairs == 0 {
        bail!("--min-pairs must be at least 1");
    }
    create_dir(out)?;
    let config = EvalConfig {
        min_pairs,
        combo_denominator,
    };
    let mut run = Run::new(
        "evaluate",
        json!({
            "submission_id": id,
            "images": path_str(&dataset.images),
            "identities": path_str(&dataset.identities),
            "pairs": path_str(pairs_path),
            "scores": path_str(scores_path),
            "eval": config,
        }),
    );
    let name = format!("evaluate-{id}");
    let schema = load_schema(schema_arg, &mut run)?;
    let d = load_dataset(schema.clone(), dataset, out, &name, &mut run)?;
    let pairs = load_pairs(&d, pairs_path, out, &name, &mut run)?;
    let scores = load_scores(scores_path, &id, out, &name, &mut run)?;
    let report = match metrics::evaluate(&pairs, &scores, &config) {
        Ok(r) => r,
        Err(MetricsError::MissingScores(ids)) => {
            for p in ids.iter().take(20) {
                eprintln!("  no score for pair `{p}`");
            }
            let summary = format!("{} pair(s) have no score", ids.len());
            return Err(validation_failure(
                out,
                &name,
                &summary,
                json!({ "missing_scores": ids }),
            ));
        }
        Err(e) => return Err(validation_failure(out, &name, &e.to_string(), json!(null))),
    };
    let report_path = out.join(format!("{id}.json"));
    std::fs::write(&report_path, report.to_json(&schema))
        .with_context(|| format!("writing {}", report_path.display()))?;
    run.output(&report_path);
    run.write(out, &name)?;
    eprintln!(
        "{id}: accuracy {:.6}, bias+ {:.6}, bias- {:.6} -> {}",
        report.accuracy,
        report.bias_positive,
        report.bias_negative,
        report_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- rank

fn is_report_file(path: &Path) -> bool {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.ends_with(".json")
        && !name.ends_with(".manifest.json")
        && !name.ends_with(".validation.json")
        && !name.ends_with(".summary.json")
        && !name.ends_with(".analysis.json")
        && name != "leaderboard.json"
}

fn read_summary(path: &Path) -> Result<ReportSummary> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ReportSummary::from_json(&text)
        .map_err(|e| ValidationFailure(format!("{}: not a report: {e}", path.display())).into())
}

#[derive(Serialize)]
struct LeaderboardDocument<'a> {
    baseline: &'a str,
    report_precision: u32,
    rank_precision: Option<u32>,
    entries: &'a [LeaderboardEntry],
}

pub fn rank(reports: &Path, baseline: &str, precision: u32, exact: bool, out: &Path) -> Result<()> {
    create_dir(out)?;
    let mut run = Run::new(
        "rank",
        json!({
            "reports": path_str(reports),
            "baseline": baseline,
            "report_precision": precision,
            "exact_ranks": exact,
        }),
    );
    let mut files: Vec<PathBuf> = std::fs::read_dir(reports)
        .with_context(|| format!("listing {}", reports.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_report_file(p))
        .collect();
    files.sort();
    let mut summaries: Vec<ReportSummary> = Vec::with_capacity(files.len());
    for f in &files {
        let s = read_summary(f)?;
        if summaries.iter().any(|x| x.submission_id == s.submission_id) {
            bail!(ValidationFailure(format!(
                "submission `{}` appears twice in {}",
                s.submission_id,
                reports.display()
            )));
        }
        summaries.push(s);
        run.input(f);
    }
    let baseline_path = Path::new(baseline);
    let base = if baseline_path.is_file() {
        if !files.iter().any(|f| f == baseline_path) {
            run.input(baseline_path);
        }
        read_summary(baseline_path)?
    } else {
        summaries
            .iter()
            .find(|s| s.submission_id == baseline)
            .cloned()
            .ok_or_else(|| {
                anyhow!(
                    "baseline `{baseline}` is neither a file nor a report in {}",
                    reports.display()
                )
            })?
    };
    let opts = LeaderboardOptions {
        precision: (!exact).then_some(precision),
    };
    let board = build_leaderboard(&summaries, &base, &opts);
    let text = render_text(&board, precision as usize);
    let json_path = out.join("leaderboard.json");
    let text_path = out.join("leaderboard.txt");
    write_json(
        &json_path,
        &LeaderboardDocument {
            baseline: &base.submission_id,
            report_precision: precision,
            rank_precision: opts.precision,
            entries: &board,
        },
    )?;
    std::fs::write(&text_path, &text).with_context(|| format!("writing {}", text_path.display()))?;
    run.output(json_path);
    run.output(text_path);
    run.write(out, "rank")?;
    print!("{text}");
    let excluded = board.iter().filter(|e| e.excluded.is_some()).count();
    if excluded > 0 {
        eprintln!("{excluded} submission(s) do not beat the baseline accuracy and are flagged as excluded");
    }
    Ok(())
}

// ---------------------------------------------------------------- analyze

pub struct AnalyzeInputs {
    pub pairs: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub identities: Option<PathBuf>,
}

fn render_analysis(a: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "submission: {}", a.submission_id);
    let sections: [(&str, &PolarityAnalysis); 2] = [("+", &a.positive), ("-", &a.negative)];
    for (sign, p) in sections {
        let _ = writeln!(
            out,
            "\n[{sign} pairs] average discrimination (x1e-4) and most-discriminated frequency"
        );
        for (avg, freq) in p.avg_discrimination.iter().zip(&p.most_discriminated_frequency) {
            let _ = writeln!(out, "  {:<16} {:>10.3} {:>8.3}", avg.group, avg.value * 1e4, freq.value);
        }
        let _ = writeln!(
            out,
            "[{sign} pairs] attribute impact (x1e-4): subset, combos, max (group), min (group)"
        );
        for r in &p.attribute_impact {
            let _ = writeln!(
                out,
                "  {:<10} {:<22} {:>5} {:>10.3} ({}) {:>10.3} ({})",
                r.attribute,
                r.subset,
                r.n_combos,
                r.max.value * 1e4,
                r.max.group,
                r.min.value * 1e4,
                r.min.group
            );
        }
    }
    if let Some(h) = &a.hardest {
        let _ = writeln!(out, "\nhardest positives (lowest scores)");
        for p in &h.positives {
            let _ = writeln!(out, "  {} {} {} {}", p.pair_id, p.image_a, p.image_b, p.score);
        }
        let _ = writeln!(out, "hardest negatives (highest scores)");
        for p in &h.negatives {
            let _ = writeln!(out, "  {} {} {} {}", p.pair_id, p.image_a, p.image_b, p.score);
        }
    }
    out
}

pub fn analyze(
    schema_arg: &SchemaArg,
    report_path: &Path,
    hardest: Option<usize>,
    inputs: AnalyzeInputs,
    out: &Path,
) -> Result<()> {
    create_dir(out)?;
    let mut run = Run::new(
        "analyze",
        json!({
            "report": path_str(report_path),
            "hardest": hardest,
            "pairs": inputs.pairs.as_deref().map(path_str),
            "scores": inputs.scores.as_deref().map(path_str),
        }),
    );
    let schema = load_schema(schema_arg, &mut run)?;
    run.input(report_path);
    let text = std::fs::read_to_string(report_path).with_context(|| format!("reading {}", report_path.display()))?;
    let report = EvaluationReport::from_json(&schema, &text)
        .map_err(|e| ValidationFailure(format!("{}: {e}", report_path.display())))?;
    let name = format!("analyze-{}", report.submission_id);
    let hard = match hardest {
        None => None,
        Some(k) => {
            let (Some(pairs), Some(scores), Some(images), Some(identities)) =
                (&inputs.pairs, &inputs.scores, &inputs.images, &inputs.identities)
            else {
                bail!("--hardest needs --pairs, --scores, --images and --identities");
            };
            let dataset = DatasetArgs {
                images: images.clone(),
                identities: identities.clone(),
            };
            let d = load_dataset(schema.clone(), &dataset, out, &name, &mut run)?;
            let pairs = load_pairs(&d, pairs, out, &name, &mut run)?;
            let scores = load_scores(scores, &report.submission_id, out, &name, &mut run)?;
            Some(hardest_samples(&pairs, &scores, k).map_err(|e| ValidationFailure(e.to_string()))?)
        }
    };
    let analysis = analyze_report(&schema, &report, hard);
    let json_path = out.join(format!("{}.analysis.json", report.submission_id));
    let text_path = out.join(format!("{}.analysis.txt", report.submission_id));
    write_json(&json_path, &analysis)?;
    std::fs::write(&text_path, render_analysis(&analysis))
        .with_context(|| format!("writing {}", text_path.display()))?;
    run.output(json_path);
    run.output(text_path);
    run.write(out, &name)?;
    eprintln!("analysis of {} written to {}", report.submission_id, out.display());
    Ok(())
}

// ---------------------------------------------------------------- synth

fn load_synth_config(path: &Path, seed: Option<u64>, run: &mut Run) -> Result<SynthConfig> {
    let path = resolve_config(path);
    let mut cfg = SynthConfig::from_file(&path).with_context(|| format!("loading synth config {}", path.display()))?;
    run.input(path);
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn synth_dataset(schema_arg: &SchemaArg, config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    create_dir(out)?;
    let mut run = Run::new("synth-dataset", json!({ "config": path_str(config), "seed": seed }));
    let schema = load_schema(schema_arg, &mut run)?;
    let cfg = load_synth_config(config, seed, &mut run)?;
    let (identities, images) = generate_dataset(&schema, &cfg).map_err(|e| ValidationFailure(e.to_string()))?;
    let images_path = out.join("images.csv");
    let identities_path = out.join("identities.csv");
    write_with(&images_path, |f| io::write_images(f, &schema, &images))?;
    write_with(&identities_path, |f| io::write_identities(f, &schema, &identities))?;
    run.output(images_path);
    run.output(identities_path);
    run.write(out, "synth-dataset")?;
    eprintln!(
        "drew {} identities and {} images into {}",
        identities.len(),
        images.len(),
        out.display()
    );
    Ok(())
}

pub fn synth_scores(
    schema_arg: &SchemaArg,
    dataset: &DatasetArgs,
    config: &Path,
    pairs_path: &Path,
    seed: Option<u64>,
    submission_id: &str,
    out: &Path,
) -> Result<()> {
    check_submission_id(submission_id)?;
    create_dir(out)?;
    let mut run = Run::new(
        "synth-scores",
        json!({
            "config": path_str(config),
            "seed": seed,
            "pairs": path_str(pairs_path),
            "submission_id": submission_id,
        }),
    );
    let schema = load_schema(schema_arg, &mut run)?;
    let cfg = load_synth_config(config, seed, &mut run)?;
    let name = format!("synth-scores-{submission_id}");
    let d = load_dataset(schema.clone(), dataset, out, &name, &mut run)?;
    let pairs = load_pairs(&d, pairs_path, out, &name, &mut run)?;
    let rows = generate_score_rows(&schema, &pairs, &cfg).map_err(|e| ValidationFailure(e.to_string()))?;
    let scores_path = out.join(format!("{submission_id}.scores.csv"));
    write_with(&scores_path, |f| io::write_scores(f, &rows))?;
    run.output(&scores_path);
    run.write(out, &name)?;
    eprintln!("wrote {} scores to {}", rows.len(), scores_path.display());
    Ok(())
}

pub fn print_schema() -> Result<()> {
    print!("{}", AttributeSchema::challenge_default().to_toml_string());
    Ok(())
}
