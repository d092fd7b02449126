//! `fairverify`: label aggregation, pair generation, evaluation, ranking,
//! analysis and synthetic data from the command line.
//!
//! Exit codes: 0 success, 1 runtime or I/O error, 2 bad usage, 3 input
//! validation failure. Diagnostics go to standard error; data goes to files
//! (and, for `rank` and `schema`, standard output).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairverify_core::metrics::ComboDenominator;

/// Environment variable naming a directory searched for config files
/// (schema, synth configs) that are not found as given.
pub const CONFIG_DIR_VAR: &str = "FAIRVERIFY_CONFIG_DIR";

#[derive(Parser)]
#[command(
    name = "fairverify",
    version,
    about = "Fairness-aware evaluation of face-verification benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct SchemaArg {
    /// Attribute schema (TOML). Defaults to `schema.toml` in the config
    /// directory, else the built-in challenge schema.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct DatasetArgs {
    /// Images CSV: image_id, identity_id, one column per image attribute.
    #[arg(long)]
    pub images: PathBuf,
    /// Identities CSV: identity_id, one column per identity attribute.
    #[arg(long)]
    pub identities: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate annotator votes into images and identities files.
    Aggregate {
        #[command(flatten)]
        schema: SchemaArg,
        /// Votes CSV: annotator_id, target_id, attribute, value.
        #[arg(long)]
        votes: PathBuf,
        /// Image index CSV: image_id, identity_id.
        #[arg(long)]
        image_index: PathBuf,
        /// Known-age ratings CSV: annotator_id, age_annotated, age_true.
        /// Without it, age estimates are used uncorrected.
        #[arg(long)]
        known_ages: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate balanced positive and negative verification pairs.
    Genpairs {
        #[command(flatten)]
        schema: SchemaArg,
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Number of positive pairs to generate.
        #[arg(long)]
        positive: usize,
        /// Number of negative pairs to generate.
        #[arg(long)]
        negative: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allow negatives whose identities belong to different groups.
        #[arg(long)]
        mixed_negatives: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one submission and store its report under the runs directory.
    Evaluate {
        #[command(flatten)]
        schema: SchemaArg,
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Pairs CSV: pair_id, image_a, image_b, polarity.
        #[arg(long)]
        pairs: PathBuf,
        /// Scores CSV: pair_id, score.
        #[arg(long)]
        scores: PathBuf,
        /// Submission id; defaults to the scores file name without
        /// `.scores.csv` / `.csv`.
        #[arg(long)]
        submission_id: Option<String>,
        /// Runs directory; the report is written to `<out>/<id>.json`.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Drop subgroup buckets with fewer focal pairs.
        #[arg(long, default_value_t = 1)]
        min_pairs: usize,
        /// Combos averaged per group: all where the group appears
        /// (per-group) or only those shared by every group (intersection).
        #[arg(long, default_value = "per-group")]
        combo_denominator: ComboDenominator,
    },
    /// Rank every report in a runs directory against a baseline.
    Rank {
        /// Directory of report JSON files.
        #[arg(long, default_value = "runs")]
        reports: PathBuf,
        /// Baseline report file, or the submission id of a report in the
        /// directory.
        #[arg(long)]
        baseline: String,
        /// Decimal places values are rounded to for ranking and display.
        #[arg(long, default_value_t = 6)]
        report_precision: u32,
        /// Rank on unrounded values (display still uses the precision).
        #[arg(long)]
        exact_ranks: bool,
        /// Output directory for leaderboard.json and leaderboard.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Bias analysis tables for one stored report.
    Analyze {
        #[command(flatten)]
        schema: SchemaArg,
        /// Report JSON produced by `evaluate`.
        #[arg(long)]
        report: PathBuf,
        /// List the k hardest pairs per polarity (needs --pairs, --scores
        /// and the dataset files).
        #[arg(long)]
        hardest: Option<usize>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        identities: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic datasets and scores.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Print the built-in attribute schema as TOML.
    Schema,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Draw identities and images.
    Dataset {
        #[command(flatten)]
        schema: SchemaArg,
        /// Synth config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw one score per pair.
    Scores {
        #[command(flatten)]
        schema: SchemaArg,
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "synthetic")]
        submission_id: String,
        /// Output directory; scores go to `<out>/<id>.scores.csv`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    use commands::*;
    match cli.command {
        Command::Aggregate {
            schema,
            votes,
            image_index,
            known_ages,
            out,
        } => aggregate(&schema, &votes, &image_index, known_ages.as_deref(), &out),
        Command::Genpairs {
            schema,
            dataset,
            positive,
            negative,
            seed,
            mixed_negatives,
            out,
        } => genpairs(&schema, &dataset, positive, negative, seed, mixed_negatives, &out),
        Command::Evaluate {
            schema,
            dataset,
            pairs,
            scores,
            submission_id,
            out,
            min_pairs,
            combo_denominator,
        } => evaluate(
            &schema,
            &dataset,
            &pairs,
            &scores,
            submission_id,
            &out,
            min_pairs,
            combo_denominator,
        ),
        Command::Rank {
            reports,
            baseline,
            report_precision,
            exact_ranks,
            out,
        } => rank(&reports, &baseline, report_precision, exact_ranks, &out),
        Command::Analyze {
            schema,
            report,
            hardest,
            pairs,
            scores,
            images,
            identities,
            out,
        } => analyze(
            &schema,
            &report,
            hardest,
            AnalyzeInputs {
                pairs,
                scores,
                images,
                identities,
            },
            &out,
        ),
        Command::Synth(SynthCommand::Dataset {
            schema,
            config,
            seed,
            out,
        }) => synth_dataset(&schema, &config, seed, &out),
        Command::Synth(SynthCommand::Scores {
            schema,
            dataset,
            config,
            pairs,
            seed,
            submission_id,
            out,
        }) => synth_scores(&schema, &dataset, &config, &pairs, seed, &submission_id, &out),
        Command::Schema => print_schema(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = if err.downcast_ref::<commands::ValidationFailure>().is_some() {
                3
            } else {
                1
            };
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
