use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "flowsieve",
    version,
    about = "Hybrid feature selection and tree-ensemble classification of network flows"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More logging on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load flow CSVs, drop invalid rows and identifiers, binarize labels.
    Ingest(IngestArgs),
    /// Generate a labelled synthetic dataset with known informative features.
    Synth(SynthArgs),
    /// Standardise a dataset and run hybrid feature selection.
    Select(SelectArgs),
    /// Train a classifier on the selected features of the training split.
    Train(TrainArgs),
    /// Score a trained model on its held-out split (or every row).
    Evaluate(EvaluateArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Feature importance and the combined report.
    Explain(ExplainArgs),
    /// Run every stage from one JSON configuration.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    /// Flow CSV files sharing one header.
    #[arg(long = "input", short, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// cic-ids2017, cic-iot2023 or custom.
    #[arg(long, default_value = "custom")]
    pub profile: String,
    #[arg(long)]
    pub label_column: Option<String>,
    /// JSON label rule file (benign labels, attack patterns, unknown policy).
    #[arg(long)]
    pub label_rules: Option<PathBuf>,
    /// Extra columns to drop.
    #[arg(long = "drop")]
    pub drop_columns: Vec<String>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    #[arg(long, default_value_t = 3)]
    pub informative: usize,
    #[arg(long, default_value_t = 5)]
    pub noise: usize,
    /// Fraction of rows in class 1.
    #[arg(long, default_value_t = 0.5)]
    pub imbalance: f64,
    /// Distance between class means on each informative feature, in standard deviations.
    #[arg(long, default_value_t = 6.0)]
    pub separation: f64,
    /// Fraction of labels flipped after generation.
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    #[arg(long)]
    pub seed: u64,
    /// Also write `dataset.csv` with a trailing `label` column.
    #[arg(long)]
    pub csv: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SelectArgs {
    /// Dataset snapshot written by `ingest` or `synth`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Selection settings as a JSON file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Equal-frequency bins for information gain.
    #[arg(long)]
    pub bins: Option<usize>,
    /// population or sample.
    #[arg(long, default_value = "population")]
    pub std_mode: String,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ModelChoice {
    /// tree, forest, gbdt or knn.
    #[arg(long, default_value = "gbdt")]
    pub model: String,
    /// Hyperparameters as a JSON object, e.g. '{"n_trees": 50}'.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Selection trace from `select`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Scaler from `select`; applied when the dataset is not yet standardised.
    #[arg(long)]
    pub scaler: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelChoice,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Model artifact from `train` or `pipeline`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Score every row instead of the recorded held-out split.
    #[arg(long)]
    pub all_rows: bool,
    /// hard_label or probability.
    #[arg(long, default_value = "hard_label")]
    pub mse_mode: String,
    /// Directory for `eval.json`; the metrics table always goes to stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CvArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub scaler: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelChoice,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    /// Metrics from `evaluate`.
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// json, md or csv.
    #[arg(long, default_value = "md")]
    pub format: String,
    /// gain or weight.
    #[arg(long, default_value = "gain")]
    pub mode: String,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PipelineArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the model kind (keeps its hyperparameters when the kind is unchanged).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub top: Option<usize>,
    /// Override any config field: KEY=VALUE, VALUE parsed as JSON when possible.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Validate the configuration and print its hash without reading data.
    #[arg(long)]
    pub dry_run: bool,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Synth(a) => commands::synth(a),
        Command::Select(a) => commands::select(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Cv(a) => commands::cv(a),
        Command::Explain(a) => commands::explain(a),
        Command::Pipeline(a) => commands::pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
