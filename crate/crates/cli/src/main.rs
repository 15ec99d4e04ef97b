//! `hornforge`: generate, augment, encode, probe and evaluate Horn-clause
//! deduction datasets.
//!
//! Exit codes: 0 success, 1 bad data, 2 usage, 3 I/O. Errors are printed to
//! stderr as one JSON object.

mod commands;
mod error;
mod files;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hornforge::encode::Format;
use hornforge::generators::GeneratorKind;
use hornforge::r2::DatasetKind;

use crate::error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "hornforge", version, about = "Horn-clause deduction dataset workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a depth- and label-balanced dataset as JSONL.
    Gen(GenArgs),
    /// Write one counterfactual per example with flipped label where possible.
    Augment(AugmentArgs),
    /// Per-feature label correlation for original, augmented and combined data.
    Stats(StatsArgs),
    /// Encode a dataset into the binary token format.
    Encode(EncodeArgs),
    /// Print or export attention masks.
    Masks(MasksArgs),
    /// Layer-wise probes over exported hidden states.
    Probe(ProbeArgs),
    /// Grade model predictions and run the statistical comparisons.
    Eval(EvalArgs),
    /// Run the built-in fixtures.
    Selftest,
}

/// `MIN:MAX` pair of integers.
#[derive(Clone, Copy, Debug)]
struct Range(u32, u32);

impl std::str::FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected MIN:MAX, got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("{x:?}: {e}"));
        Ok(Range(parse(a)?, parse(b)?))
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value = "rp")]
    generator: GeneratorKind,
    /// Predicate count range.
    #[arg(long, default_value = "5:30")]
    n_pred: Range,
    /// Premises per rule.
    #[arg(long, default_value = "1:3")]
    premises: Range,
    #[arg(long, default_value_t = 6)]
    max_delta: u32,
    /// Examples per (depth, label) cell.
    #[arg(long)]
    per_bucket: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Problems whose direct encoding exceeds this are rejected.
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    dataset_kind: DatasetKind,
    /// Distinct seeds give distinct counterfactuals per epoch.
    #[arg(long, default_value_t = 0)]
    epoch_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StatsReport {
    Features,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Output of `augment` for the same dataset.
    #[arg(long)]
    augmented: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "features")]
    report: StatsReport,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MaskKind {
    Causal,
    Prefix,
    Isolated,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["demo", "encoded"]))]
struct MasksArgs {
    /// Print the mask of a demo sequence of this length.
    #[arg(long)]
    demo: Option<usize>,
    /// Binary token file written by `encode`.
    #[arg(long, requires = "out")]
    encoded: Option<PathBuf>,
    /// Record index within `--encoded`.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, value_enum, default_value = "isolated")]
    kind: MaskKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProbeReport {
    Trace,
    F1,
    Typesim,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Directory of `<stem>.json` sidecars with `<stem>.f32` data.
    #[arg(long)]
    states: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    report: ProbeReport,
    /// Readout rows; defaults to `readout.json` in the states directory.
    #[arg(long)]
    readout: Option<PathBuf>,
    /// Seed for the calibration split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalMode {
    Direct,
    Cot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalReport {
    Accuracy,
    Errors,
    Marginal,
    Noninferiority,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// JSONL of `{"id": i, "tokens": [...]}` model outputs.
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "direct")]
    mode: EvalMode,
    #[arg(long, value_enum)]
    report: EvalReport,
    /// Ablation table (marginal) or paired accuracy series (noninferiority).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Depth bucket upper edges, comma separated.
    #[arg(long, value_delimiter = ',')]
    edges: Option<Vec<u32>>,
    #[arg(long, default_value_t = hornforge::eval::NON_INFERIORITY_MARGIN)]
    margin: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HORNFORGE_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HORNFORGE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run() -> Result<()> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            e.exit();
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string().trim().to_string())),
    };
    configure_threads()?;
    match cli.command {
        Command::Gen(a) => commands::gen::run(a),
        Command::Augment(a) => commands::augment::run(a),
        Command::Stats(a) => commands::stats::run(a),
        Command::Encode(a) => commands::encode::run(a),
        Command::Masks(a) => commands::masks::run(a),
        Command::Probe(a) => commands::probe::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Selftest => commands::selftest::run(),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
