//! `mtrank`: ingest, pair generation, perturbation, training, evaluation,
//! system ranking and reporting.

mod commands;
mod error;
mod manifest;
mod selector;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use error::{CliError, EXIT_OK, EXIT_USAGE};
use selector::{ProviderOpts, RankerSelector};

#[derive(Debug, Parser)]
#[command(name = "mtrank", version, about = "Pairwise ranking of machine translations")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "MTRANK_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for ranking; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an mtrank/1 file.
    IngestCheck(IngestCheckArgs),
    /// Build training pairs from human scores, NLI data, references or a metric.
    MakePairs(MakePairsArgs),
    /// Build pairs from perturbed references.
    Perturb(PerturbArgs),
    /// Train the built-in ranker through a sequence of stages.
    Train(TrainArgs),
    /// Kendall-like tau of a ranker on labeled samples.
    Eval(EvalArgs),
    /// Per-category tau and weighted score on a challenge set.
    AcesEval(AcesEvalArgs),
    /// Win matrix, system scores and inconsistent triples.
    Sysrank(SysrankArgs),
    /// Render tables from eval and aces-eval outputs.
    Report(ReportArgs),
    /// Write the bundled synthetic corpus.
    Desk(DeskArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Segments,
    Scores,
    Samples,
    Nli,
    Challenge,
    SystemScores,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestCheckArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Report bad lines and keep going instead of stopping at the first.
    #[arg(long)]
    pub lenient: bool,
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    Darr,
    Nli,
    Ref,
    Metric,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NliPolicyArg {
    Any,
    Contradiction,
}

#[derive(Debug, Args, Serialize)]
pub struct MakePairsArgs {
    #[arg(long, value_enum)]
    pub mode: PairMode,
    /// Minimum DA gap for darr pairs.
    #[arg(long, default_value_t = 25.0)]
    pub threshold: f64,
    /// Segment texts; required for darr, where the input is a score file.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    #[arg(long)]
    pub max_pairs_per_segment: Option<usize>,
    #[arg(long, value_enum, default_value = "any")]
    pub nli_policy: NliPolicyArg,
    /// Metric for metric mode: `char-overlap` or a /score URL.
    #[arg(long, default_value = "char-overlap")]
    pub metric: String,
    /// Hold out segments per language pair and write their pairs here.
    #[arg(long)]
    pub dev_out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub dev_size: usize,
    #[command(flatten)]
    pub provider: ProviderOpts,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbKindArg {
    WordDrop,
    MlmReplace,
    Backtranslate,
    BtReplace,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    #[arg(long, value_enum)]
    pub kind: PerturbKindArg,
    #[arg(long, default_value_t = 0.15)]
    pub drop_rate: f64,
    #[arg(long, default_value_t = 0.15)]
    pub replace_rate: f64,
    #[arg(long, default_value = "fr")]
    pub pivot: String,
    #[arg(long, default_value_t = 25_000)]
    pub max_per_langpair: usize,
    #[arg(long, default_value_t = 50_000)]
    pub backtranslation_subset: usize,
    /// /mask-fill provider URL.
    #[arg(long)]
    pub mask_fill: Option<String>,
    /// /translate provider URL.
    #[arg(long)]
    pub translate: Option<String>,
    #[command(flatten)]
    pub provider: ProviderOpts,
    /// Segments with references.
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Sample files; samples go to stages by provenance.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Held-out samples for checkpoint selection.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Comma-separated stage order from nli, ref, synthetic, human.
    #[arg(long, default_value = "nli,ref,synthetic")]
    pub stages: String,
    /// Start from this checkpoint instead of zeros.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Steps per stage.
    #[arg(long, default_value_t = 2000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub eval_every: usize,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingArg {
    Global,
    /// Average over source segments.
    Segment,
    /// Average over language pairs.
    Langpair,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieArg {
    Discordant,
    Skip,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub ranker: RankerSelector,
    #[arg(long, value_enum, default_value = "global")]
    pub grouping: GroupingArg,
    #[arg(long, value_enum, default_value = "discordant")]
    pub ties: TieArg,
    /// Name shown in reports; defaults to the selector.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderOpts,
    pub input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AcesEvalArgs {
    #[arg(long)]
    pub ranker: RankerSelector,
    /// JSON object of category weights, keyed by code or name.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "discordant")]
    pub ties: TieArg,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderOpts,
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateArg {
    Probability,
    Binarized,
}

#[derive(Debug, Args, Serialize)]
pub struct SysrankArgs {
    #[arg(long)]
    pub ranker: RankerSelector,
    /// Comma-separated systems; defaults to every system in the input.
    #[arg(long)]
    pub systems: Option<String>,
    #[arg(long, value_enum, default_value = "probability")]
    pub aggregate: AggregateArg,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// System-level gold scores for Pearson correlation.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderOpts,
    pub input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// JSON outputs of eval or aces-eval.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DeskArgs {
    /// Source sentences per generated file.
    #[arg(long, default_value_t = 200)]
    pub size: usize,
    /// Output directory.
    pub dir: PathBuf,
}

/// Help text of the subcommand named on the command line, or the top-level
/// help if none is.
fn usage_help() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args()
        .skip(1)
        .find(|a| cmd.get_subcommands().any(|s| s.get_name() == a));
    match name.and_then(|n| cmd.find_subcommand_mut(&n).map(|s| s.render_help())) {
        Some(h) => h.to_string(),
        None => cmd.render_help().to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::from(EXIT_OK as u8);
            }
            eprintln!("\n{}", usage_help());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1\n\n{}", usage_help());
            return ExitCode::from(EXIT_USAGE as u8);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", usage_help());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::IngestCheck(a) => commands::ingest_check(a),
        Command::MakePairs(a) => commands::make_pairs(a, seed),
        Command::Perturb(a) => commands::perturb(a, seed),
        Command::Train(a) => commands::train(a, seed),
        Command::Eval(a) => commands::eval(a),
        Command::AcesEval(a) => commands::aces_eval(a, seed),
        Command::Sysrank(a) => commands::sysrank(a),
        Command::Report(a) => commands::report(a),
        Command::Desk(a) => commands::desk(a, seed),
    }
}
