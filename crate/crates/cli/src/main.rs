//! `posdelay`: data generation, training, evaluation and analysis of
//! recurrent spiking networks with learnable delays.
//!
//! Exit codes: 0 success, 2 bad arguments or config, 3 data error,
//! 4 numerical failure.

// `!(x > 0.0)` style comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "posdelay", version, about = "Spiking networks with position-derived synaptic delays")]
struct Cli {
    /// Worker threads; defaults to the available cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Task {
    Patterns,
    Interval,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProbeKind {
    /// Input centroids weighted by |w_in|.
    PrefposW,
    /// Input centroids weighted by spike-triggered hidden activity.
    PrefposAct,
    /// Activity centroids per time bin of the triggering input spike.
    PrefposTime,
    /// Cross-validated ridge regression of positions on input weights.
    Ridge,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Strategy {
    LongestDelay,
    Magnitude,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic event dataset as JSON lines.
    GenData(GenDataArgs),
    /// Train a network from a JSON config and write a checkpoint.
    Train(TrainArgs),
    /// Print accuracy and loss of a checkpoint on a dataset as JSON.
    Eval(EvalArgs),
    /// Print every topology metric of the recurrent weights as JSON.
    Analyze(AnalyzeArgs),
    /// Write preferred input positions or ridge decodability as CSV.
    Probe(ProbeArgs),
    /// Prune recurrent synapses at several fractions and write accuracy and topology as CSV.
    Prune(PruneArgs),
    /// Silence random hidden neurons and write accuracy as CSV.
    Ablate(AblateArgs),
    /// Add whole-step noise to the recurrent delays and write accuracy as CSV.
    Perturb(PerturbArgs),
    /// Compare analytic gradients with finite differences on a random network.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Generator config as JSON; the flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_in: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Samples per class.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps per trial.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Spike-time jitter: a standard deviation for patterns, whole steps for intervals.
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Move this fraction of samples into a test file.
    #[arg(long, requires = "test_out")]
    pub test_fraction: Option<f64>,
    #[arg(long, requires = "test_fraction")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out data evaluated after every epoch.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Training config as JSON; unknown keys are rejected.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Analyse the binarised graph.
    #[arg(long)]
    pub binary: bool,
    #[arg(long, default_value_t = posdelay::topology::DEFAULT_NULL_SAMPLES)]
    pub null_samples: usize,
    /// Seed for community detection and null models.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Needed by the activity probes.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: ProbeKind,
    /// Response window after each input spike, in steps.
    #[arg(long, default_value_t = posdelay::probes::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = posdelay::probes::DEFAULT_BIN_WIDTH)]
    pub bin_width: usize,
    #[arg(long, default_value_t = posdelay::probes::DEFAULT_RIDGE_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = posdelay::probes::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Seed for the ridge fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "longest-delay")]
    pub strategy: Strategy,
    /// Comma-separated list, or an inclusive range `lo..hi` stepped by --step.
    #[arg(long, default_value = "0.05..0.30")]
    pub fractions: String,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Number of seeds, 0..K.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Null graphs per normalised clustering estimate.
    #[arg(long, default_value_t = posdelay::topology::DEFAULT_NULL_SAMPLES)]
    pub null_samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated fractions of hidden neurons to silence.
    #[arg(long, default_value = "0.1,0.2,0.3")]
    pub fractions: String,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated standard deviations of the delay noise, in steps.
    #[arg(long, default_value = "1,2,5")]
    pub noise: String,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    /// Network and tolerance setup as JSON; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Probe(a) => commands::probe(&a),
        Command::Prune(a) => commands::prune(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Perturb(a) => commands::perturb(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
