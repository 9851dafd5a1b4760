use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use varmisuse_core::{MaskMode, RepLossMode};

#[derive(Debug, Parser)]
#[command(
    name = "varmisuse",
    version,
    about = "Generate variable-misuse datasets, train pointer models and evaluate them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus of Python-subset functions.
    GenCorpus(GenCorpusArgs),
    /// Turn a corpus into joint, hole and noise datasets.
    GenData(GenDataArgs),
    /// Train a joint or repair-only model on a generated dataset.
    Train(TrainArgs),
    /// Score a joint checkpoint on one partition.
    Eval(EvalArgs),
    /// Score the enumerative baseline over a threshold and top-k grid.
    EnumEval(EnumEvalArgs),
    /// Repair accuracy on clean versus noisy hole pairs.
    NoiseExp(NoiseExpArgs),
    /// Print one example with its targets and, optionally, model outputs.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Joint,
    Repair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Train,
    Valid,
    Test,
}

impl PartitionArg {
    pub fn name(self) -> &'static str {
        match self {
            PartitionArg::Train => "train",
            PartitionArg::Valid => "valid",
            PartitionArg::Test => "test",
        }
    }
}

/// A top-k bound; `inf` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopK(pub Option<usize>);

impl std::fmt::Display for TopK {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("inf"),
        }
    }
}

fn parse_k(s: &str) -> Result<TopK, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(TopK(None));
    }
    match s.parse::<usize>() {
        Ok(k) if k > 0 => Ok(TopK(Some(k))),
        _ => Err(format!("expected a positive integer or \"inf\", got {s:?}")),
    }
}

fn parse_tau(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if (0.0..=1.0).contains(&t) => Ok(t),
        _ => Err(format!("expected a threshold in [0, 1], got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub functions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Directory (or single file) of `.py` sources.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Read `.jsonl` token streams instead of `.py` sources.
    #[arg(long)]
    pub pretokenized: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub max_test_functions: Option<usize>,
    /// JSON file with a `datagen` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Output directory of `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Joint)]
    pub model: ModelArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Decay the learning rate linearly to this fraction of `--lr`.
    #[arg(long)]
    pub lr_decay_to: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Stop after this many seconds of training.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Stop once the validation metric reaches this value.
    #[arg(long)]
    pub target_metric: Option<f64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub mask_mode: Option<MaskMode>,
    #[arg(long)]
    pub rep_loss: Option<RepLossMode>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    /// JSON file with `model` and `train` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PartitionArg::Test)]
    pub partition: PartitionArg,
    /// Report a location only when its probability reaches this value.
    #[arg(long, value_parser = parse_tau)]
    pub confidence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EnumEvalArgs {
    /// Repair-only checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_tau,
          default_value = "0,0.2,0.3,0.5,0.7,0.9,0.99")]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_k, default_value = "inf")]
    pub k: Vec<TopK>,
    #[arg(long, value_enum, default_value_t = PartitionArg::Test)]
    pub partition: PartitionArg,
}

#[derive(Debug, Args)]
pub struct NoiseExpArgs {
    /// Repair-only checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_tau, default_value = "0,0.2,0.5,0.8")]
    pub tau: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = PartitionArg::Test)]
    pub partition: PartitionArg,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Joint or repair-only checkpoint whose outputs to show.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}
