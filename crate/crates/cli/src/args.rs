use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "drem", version, about = "Latent knowledge-graph product search")]
pub struct Cli {
    /// key = value file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Single-threaded, bit-reproducible execution (default true).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<bool>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate raw files, split them if needed and write a corpus directory.
    Ingest(IngestArgs),
    /// Generate a synthetic brand-affinity corpus directory.
    Synth(SynthArgs),
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Retrieve the top-K items for every test (user, query) pair.
    Retrieve(RetrieveArgs),
    /// Score a run file against relevance judgments.
    Eval(EvalArgs),
    /// Emit explanation groups as JSON lines.
    Explain(ExplainArgs),
    /// Write pairwise explanation-group features.
    Features(FeaturesArgs),
    /// Cross-validate the preference predictor on labeled features.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directory holding triples.tsv and purchases.tsv.
    #[arg(long, conflicts_with_all = ["triples", "purchases"])]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "purchases")]
    pub triples: Option<PathBuf>,
    #[arg(long, requires = "triples")]
    pub purchases: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, required = true)]
    pub triples: PathBuf,
    #[arg(long, required = true)]
    pub purchases: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Share of distinct queries held out when the purchases carry no split.
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub vocab_min_count: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub users: usize,
    #[arg(long, default_value_t = 100)]
    pub items: usize,
    #[arg(long, default_value_t = 10)]
    pub brands: usize,
    #[arg(long, default_value_t = 5)]
    pub categories: usize,
    #[arg(long, default_value_t = 20)]
    pub queries: usize,
    #[arg(long, default_value_t = 5)]
    pub sessions: usize,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Drem,
    DremHgn,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Embedding size α.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Attention heads β.
    #[arg(long)]
    pub heads: Option<usize>,
    /// Negative samples per positive.
    #[arg(long)]
    pub neg: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Optional per-epoch CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Retrieval depth K.
    #[arg(long)]
    pub topk: Option<usize>,
    /// Run tag; defaults to the model kind.
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub run: PathBuf,
    /// Judgments file; defaults to the corpus test split.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Comma-separated NDCG cutoffs.
    #[arg(long, value_delimiter = ',')]
    pub cutoffs: Option<Vec<usize>>,
    /// JSON report output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Second run for a paired randomization test.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Metric compared: map, mrr or ndcg@k.
    #[arg(long, default_value = "mrr")]
    pub metric: String,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Intrinsic attention explanations.
    Pre,
    /// Post-hoc path explanations.
    Post,
    Both,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// One checkpoint, or one per model kind for `--mode both`.
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    /// Per-hop path penalty γ.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Explanations per group.
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Explain at most this many judged test triples.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// A drem checkpoint (post-hoc group) and a drem-hgn checkpoint
    /// (intrinsic group).
    #[arg(long, required = true, num_args = 1)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Candidate depth for the purchase probability.
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// `case_id,aspect,worker_id,label` annotations.
    #[arg(long)]
    pub labels: PathBuf,
    /// `case_id,A,B` mapping of anonymized groups.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Evaluate only the default tree settings instead of the grid.
    #[arg(long)]
    pub no_grid: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
