use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Document similarity from word-embedding densities.
///
/// Every option can also be given in a `key = value` config file via
/// `--config`; flags on the command line take precedence.
#[derive(Debug, Parser)]
#[command(name = "densim", version)]
pub struct Cli {
    /// Maximum worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Read `key = value` options from FILE before the command line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus with a matching embedding.
    Synth(SynthArgs),
    /// Tokenize corpora and build weighted document-feature matrices.
    Dfm(DfmArgs),
    /// Estimate the kernel bandwidth of an embedding.
    Bandwidth(BandwidthArgs),
    /// Draw uniform sample points in a ball.
    Sample(SampleArgs),
    /// Evaluate document densities at the sample points.
    Density(DensityArgs),
    /// Query-item similarity matrix from densities (or RWMD from matrices).
    Similar(SimilarArgs),
    /// Rank items per query.
    Rank(RankArgs),
    /// Soft top-k accuracy and soft Jaccard agreement of rankings.
    Eval(EvalArgs),
    /// Time density similarity against RWMD.
    Bench(BenchArgs),
    /// Run every stage from raw corpora to rankings.
    Pipeline(PipelineArgs),
}

impl Command {
    pub const NAMES: [&'static str; 10] = [
        "synth", "dfm", "bandwidth", "sample", "density", "similar", "rank", "eval", "bench", "pipeline",
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandwidthMethodArg {
    Volume,
    Silverman,
    Lscv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimilarityArg {
    Cosine,
    Js,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimilarKindArg {
    Cosine,
    Js,
    Rwmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RwmdVariantArg {
    Symmetric,
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ds,
    Rwmd,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 60)]
    pub docs_per_class: usize,
    #[arg(long, default_value_t = 200)]
    pub words_per_class: usize,
    #[arg(long, default_value_t = 60)]
    pub doc_len: usize,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    /// Pairwise distance between class centers [default: 10 * sqrt(dim)].
    #[arg(long)]
    pub separation: Option<f64>,
    /// Probability that a token comes from another class.
    #[arg(long, default_value_t = 0.1)]
    pub mixing: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Inputs and preprocessing shared by `dfm`, `bench` and `pipeline`.
#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Word2vec text embedding.
    #[arg(long, value_name = "FILE")]
    pub embedding: PathBuf,
    /// Read at most this many vectors from the embedding.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Scale every embedding vector to unit length.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub unit_normalize: bool,
    /// Query corpus, one `doc_id<TAB>text` record per line.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Item corpus; defaults to the query corpus.
    #[arg(long, value_name = "FILE")]
    pub items: Option<PathBuf>,
    /// Stopword list, one token per line.
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Minimum token length.
    #[arg(long, default_value_t = densim::corpus::DEFAULT_MIN_LEN)]
    pub min_len: usize,
    /// Comma-separated weighting steps: normalize, tfidf, tfidf-smooth.
    #[arg(long, default_value = "normalize,tfidf")]
    pub transforms: String,
}

/// Density-similarity parameters shared by `bench` and `pipeline`.
#[derive(Debug, Args)]
pub struct DsArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    #[arg(long = "bandwidth", value_enum, default_value = "volume")]
    pub bandwidth: BandwidthMethodArg,
    /// Multiplier applied to the estimated bandwidth.
    #[arg(long, default_value_t = 1.0)]
    pub adjust: f64,
    /// Use per-axis Silverman bandwidths.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub diagonal: bool,
    /// Grid size of the cross-validation search.
    #[arg(long, default_value_t = 40)]
    pub lscv_steps: usize,
    #[arg(long, default_value_t = densim::bandwidth::DEFAULT_Q_LOW)]
    pub qlow: f64,
    #[arg(long, default_value_t = densim::bandwidth::DEFAULT_Q_HIGH)]
    pub qhigh: f64,
    /// Number of sample points.
    #[arg(long, default_value_t = 1000)]
    pub n_points: usize,
    /// Seed of the sample points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quantile of the vector norms used as the sampling radius.
    #[arg(long, default_value_t = densim::sampler::DEFAULT_RADIUS_QUANTILE)]
    pub radius_quantile: f64,
    /// Divide by the total kernel mass at each point.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub normalize: bool,
    #[arg(long, value_enum, default_value = "cosine")]
    pub similarity: SimilarityArg,
}

#[derive(Debug, Args)]
pub struct RwmdArgs {
    #[arg(long, value_enum, default_value = "symmetric")]
    pub rwmd_variant: RwmdVariantArg,
    /// Abort RWMD after this many seconds (0 disables).
    #[arg(long, default_value_t = 0.0)]
    pub timeout: f64,
}

#[derive(Debug, Args)]
pub struct EvalGridArgs {
    /// Comma-separated k values.
    #[arg(long, default_value = "5")]
    pub k: String,
    /// Comma-separated softness values; empty means 0.
    #[arg(long, default_value = "0,1,2")]
    pub s: String,
}

#[derive(Debug, Args)]
pub struct DfmArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    /// Embedding (usually `embedding.txt` written by `dfm`).
    #[arg(long, value_name = "FILE")]
    pub embedding: PathBuf,
    #[arg(long, value_enum, default_value = "volume")]
    pub method: BandwidthMethodArg,
    #[arg(long, default_value_t = 1.0)]
    pub adjust: f64,
    #[arg(long, default_value_t = densim::bandwidth::DEFAULT_Q_LOW)]
    pub qlow: f64,
    #[arg(long, default_value_t = densim::bandwidth::DEFAULT_Q_HIGH)]
    pub qhigh: f64,
    #[arg(long, default_value_t = 40)]
    pub lscv_steps: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 1000)]
    pub n_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Take the dimension and radius from this embedding.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dim", "radius"])]
    pub embedding: Option<PathBuf>,
    #[arg(long, default_value_t = densim::sampler::DEFAULT_RADIUS_QUANTILE)]
    pub radius_quantile: f64,
    /// Dimension, when no embedding is given.
    #[arg(long, requires = "radius")]
    pub dim: Option<usize>,
    /// Ball radius, when no embedding is given.
    #[arg(long, requires = "dim")]
    pub radius: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Directory written by `dfm`.
    #[arg(long, value_name = "DIR")]
    pub dfm: PathBuf,
    /// Directory written by `sample`.
    #[arg(long, value_name = "DIR")]
    pub samples: PathBuf,
    /// Directory written by `bandwidth`.
    #[arg(long = "bandwidth", value_name = "DIR")]
    pub bandwidth: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub normalize: bool,
    /// Use the per-axis bandwidths if the bandwidth file has them.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub diagonal: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SimilarArgs {
    #[arg(long, value_enum, default_value = "cosine")]
    pub kind: SimilarKindArg,
    /// Directory written by `density` (cosine, js).
    #[arg(long, value_name = "DIR")]
    pub density: Option<PathBuf>,
    /// Directory written by `dfm` (rwmd).
    #[arg(long, value_name = "DIR")]
    pub dfm: Option<PathBuf>,
    #[command(flatten)]
    pub rwmd: RwmdArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Directory written by `similar`.
    #[arg(long, value_name = "DIR")]
    pub similarity: PathBuf,
    /// Drop items whose id equals the query id.
    #[arg(long, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub exclude_self: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated rankings CSV files, one per model.
    #[arg(long, value_name = "FILES")]
    pub rankings: String,
    /// Comma-separated model names [default: file stems].
    #[arg(long)]
    pub names: Option<String>,
    /// `doc_id<TAB>label[,label...]` file; enables accuracy rows.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub grid: EvalGridArgs,
    /// Also write every per-query value.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub per_query: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub ds: DsArgs,
    #[command(flatten)]
    pub rwmd: RwmdArgs,
    /// Comma-separated methods to time: ds, rwmd.
    #[arg(long, default_value = "ds,rwmd")]
    pub methods: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_enum, default_value = "ds")]
    pub method: MethodArg,
    #[command(flatten)]
    pub ds: DsArgs,
    #[command(flatten)]
    pub rwmd: RwmdArgs,
    #[arg(long, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub exclude_self: bool,
    /// Labels for an evaluation report.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub grid: EvalGridArgs,
    #[command(flatten)]
    pub out: OutArgs,
}
