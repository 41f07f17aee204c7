use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "klconc",
    version,
    about = "Exact laws, simulation and concentration bounds for Z = 2n D(p_hat || p)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,

    /// Write to this file instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Also write `<output>.meta.json` with timing and invocation details.
    #[arg(long, global = true, requires = "output")]
    pub annotate: bool,

    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Constants override file (JSON). Applied after $KLCONC_CONSTANTS.
    #[arg(long, global = true)]
    pub constants: Option<PathBuf>,

    /// Override one constant, e.g. `--set-constant C_main=1e6`. Repeatable.
    #[arg(long = "set-constant", value_name = "NAME=VALUE", global = true)]
    pub set_constant: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the exact law of Z.
    Exact(ExactArgs),
    /// Evaluate every tail bound at one or more thresholds.
    Bound(BoundArgs),
    /// Monte Carlo estimates.
    Mc(McArgs),
    /// Run certification sweeps.
    Verify(VerifyArgs),
    /// Smallest threshold whose tail bound is at most delta.
    Threshold(ThresholdArgs),
}

/// Where the distribution p comes from.
#[derive(Debug, Args)]
pub struct PArgs {
    /// Alphabet size. Implied by --p.
    #[arg(long)]
    pub k: Option<usize>,

    /// Explicit probabilities, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "p_shape")]
    pub p: Option<Vec<f64>>,

    /// Named family: uniform, geometric, two-level, dirichlet, or a
    /// parameterised form such as `geometric(0.3)`.
    #[arg(long)]
    pub p_shape: Option<String>,

    /// Seed of the dirichlet shape.
    #[arg(long, default_value_t = 1, requires = "p_shape")]
    pub shape_seed: u64,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub n: u64,

    #[command(flatten)]
    pub p: PArgs,

    /// Report P(Z >= t).
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,

    /// Moment orders to report. Repeatable or comma separated.
    #[arg(long = "moment", short = 'm', value_delimiter = ',')]
    pub moments: Vec<u32>,

    /// Report moments about the mean.
    #[arg(long)]
    pub centered: bool,

    /// Points at which to report the centered log-MGF.
    #[arg(long = "mgf-t", value_delimiter = ',', allow_negative_numbers = true)]
    pub mgf_t: Vec<f64>,

    /// Refuse supports larger than this.
    #[arg(long, default_value_t = klconc::DEFAULT_OUTCOME_CAP)]
    pub cap: u128,

    /// Include the atoms of the law in JSON output.
    #[arg(long)]
    pub atoms: bool,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub n: u64,

    #[command(flatten)]
    pub p: PArgs,

    /// Lower bound on min p_i. Defaults to min p_i, or 1/k without p.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Thresholds. Repeatable or comma separated.
    #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Statistic {
    Tail,
    Moment,
    LogMgf,
    Coverage,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub n: u64,

    #[command(flatten)]
    pub p: PArgs,

    #[arg(long, value_enum, default_value_t = Statistic::Tail)]
    pub stat: Statistic,

    /// Number of draws.
    #[arg(long, short = 'm', default_value_t = 100_000)]
    pub samples: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Threshold for `tail`, argument for `log-mgf`.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,

    /// Moment order for `moment`.
    #[arg(long, default_value_t = 1)]
    pub q: u32,

    #[arg(long)]
    pub centered: bool,

    /// Confidence level for `coverage`.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Lower bound on min p_i for the coverage interval.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Sub-gamma variance factor for `coverage`; needs --scale.
    #[arg(long, requires = "scale")]
    pub nu: Option<f64>,

    /// Sub-gamma scale for `coverage`; needs --nu.
    #[arg(long, requires = "nu")]
    pub scale: Option<f64>,

    /// Allow log-MGF arguments outside |t| <= 1/(2 c_main).
    #[arg(long)]
    pub allow_wide_t: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Properties to check. Repeatable; all of them by default.
    #[arg(long = "property", value_delimiter = ',')]
    pub properties: Vec<String>,

    /// Grid file (JSON); missing keys take the default grid's values.
    #[arg(long)]
    pub grid: Option<PathBuf>,

    /// Monte Carlo seeds, replacing the grid's.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sanov,
    Agrawal,
    Main,
    Best,
    All,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub n: u64,

    #[command(flatten)]
    pub p: PArgs,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub delta: f64,

    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    pub method: MethodArg,
}
