use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hindlab_core::model::DEFAULT_SEED;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hindlab", version, about = "Patterns in Bernoulli random subsets of the positive integers")]
pub struct Cli {
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format; tables default to csv, single reports to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Record wall-clock time in the output (breaks byte-for-byte reproducibility).
    #[arg(long, global = true)]
    pub timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Members of one random subset inside [1..N].
    Sample(SampleArgs),
    /// Probe events: independent-trial estimates, single-model scans, or a search above M.
    Probes(ProbesArgs),
    /// Count {x, y, x+y, xy} patterns, or estimate P(X_N > 0).
    Quadruples(QuadruplesArgs),
    /// Exact and Monte Carlo moments of X_N with the Paley-Zygmund bound.
    SecondMoment(SecondMomentArgs),
    /// Normalized Bernoulli-weighted sums and their limit regimes.
    Clt(CltArgs),
    /// Colorings, monochromatic patterns and the exhaustive 2-coloring scan.
    Color(ColorArgs),
    /// Bisection for the p at which FS-sets of length L appear in [1..N].
    Threshold(ThresholdArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Probes(_) => "probes",
            Command::Quadruples(_) => "quadruples",
            Command::SecondMoment(_) => "second-moment",
            Command::Clt(_) => "clt",
            Command::Color(_) => "color",
            Command::Threshold(_) => "threshold",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(short = 'p')]
    pub p: f64,
    #[arg(short = 'N')]
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Fs,
    Fp,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeMode {
    /// One independent subset per trial, each testing probe j = 1.
    Event,
    /// All probes j in a range against one subset.
    Scan,
    /// First probe lying entirely above M that the subset contains.
    MinElement,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbesArgs {
    #[arg(long, value_enum)]
    pub kind: ProbeKind,
    #[arg(short = 'L', default_value_t = 2)]
    pub len: u32,
    #[arg(short = 'p')]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = ProbeMode::Event)]
    pub mode: ProbeMode,
    /// Trials in event mode, probe indices in scan mode.
    #[arg(long, default_value_t = 10_000)]
    pub j_count: u64,
    /// First index scanned; the family's first index by default.
    #[arg(long)]
    pub j_start: Option<u64>,
    /// Threshold M for min-element mode, in decimal.
    #[arg(long)]
    pub above: Option<String>,
    #[arg(long)]
    pub max_attempts: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct QuadruplesArgs {
    #[arg(short = 'N')]
    pub n: u64,
    #[arg(short = 'p')]
    pub p: f64,
    /// Witness pairs listed.
    #[arg(long, default_value_t = 20)]
    pub witnesses: usize,
    /// Estimate P(X_N > 0) over this many subsets instead of counting in one.
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SecondMomentArgs {
    #[arg(short = 'N')]
    pub n: u64,
    /// Probability as a decimal or fraction, read exactly.
    #[arg(short = 'p')]
    pub p: String,
    /// Enumerate every subset of the universe (N <= 4).
    #[arg(long)]
    pub exact: bool,
    /// Monte Carlo trials; 0 with --exact by default, 10000 otherwise.
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Linear,
    DoublyExponential,
    Explicit,
    /// A monochromatic FS witness of a random coloring.
    Hindman,
}

#[derive(Debug, Args, Serialize)]
pub struct CltArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Comma-separated values for the explicit family.
    #[arg(long, value_delimiter = ',')]
    pub ys: Option<Vec<f64>>,
    /// Comma-separated 1-based parent indices n_1 < n_2 < ...
    #[arg(long, value_delimiter = ',')]
    pub subsequence: Option<Vec<u64>>,
    #[arg(short = 'k')]
    pub k: usize,
    #[arg(short = 'p')]
    pub p: f64,
    /// Replications.
    #[arg(short = 'M', default_value_t = 20_000)]
    pub replications: usize,
    #[arg(long, default_value_t = hindlab_core::clt::DEFAULT_ATOM_TOLERANCE)]
    pub tolerance: f64,
    /// Range of the coloring for the hindman family.
    #[arg(long, default_value_t = 2000)]
    pub color_n: u64,
    #[arg(long, default_value_t = 2)]
    pub colors: u8,
    /// Length of the monochromatic FS witness for the hindman family.
    #[arg(long, default_value_t = 4)]
    pub hindman_len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorAction {
    Random,
    MonoFs,
    Quadruple,
    Scan,
    Hindman,
}

#[derive(Debug, Args, Serialize)]
pub struct ColorArgs {
    #[arg(long, value_enum)]
    pub action: ColorAction,
    #[arg(short = 'N', default_value_t = 100)]
    pub n: u64,
    #[arg(short = 'c', default_value_t = 2)]
    pub c: u8,
    #[arg(short = 'L', default_value_t = 3)]
    pub len: u32,
    /// Require four distinct values in quadruples.
    #[arg(long)]
    pub strict: bool,
    /// Use this coloring (one line of base-c digits) instead of a random one.
    #[arg(long)]
    pub coloring: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(short = 'L')]
    pub len: u32,
    #[arg(short = 'N')]
    pub n: u64,
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.5)]
    pub target: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.99)]
    pub hi: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
}
