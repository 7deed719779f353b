use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rtw::align::AlignConfig;
use rtw::warpnet::WarpKind;
use rtw::ManifoldDescriptor;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser, Serialize)]
#[command(name = "rtw", version, about = "Temporal alignment of signals on Riemannian manifolds")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic signal set.
    Generate(GenerateArgs),
    /// Align a signal set with a learned warping network.
    Align(AlignArgs),
    /// Run a classical alignment baseline.
    Baseline(BaselineArgs),
    /// Estimate per-class means on a training set and classify a test set.
    Classify(ClassifyArgs),
    /// Evaluate an alignment against its inputs.
    Eval(EvalArgs),
    /// Repeat a benchmark protocol over seeds and aggregate the metrics.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerateKind {
    /// Randomly warped copies of a base signal.
    Inverted,
    /// Two separable classes on R^1.
    TwoClass,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    pub kind: GenerateKind,
    /// Geometry of the inverted set (default sphere:1); two-class sets are always euclidean:1.
    #[arg(long)]
    pub manifold: Option<String>,
    /// Number of signals (per class for two-class).
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub sinc_window: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_plots: bool,
}

/// Alignment options shared by `align`, `classify` and `bench`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct AlignOpts {
    #[arg(long, default_value_t = 256)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub sinc_window: usize,
    #[arg(long, default_value_t = 5)]
    pub loss_window: usize,
    #[arg(long, default_value_t = 5)]
    pub loss_step: usize,
    /// `Z = z_factor * T_max`; defaults to the number of signals, capped at 8.
    #[arg(long)]
    pub z_factor: Option<usize>,
    /// `mlp`, `mlp-full` or `sine:K`.
    #[arg(long, default_value = "mlp")]
    pub warp: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl AlignOpts {
    pub fn warp_kind(&self) -> CliResult<WarpKind> {
        match self.warp.as_str() {
            "mlp" => Ok(WarpKind::mlp_small()),
            "mlp-full" => Ok(WarpKind::mlp_full()),
            other => {
                let k = other
                    .strip_prefix("sine:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k > 0)
                    .ok_or_else(|| CliError::config(format!("cli: unknown warp '{other}', expected mlp, mlp-full or sine:K")))?;
                Ok(WarpKind::Sine { k })
            }
        }
    }

    pub fn config(&self) -> CliResult<AlignConfig> {
        let mut cfg = AlignConfig {
            epochs: self.epochs,
            lr: self.lr,
            lambda: self.lambda,
            z_factor: self.z_factor,
            seed: self.seed,
            warp: self.warp_kind()?,
            ..Default::default()
        };
        cfg.sinc.window = self.sinc_window;
        cfg.loss.window = self.loss_window;
        cfg.loss.step = self.loss_step;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    /// Manifest of the signal set to align.
    #[arg(long)]
    pub input: PathBuf,
    /// Expected manifold; checked against the manifest when given.
    #[arg(long)]
    pub manifold: Option<String>,
    #[command(flatten)]
    pub opts: AlignOpts,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    /// Pairwise DTW costs between all signals.
    Dtw,
    /// Joint DTW over the lattice of all signals.
    Mmddtw,
    /// Iterative pairwise DTW towards a running reference.
    Pdtw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Geodesic,
    Cholesky,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    pub kind: BaselineKind,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub manifold: Option<String>,
    /// Node cost for mmddtw.
    #[arg(long, value_enum, default_value_t = VariantArg::Geodesic)]
    pub variant: VariantArg,
    /// Fold order seed for p-DTW; input order when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ground-truth signal manifest enabling restoration accuracy.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroidMethod {
    /// Per-index means of the unaligned class members.
    Naive,
    /// Means of the RTW-aligned class members.
    Rtw,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_enum, default_value_t = CentroidMethod::Both)]
    pub method: CentroidMethod,
    #[command(flatten)]
    pub opts: AlignOpts,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_plots: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Manifest of the unaligned inputs.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory of `align` or `baseline`, holding `warped/` and `mean/`.
    #[arg(long)]
    pub aligned: PathBuf,
    /// Ground-truth signal manifest; defaults to `base/manifest.json` next to the input.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Inverted warping on S^1, four signals of length 100, against the sine-basis aligner.
    #[value(name = "s1-n4")]
    #[serde(rename = "s1-n4")]
    S1N4,
    /// Inverted warping on S^1, thirty signals of length 100, against p-DTW.
    #[value(name = "s1-n30")]
    #[serde(rename = "s1-n30")]
    S1N30,
    /// Planar-robot manipulability on Spd(2), three signals of length 50, against mmddtw.
    SpdRobot,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    pub protocol: Protocol,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Override the protocol's signal count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the protocol's signal length.
    #[arg(long)]
    pub len: Option<usize>,
    /// Sine components of the comparison aligner in the s1-n4 protocol.
    #[arg(long, default_value_t = 5)]
    pub ttw_k: usize,
    #[command(flatten)]
    pub opts: AlignOpts,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_plots: bool,
}

pub fn parse_manifold(s: &str) -> CliResult<ManifoldDescriptor> {
    Ok(s.parse()?)
}
