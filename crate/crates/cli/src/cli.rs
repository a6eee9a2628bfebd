use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hitwalk::numerics::C64;
use hitwalk::spread::SpreadModel;
use hitwalk::CoinSpec;

#[derive(Debug, Parser)]
#[command(
    name = "hitwalk",
    version,
    about = "Hitting times and spreading of classical and quantum walks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean hitting time over a grid of reset and noise probabilities.
    Mht(MhtArgs),
    /// Mean squared displacement of the unmeasured walk.
    Msd(MsdArgs),
    /// Reset probability that minimizes the mean hitting time.
    Optimize(OptimizeArgs),
    /// Closed-form MHT(p) for detectors at ±5.
    Reference(ReferenceArgs),
}

#[derive(Debug, Args, Clone)]
pub struct GeometryArgs {
    /// Detector positions, left then right.
    #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"], allow_hyphen_values = true, required = true)]
    pub targets: Vec<i64>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub start: i64,
    /// plus, symmetric, or two comma-separated amplitudes (e.g. `1,1i`), normalized on input.
    #[arg(long, default_value = "plus")]
    pub coin: CoinArg,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Output file; stdout when absent unless HITWALK_OUT_DIR is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Add a wall-clock timestamp to JSON records (breaks byte-identical reruns).
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Resolvent,
    Series,
    Mc,
    All,
}

#[derive(Debug, Args)]
pub struct MhtArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, conflicts_with = "p_grid")]
    pub reset_p: Option<f64>,
    /// lo:hi:step, inclusive of hi.
    #[arg(long)]
    pub p_grid: Option<Grid>,
    #[arg(long, default_value_t = 0.0, conflicts_with = "q_grid")]
    pub noise_q: f64,
    /// lo:hi:step, inclusive of hi.
    #[arg(long)]
    pub q_grid: Option<Grid>,
    #[arg(long, value_enum, default_value_t = MethodArg::Resolvent)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trajectories: usize,
    /// Step cap for Monte Carlo trajectories and the truncated series.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: usize,
    /// Survival threshold at which the series stops.
    #[arg(long, default_value_t = hitwalk::hitting::DEFAULT_TAIL_EPSILON)]
    pub tail_epsilon: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Classical,
    Quantum,
}

impl From<ModelArg> for SpreadModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Classical => SpreadModel::Classical,
            ModelArg::Quantum => SpreadModel::Quantum,
        }
    }
}

#[derive(Debug, Args)]
pub struct MsdArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value = "symmetric")]
    pub coin: CoinArg,
    /// Lattice halfwidth; defaults to the smallest that keeps the walk inside.
    #[arg(long)]
    pub halfwidth: Option<usize>,
    /// Times at which to record position distributions, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub distributions_at: Vec<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, default_value_t = 0.0)]
    pub noise_q: f64,
    /// Number of scan intervals on [0, 0.99].
    #[arg(long, default_value_t = hitwalk::optimizer::DEFAULT_GRID_RESOLUTION)]
    pub grid_resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    /// Print the integer coefficient table.
    #[arg(long)]
    pub emit_coefficients: bool,
    /// Evaluate MHT(p) at these comma-separated points.
    #[arg(long, value_delimiter = ',')]
    pub at: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timestamp: bool,
}

/// Coin as typed on the command line, kept for the input echo.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinArg {
    pub text: String,
    pub spec: CoinSpec,
}

impl FromStr for CoinArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let spec = match s {
            "plus" => CoinSpec::Plus,
            "symmetric" => CoinSpec::Symmetric,
            _ => {
                let parts: Vec<&str> = s.split(',').map(str::trim).collect();
                let [a, b] = parts[..] else {
                    return Err(format!("expected plus, symmetric or two amplitudes a,b; got {s:?}"));
                };
                let a = C64::from_str(a).map_err(|_| format!("bad amplitude {a:?}"))?;
                let b = C64::from_str(b).map_err(|_| format!("bad amplitude {b:?}"))?;
                let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(format!("coin amplitudes {s:?} have no usable norm"));
                }
                CoinSpec::Explicit([a / norm, b / norm])
            }
        };
        Ok(Self {
            text: s.to_string(),
            spec,
        })
    }
}

/// `lo:hi:step` with `hi` included when it lies on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub text: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        // Rounded to 12 decimals so 0.1·3 prints as 0.3.
        (0..=n)
            .map(|k| ((self.lo + self.step * k as f64) * 1e12).round() / 1e12)
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let nums: Vec<f64> = s
            .split(':')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number {x:?} in grid {s:?}"))
            })
            .collect::<Result<_, _>>()?;
        let [lo, hi, step] = nums[..] else {
            return Err(format!("grid must be lo:hi:step, got {s:?}"));
        };
        if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(format!("grid {s:?} needs lo <= hi and step > 0"));
        }
        Ok(Self {
            text: s.to_string(),
            lo,
            hi,
            step,
        })
    }
}
