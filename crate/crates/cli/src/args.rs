use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depth_refine::{Implementation, ScheduleVariant};

#[derive(Debug, Parser)]
#[command(name = "depth-refine", version, about = "Depth completion refinement tools")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refine a dense depth map by spatial propagation.
    Refine(RefineArgs),
    /// Blend two depth predictions with confidence logits.
    Fuse(FuseArgs),
    /// Back-project a depth map into an X/Y/Z position map.
    Backproject(BackprojectArgs),
    /// Build a normalized affinity field from an RGB guide image.
    GenAffinity(GenAffinityArgs),
    /// Score a prediction against ground truth.
    Eval(EvalArgs),
    /// Time the naive and accelerated propagation kernels.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long, default_value = "c2", value_parser = parse_schedule)]
    pub schedule: ScheduleVariant,

    #[arg(long, default_value_t = 12)]
    pub iterations: usize,

    /// Affinity field container.
    #[arg(long)]
    pub affinity: PathBuf,

    /// Dense initial depth. Without it the sparse input is filled by nearest valid neighbor.
    #[arg(long)]
    pub coarse: Option<PathBuf>,

    /// Sparse measurements (depth PNG).
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Reset pixels valid in --input after every iteration.
    #[arg(long)]
    pub anchor: bool,

    #[arg(long = "impl", default_value = "accelerated", value_parser = parse_impl)]
    pub implementation: Implementation,

    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Color-dominant depth PNG.
    #[arg(long)]
    pub cd: PathBuf,
    /// Depth-dominant depth PNG.
    #[arg(long)]
    pub dd: PathBuf,
    /// Single-plane container of color-dominant confidence logits.
    #[arg(long)]
    pub conf_cd: PathBuf,
    /// Single-plane container of depth-dominant confidence logits.
    #[arg(long)]
    pub conf_dd: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct IntrinsicsArgs {
    #[arg(long)]
    pub fx: Option<f64>,
    #[arg(long)]
    pub fy: Option<f64>,
    #[arg(long)]
    pub u0: Option<f64>,
    #[arg(long)]
    pub v0: Option<f64>,
    /// KITTI calibration file with a P2 row.
    #[arg(long, conflicts_with_all = ["fx", "fy", "u0", "v0"])]
    pub calib: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BackprojectArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[command(flatten)]
    pub intrinsics: IntrinsicsArgs,
    /// Min-pool the depth by this factor first (intrinsics are scaled to match).
    #[arg(long, default_value_t = 1)]
    pub pool: usize,
    /// Output container with X, Y, Z planes.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenAffinityArgs {
    /// Guide image (any format the image crate reads; converted to RGB in [0, 1]).
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f32,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchImpl {
    Naive,
    Accelerated,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Grid as WIDTHxHEIGHT.
    #[arg(long, default_value = "1216x352")]
    pub shape: GridShape,
    #[arg(long, default_value = "c1", value_parser = parse_schedule)]
    pub schedule: ScheduleVariant,
    #[arg(long, default_value_t = 12)]
    pub iterations: usize,
    #[arg(long = "impl", value_enum, default_value = "both")]
    pub implementation: BenchImpl,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the results as a JSON array.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
}

impl FromStr for GridShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad dimension '{v}': {e}"))
        };
        Ok(GridShape {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

fn parse_schedule(s: &str) -> Result<ScheduleVariant, String> {
    s.parse().map_err(|e: depth_refine::Error| e.to_string())
}

fn parse_impl(s: &str) -> Result<Implementation, String> {
    s.parse()
}
