//! Command-line argument types.
//!
//! Every parameter struct is serializable: a run manifest stores the fully
//! resolved parameters, and `replay` deserializes them back.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(
    name = "mmrope",
    version,
    about = "Multimodal rotary position embedding lab"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Per-pair frequency table of one strategy.
    Alloc(AllocArgs),
    /// Semantic-preference margin over a grid of offsets.
    Margin(MarginArgs),
    /// Critical length and first margin violation.
    Critical(CriticalArgs),
    /// Rotary coordinates of a text/video/text layout.
    Indices(IndicesArgs),
    /// Synthetic needle-in-a-haystack sweep.
    Niah(NiahArgs),
    /// Index gaps introduced by flattening frames into one sequence.
    Distortion(DistortionArgs),
    /// Fraction of negative cosines over a log-spaced frequency range.
    Pneg(PnegArgs),
    /// Rotary score matrix of random vectors placed on a layout.
    Scores(ScoresArgs),
    /// Re-runs the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Alloc(_) => "alloc",
            Command::Margin(_) => "margin",
            Command::Critical(_) => "critical",
            Command::Indices(_) => "indices",
            Command::Niah(_) => "niah",
            Command::Distortion(_) => "distortion",
            Command::Pneg(_) => "pneg",
            Command::Scores(_) => "scores",
            Command::Replay(_) => "replay",
        }
    }

    pub fn common(&self) -> Option<&Common> {
        match self {
            Command::Alloc(a) => Some(&a.common),
            Command::Margin(a) => Some(&a.common),
            Command::Critical(a) => Some(&a.common),
            Command::Indices(a) => Some(&a.common),
            Command::Niah(a) => Some(&a.common),
            Command::Distortion(a) => Some(&a.common),
            Command::Pneg(a) => Some(&a.common),
            Command::Scores(a) => Some(&a.common),
            Command::Replay(_) => None,
        }
    }

    pub fn common_mut(&mut self) -> Option<&mut Common> {
        match self {
            Command::Alloc(a) => Some(&mut a.common),
            Command::Margin(a) => Some(&mut a.common),
            Command::Critical(a) => Some(&mut a.common),
            Command::Indices(a) => Some(&mut a.common),
            Command::Niah(a) => Some(&mut a.common),
            Command::Distortion(a) => Some(&mut a.common),
            Command::Pneg(a) => Some(&mut a.common),
            Command::Scores(a) => Some(&mut a.common),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// RNG seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV path; defaults to `<command>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Head dimension.
    #[arg(long, default_value_t = 128)]
    pub d: usize,
    /// Rotary base.
    #[arg(long, default_value_t = 10_000.0)]
    pub base: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Full,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialArg {
    FrameLocal,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AllocArgs {
    #[command(flatten)]
    pub common: Common,
    /// vanilla, mrope, videorope, hope or hope_x.
    #[arg(long)]
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MarginArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "hope")]
    pub strategy: String,
    /// Explicit Δt values; overrides --dt-max/--dt-step.
    #[arg(long, value_delimiter = ',')]
    pub dts: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    pub dt_max: u64,
    #[arg(long, default_value_t = 1)]
    pub dt_step: u64,
    #[arg(long, value_delimiter = ',')]
    pub dxs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub dx_max: u64,
    #[arg(long, default_value_t = 1)]
    pub dx_step: u64,
    #[arg(long, value_delimiter = ',')]
    pub dys: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub dy_max: u64,
    #[arg(long, default_value_t = 1)]
    pub dy_step: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    /// Monte-Carlo trials; closed form when absent.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_delta2: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CriticalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Strategy whose lowest temporal frequency is analysed.
    #[arg(
        long,
        conflicts_with = "theta_min",
        required_unless_present = "theta_min"
    )]
    pub strategy: Option<String>,
    /// A single temporal frequency instead of a strategy.
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub l_max: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LayoutArgs {
    #[arg(long, default_value_t = 2)]
    pub pre_text: u64,
    #[arg(long, default_value_t = 3)]
    pub frames: u64,
    #[arg(long, default_value_t = 1)]
    pub height: u64,
    #[arg(long, default_value_t = 1)]
    pub width: u64,
    #[arg(long, default_value_t = 2)]
    pub post_text: u64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IndicesArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct NiahArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "vanilla,mrope,videorope,hope"
    )]
    pub strategies: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "256,1024,4096")]
    pub lengths: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    pub depths: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_delta2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 1)]
    pub height: u64,
    #[arg(long, default_value_t = 1)]
    pub width: u64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub pre_text: u64,
    #[arg(long, default_value_t = 0)]
    pub post_text: u64,
    #[arg(long, value_enum, default_value_t = SpatialArg::FrameLocal)]
    pub spatial: SpatialArg,
    /// Place every token at the origin.
    #[arg(long)]
    pub collapse_positions: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DistortionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 32)]
    pub h_max: u64,
    #[arg(long, default_value_t = 32)]
    pub w_max: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PnegArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 10_000)]
    pub length: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub theta_lo: f64,
    #[arg(long, default_value_t = 1e4)]
    pub theta_hi: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScoresArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "hope")]
    pub strategy: String,
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write the replayed CSV here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
