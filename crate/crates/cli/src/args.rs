use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hdrcloudseg_core::color::ChannelId;
use hdrcloudseg_core::eval::{ImageType, Method};
use hdrcloudseg_core::segment::Neighborhood;
use hdrcloudseg_core::tonemap::TonemapMethod;

use crate::config::CurveScope;

/// HDR fusion, tone mapping, sky/cloud segmentation and evaluation.
#[derive(Debug, Parser)]
#[command(name = "hdrcloudseg", version)]
pub struct Cli {
    /// JSON config; flags given on the command line take precedence.
    #[arg(long, global = true, env = "HDRCLOUDSEG_CONFIG")]
    pub config: Option<PathBuf>,

    /// Dataset directory (containing manifest.json) or manifest file.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for per-sample processing.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Seed for randomized commands (synth); the pipelines are deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(flatten)]
    pub params: ParamArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Parameter overrides shared by every command.
#[derive(Debug, Default, Clone, Args)]
#[command(next_help_heading = "Parameters")]
pub struct ParamArgs {
    /// Seeding threshold, in (0.5, 1).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Smoothness weight of the graph cut.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Boundary contrast scale; estimated per image when absent.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// 4 or 8.
    #[arg(long, global = true)]
    pub neighborhood: Option<Neighborhood>,
    #[arg(long, global = true)]
    pub fuzzifier: Option<f64>,
    #[arg(long, global = true)]
    pub fcm_tol: Option<f64>,
    #[arg(long, global = true)]
    pub fcm_max_iter: Option<usize>,

    #[arg(long, global = true)]
    pub long_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub souza_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub li_std_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub li_fixed_threshold: Option<f64>,

    /// clahe or photographic.
    #[arg(long, global = true)]
    pub tonemap: Option<TonemapMethod>,
    #[arg(long, global = true)]
    pub clip_limit: Option<f64>,
    #[arg(long, global = true)]
    pub tiles: Option<u32>,
    /// Photographic key value.
    #[arg(long, global = true)]
    pub key: Option<f64>,

    /// Load this response curve CSV instead of recovering one.
    #[arg(long, global = true)]
    pub response: Option<PathBuf>,
    /// Recover one curve for the dataset or one per stack.
    #[arg(long, global = true, value_enum)]
    pub response_scope: Option<CurveScope>,
    /// Grid locations sampled for response recovery.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Smoothness weight of response recovery.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse each stack into a radiance map (PFM) plus a tone-mapped PNG.
    Fuse,
    /// Tone-map a PFM file, or every stack of the dataset.
    Tonemap {
        /// Radiance map to tone-map instead of the dataset.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output PNG for --input (default: <out>/<stem>.png).
        #[arg(long, requires = "input")]
        output: Option<PathBuf>,
    },
    /// Segment every sample, writing masks and per-image JSON reports.
    Segment {
        /// proposed, long, souza, mantelli or li.
        #[arg(long)]
        method: Option<Method>,
        /// ldr-mid, tonemapped or hdr.
        #[arg(long)]
        image_type: Option<ImageType>,
        /// Channel for the proposed method, c1..c16.
        #[arg(long)]
        channel: Option<ChannelId>,
    },
    /// Benchmark tables, ROC sweeps, channel studies and saturation counts.
    Evaluate {
        #[command(subcommand)]
        what: EvalCommand,
    },
    /// Recover the camera response curve.
    Respond,
    /// Write a synthetic dataset of sky scenes with ground truth.
    Synth {
        #[arg(long, default_value_t = 10)]
        count: u32,
        #[arg(long, default_value_t = 128)]
        width: u32,
        #[arg(long, default_value_t = 128)]
        height: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Every method on every image type.
    Table,
    /// Proposed method on radiance maps over a grid of seeding thresholds.
    Roc {
        /// start:stop:step or a comma list.
        #[arg(long, value_parser = AlphaGrid::parse)]
        alphas: Option<AlphaGrid>,
    },
    /// Proposed method on each color channel.
    Channels {
        /// Comma-separated channel list, e.g. c1,c13,c15.
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<ChannelId>>,
        #[arg(long)]
        image_type: Option<ImageType>,
    },
    /// Saturated pixel counts per exposure and after fusion.
    Saturation,
}

/// Seeding thresholds given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaGrid(pub Vec<f64>);

impl AlphaGrid {
    fn parse(s: &str) -> Result<Self, String> {
        crate::config::parse_alphas(s).map(AlphaGrid)
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fuse => "fuse",
            Command::Tonemap { .. } => "tonemap",
            Command::Segment { .. } => "segment",
            Command::Evaluate { what } => match what {
                EvalCommand::Table => "evaluate-table",
                EvalCommand::Roc { .. } => "evaluate-roc",
                EvalCommand::Channels { .. } => "evaluate-channels",
                EvalCommand::Saturation => "evaluate-saturation",
            },
            Command::Respond => "respond",
            Command::Synth { .. } => "synth",
        }
    }
}
