//! `spherelight` command-line tool.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use spherelight::replay::Scenario;

#[derive(Parser)]
#[command(name = "spherelight", version, about = "Sphere-sampled lighting estimation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Grid resolution written as `WIDTHxHEIGHT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub width: usize,
    pub height: usize,
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad grid dimension {v:?}: {e}"));
        let (width, height) = (parse(w)?, parse(h)?);
        if width == 0 || height == 0 {
            return Err("grid dimensions must be positive".into());
        }
        Ok(Self { width, height })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Sampler {
    Uspc,
    Random,
    Fps,
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// Trigger threshold in [0, 1]; 0 requests on every frame.
    #[arg(long, default_value_t = spherelight::trigger::DEFAULT_THETA)]
    pub theta: f64,
    /// Neighbor pooling window N (the anchor plus N-1 neighbors).
    #[arg(long, default_value_t = spherelight::trigger::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = spherelight::sphere::DEFAULT_ANCHOR_COUNT)]
    pub anchors: usize,
    #[arg(long, default_value = "1024x512")]
    pub grid: GridSize,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic lab scenario into a recording directory.
    RecordSynthetic {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, default_value_t = 300)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        /// Anchor count stored in the manifest.
        #[arg(long, default_value_t = spherelight::sphere::DEFAULT_ANCHOR_COUNT)]
        anchors: usize,
    },
    /// Drive the client pipeline over a recording against an edge service.
    Replay {
        #[arg(long)]
        recording: PathBuf,
        /// Base URL of a running edge server.
        #[arg(long, required_unless_present = "in_process", conflicts_with = "in_process")]
        server: Option<String>,
        /// Use an edge service inside this process.
        #[arg(long)]
        in_process: bool,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Write the per-position CSV report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also run the every-frame baseline and report RMSE against it.
        #[arg(long)]
        compare_baseline: bool,
        /// Print one structured log line per position and frame.
        #[arg(long)]
        log_frames: bool,
    },
    /// Relative entropy of the sphere sampler and the downsampling baselines.
    EvalEntropy {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "uspc,random,fps")]
        samplers: Vec<Sampler>,
        /// Point budget for the downsampling baselines.
        #[arg(long, default_value_t = spherelight::sphere::DEFAULT_ANCHOR_COUNT)]
        k: usize,
        /// Evaluate every STRIDE-th frame.
        #[arg(long, default_value_t = 30)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fraction of directions where the acceleration grid disagrees with the
    /// exact nearest anchor.
    EvalMismatch {
        #[arg(long, default_value_t = spherelight::sphere::DEFAULT_ANCHOR_COUNT)]
        anchors: usize,
        #[arg(long, default_value = "1024x512")]
        grid: GridSize,
        #[arg(long, default_value_t = 1_000_000)]
        points: usize,
        /// Edge length in meters of the cube the points are drawn from.
        #[arg(long, default_value_t = 10.0)]
        cube: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Request sizes against raw RGB-D frame size.
    EvalEncoding {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long, default_value = "1024x512")]
        grid: GridSize,
    },
    /// Client-side per-frame processing time over a recording.
    BenchPipeline {
        #[arg(long)]
        recording: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Passes over the recording; timings from all passes are pooled.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
    /// Run the edge server.
    Serve {
        #[arg(long, env = "SPHERELIGHT_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Smallest accepted session anchor count.
        #[arg(long, env = "SPHERELIGHT_MIN_ANCHORS", default_value_t = *spherelight_edge::SUPPORTED_ANCHOR_COUNTS.start())]
        min_anchors: usize,
        /// Largest accepted session anchor count.
        #[arg(long, env = "SPHERELIGHT_MAX_ANCHORS", default_value_t = *spherelight_edge::SUPPORTED_ANCHOR_COUNTS.end())]
        max_anchors: usize,
        #[arg(long, env = "SPHERELIGHT_ESTIMATOR", default_value = "projector")]
        estimator: String,
        /// Restore sessions from this file at start and save them at shutdown.
        #[arg(long, env = "SPHERELIGHT_SNAPSHOT")]
        snapshot: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RecordSynthetic { scenario, frames, out, anchors } => {
            commands::record_synthetic(scenario, frames, &out, anchors)
        }
        Command::Replay { recording, server, in_process: _, pipeline, report, compare_baseline, log_frames } => {
            commands::replay(&recording, server.as_deref(), &pipeline, report.as_deref(), compare_baseline, log_frames)
        }
        Command::EvalEntropy { recording, samplers, k, stride, seed } => {
            commands::eval_entropy(&recording, &samplers, k, stride, seed)
        }
        Command::EvalMismatch { anchors, grid, points, cube, seed } => {
            commands::eval_mismatch(anchors, grid, points, cube, seed)
        }
        Command::EvalEncoding { recording, grid } => commands::eval_encoding(&recording, grid),
        Command::BenchPipeline { recording, pipeline, repeat } => {
            commands::bench_pipeline(&recording, &pipeline, repeat)
        }
        Command::Serve { listen, min_anchors, max_anchors, estimator, snapshot } => {
            commands::serve(listen, min_anchors..=max_anchors, &estimator, snapshot.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", spherelight_edge::http::reason(&e));
            ExitCode::FAILURE
        }
    }
}
