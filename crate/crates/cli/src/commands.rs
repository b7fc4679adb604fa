use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::Arc;

use spherelight::client::PipelineConfig;
use spherelight::metrics::{
    cube_directions, mismatch_rate, sampler_entropy, EncodingStats, EvalReport, Percentiles, Sampler as CoreSampler,
};
use spherelight::replay::{self, compare_lighting, read_recording, EdgeClient, Recording, ReplayConfig, Scenario};
use spherelight::sampling::{backproject, sphere_sample_at, translate_to};
use spherelight::sphere::{AccelerationGrid, AnchorSet, DEFAULT_NEIGHBOR_CAPACITY};
use spherelight::timing::Stopwatch;
use spherelight::trigger::TriggerConfig;
use spherelight::{estimator::ShProjector, Error, Result};
use spherelight_edge::{HttpEdge, InProcessEdge, SessionStore};

use crate::{GridSize, PipelineArgs, Sampler};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

fn anchors_and_grid(count: usize, grid: GridSize) -> Result<(Arc<AnchorSet>, Arc<AccelerationGrid>)> {
    let anchors = AnchorSet::generate(count, DEFAULT_NEIGHBOR_CAPACITY)?;
    let grid = AccelerationGrid::build(&anchors, grid.width, grid.height)?;
    Ok((Arc::new(anchors), Arc::new(grid)))
}

fn print_report(report: &EvalReport) {
    print!("{}", report.to_csv());
}

pub fn record_synthetic(scenario: Scenario, frames: usize, out: &Path, anchors: usize) -> Result<()> {
    if frames == 0 {
        return Err(Error::InvalidArgument("--frames must be positive".into()));
    }
    let scene = replay::SyntheticScene::lab(scenario, frames);
    let watch = Stopwatch::start();
    let recording = replay::record_synthetic(&scene, anchors)?;
    replay::write_recording(&recording, out)?;
    eprintln!(
        "wrote {} frames of {} ({}x{}) to {} in {:.0} ms",
        frames,
        scene.label,
        scene.intrinsics.width,
        scene.intrinsics.height,
        out.display(),
        watch.elapsed_ms()
    );
    Ok(())
}

fn replay_config(args: &PipelineArgs) -> Result<ReplayConfig> {
    let (anchors, grid) = anchors_and_grid(args.anchors, args.grid)?;
    Ok(ReplayConfig {
        pipeline: PipelineConfig { trigger: TriggerConfig::new(args.theta, args.window)?, ..Default::default() },
        anchors,
        grid,
        ground_truth: true,
    })
}

fn run_replay(recording: &Recording, server: Option<&str>, config: &ReplayConfig) -> Result<replay::ReplayReport> {
    let mut edge: Box<dyn EdgeClient> = match server {
        Some(url) => Box::new(HttpEdge::new(url)),
        None => Box::new(InProcessEdge::new(Arc::new(SessionStore::default()))),
    };
    replay::replay(recording, edge.as_mut(), config)
}

pub fn replay(
    recording: &Path,
    server: Option<&str>,
    args: &PipelineArgs,
    report_path: Option<&Path>,
    compare_baseline: bool,
    log_frames: bool,
) -> Result<()> {
    let recording = read_recording(recording)?;
    let config = replay_config(args)?;
    let report = run_replay(&recording, server, &config)?;
    if log_frames {
        for r in &report.records {
            println!(
                "frame={} position={} outcome={} max_pooled={:.4} bytes={}",
                r.frame, r.position_index, r.outcome, r.max_pooled, r.bytes_sent
            );
        }
    }
    print!("{}", report.summary());
    // Without a synthetic scene there is no ground truth; the every-frame
    // run is the reference instead.
    if compare_baseline || recording.manifest.scene.is_none() {
        let mut base = config.clone();
        base.pipeline.trigger.theta = 0.0;
        base.ground_truth = false;
        let baseline = run_replay(&recording, server, &base)?;
        match compare_lighting(&report, &baseline) {
            Some((mean, std)) => println!("  rmse vs every-frame baseline {mean:.6} ± {std:.6}"),
            None => println!("  rmse vs every-frame baseline n/a"),
        }
    }
    if let Some(path) = report_path {
        write_file(path, &report.to_csv())?;
    }
    Ok(())
}

pub fn eval_entropy(recording: &Path, samplers: &[Sampler], k: usize, stride: usize, seed: u64) -> Result<()> {
    if k == 0 || stride == 0 {
        return Err(Error::InvalidArgument("--k and --stride must be positive".into()));
    }
    let recording = read_recording(recording)?;
    let (anchors, grid) = anchors_and_grid(recording.manifest.anchor_count, GridSize { width: 1024, height: 512 })?;
    let samplers: Vec<CoreSampler> = samplers
        .iter()
        .map(|s| match s {
            Sampler::Uspc => CoreSampler::Sphere,
            Sampler::Random => CoreSampler::Random,
            Sampler::Fps => CoreSampler::Farthest,
        })
        .collect();
    let mut sums = vec![Vec::new(); samplers.len()];
    for (i, frame) in recording.frames.iter().enumerate().step_by(stride) {
        let cloud = backproject(&frame.rgb, &frame.depth, &recording.manifest.intrinsics, &frame.pose)?;
        for position in &frame.positions {
            let centered = translate_to(&cloud, position);
            if centered.directions_from(&spherelight::Vec3::zeros()).is_empty() {
                continue;
            }
            for (s, sampler) in samplers.iter().enumerate() {
                sums[s].push(sampler_entropy(*sampler, &centered, &anchors, &grid, k, seed ^ i as u64)?);
            }
        }
    }
    let mut report = EvalReport::default();
    for (sampler, values) in samplers.iter().zip(&sums) {
        let (mean, std) = spherelight::metrics::mean_std(values)
            .ok_or_else(|| Error::InvalidArgument("recording has no observable frames".into()))?;
        report.push(format!("relative_entropy_{}", sampler.name()), mean, "fraction");
        report.push(format!("relative_entropy_{}_std", sampler.name()), std, "fraction");
    }
    report.push("observations", sums.first().map_or(0, Vec::len) as f64, "count");
    print_report(&report);
    Ok(())
}

pub fn eval_mismatch(anchors: usize, grid: GridSize, points: usize, cube: f64, seed: u64) -> Result<()> {
    if points == 0 || !(cube.is_finite() && cube > 0.0) {
        return Err(Error::InvalidArgument("--points and --cube must be positive".into()));
    }
    let watch = Stopwatch::start();
    let set = AnchorSet::lattice(anchors)?;
    let g = AccelerationGrid::build(&set, grid.width, grid.height)?;
    let build_ms = watch.elapsed_ms();
    let dirs = cube_directions(points, cube, seed);
    let rate = mismatch_rate(&set, &g, &dirs)?;
    let mut report = EvalReport::default();
    report.push("mismatch_rate", rate, "fraction");
    report.push("matched_rate", 1.0 - rate, "fraction");
    report.push("grid_build_ms", build_ms, "ms");
    report.push("total_ms", watch.elapsed_ms(), "ms");
    print_report(&report);
    Ok(())
}

pub fn eval_encoding(recording: &Path, grid: GridSize) -> Result<()> {
    let recording = read_recording(recording)?;
    let (anchors, grid) = anchors_and_grid(recording.manifest.anchor_count, grid)?;
    let mut entries = Vec::new();
    for frame in &recording.frames {
        let cloud = backproject(&frame.rgb, &frame.depth, &recording.manifest.intrinsics, &frame.pose)?;
        for p in &frame.positions {
            entries.push(sphere_sample_at(&cloud, p, &anchors, &grid)?.initialized_count());
        }
    }
    let stats = EncodingStats::from_entry_counts(&entries, recording.manifest.intrinsics.pixel_count())
        .ok_or_else(|| Error::InvalidArgument("recording has no estimation positions".into()))?;
    let mut report = EvalReport::default();
    report.push("packets", stats.packets as f64, "count");
    report.push("entry_bytes", spherelight::codec::ENTRY_LEN as f64, "octets");
    report.push("mean_entries", stats.mean_entries, "count");
    report.push("mean_request_bytes", stats.mean_bytes, "octets");
    report.push("max_request_bytes", stats.max_bytes as f64, "octets");
    report.push("full_request_bytes", spherelight::codec::packet_len(anchors.len()) as f64, "octets");
    report.push("raw_frame_bytes", stats.raw_frame_bytes as f64, "octets");
    report.push("size_reduction", stats.reduction(), "fraction");
    report.push("response_bytes", spherelight::codec::SH_PACKET_LEN as f64, "octets");
    print_report(&report);
    Ok(())
}

pub fn bench_pipeline(recording: &Path, args: &PipelineArgs, repeat: usize) -> Result<()> {
    if repeat == 0 {
        return Err(Error::InvalidArgument("--repeat must be positive".into()));
    }
    let recording = read_recording(recording)?;
    let mut config = replay_config(args)?;
    config.ground_truth = false;
    let mut timings = Vec::new();
    for _ in 0..repeat {
        timings.extend(run_replay(&recording, None, &config)?.timings);
    }
    let k = &recording.manifest.intrinsics;
    let mut report = EvalReport::default();
    report.push("frames", timings.len() as f64, "count");
    report.push("width", k.width as f64, "px");
    report.push("height", k.height as f64, "px");
    for (name, get) in spherelight::client::StageTimings::STAGES {
        let name = if name == "total" { "frame" } else { name };
        let p = Percentiles::of(&timings.iter().map(get).collect::<Vec<_>>()).expect("at least one frame");
        report.push(format!("{name}_p50_ms"), p.p50, "ms");
        report.push(format!("{name}_p95_ms"), p.p95, "ms");
    }
    print_report(&report);
    Ok(())
}

pub fn serve(listen: SocketAddr, supported: RangeInclusive<usize>, estimator: &str, snapshot: Option<&Path>) -> Result<()> {
    if supported.is_empty() || *supported.start() < 2 {
        return Err(Error::InvalidArgument("anchor count range must be nonempty and start at 2 or more".into()));
    }
    let estimator = match estimator {
        "projector" => Arc::new(ShProjector),
        other => return Err(Error::InvalidArgument(format!("unknown estimator {other:?} (available: projector)"))),
    };
    let store = Arc::new(SessionStore::new(estimator, supported));
    if let Some(path) = snapshot.filter(|p| p.exists()) {
        store.load_snapshot(path)?;
        tracing::info!(path = %path.display(), "restored sessions");
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen).await?;
        tracing::info!(addr = %listener.local_addr()?, estimator = store.estimator_name(), "edge server listening");
        // Announce the bound address on stdout so callers binding port 0 can find it.
        println!("listening on http://{}", listener.local_addr()?);
        let _ = std::io::stdout().flush();
        spherelight_edge::serve(listener, store.clone(), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    if let Some(path) = snapshot {
        store.save_snapshot(path)?;
        tracing::info!(path = %path.display(), "saved sessions");
    }
    Ok(())
}
