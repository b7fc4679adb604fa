use std::fmt::Write as _;
use std::sync::Arc;

use crate::client::{ClientPipeline, Outcome, PipelineConfig, StageTimings};
use crate::estimator::{sh_rmse, ShCoefficients};
use crate::metrics::{mean_std, Percentiles};
use crate::sphere::{AccelerationGrid, AnchorSet};
use crate::{Result, Vec3};

use super::recording::Recording;
use super::scene::ground_truth_sh;

/// Client side of the edge protocol.
pub trait EdgeClient {
    fn create_session(&mut self, anchor_count: usize) -> Result<String>;
    fn register_position(&mut self, session_id: &str, world_position: Vec3) -> Result<u32>;
    fn estimate(&mut self, session_id: &str, position_id: u32, packet: &[u8]) -> Result<ShCoefficients>;
}

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    pub pipeline: PipelineConfig,
    pub anchors: Arc<AnchorSet>,
    pub grid: Arc<AccelerationGrid>,
    /// Score displayed lighting against the scene's ground truth when the
    /// recording carries one.
    pub ground_truth: bool,
}

/// What the client would render with at one frame for one position.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub position_index: usize,
    pub outcome: &'static str,
    pub max_pooled: f64,
    pub bytes_sent: usize,
    pub lighting: Option<ShCoefficients>,
    pub rmse_ground_truth: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositionSummary {
    pub position_id: u32,
    pub frames: usize,
    pub triggered: usize,
    pub buffered: usize,
    pub skipped_inactive: usize,
    pub failed: usize,
    pub request_errors: usize,
    pub bytes_sent: usize,
    pub rmse_mean: Option<f64>,
    pub rmse_std: Option<f64>,
}

impl PositionSummary {
    fn pct(&self, n: usize) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.frames as f64
        }
    }

    pub fn triggered_pct(&self) -> f64 {
        self.pct(self.triggered)
    }

    pub fn buffered_pct(&self) -> f64 {
        self.pct(self.buffered)
    }

    pub fn skipped_pct(&self) -> f64 {
        self.pct(self.skipped_inactive)
    }

    pub fn failed_pct(&self) -> f64 {
        self.pct(self.failed)
    }
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub scenario: String,
    pub theta: f64,
    pub window: usize,
    pub frames: usize,
    pub positions: Vec<PositionSummary>,
    pub records: Vec<FrameRecord>,
    /// Per-frame client timings, not part of the deterministic CSV.
    pub timings: Vec<StageTimings>,
}

pub const REPORT_CSV_HEADER: &str = "scenario,theta,window,position_id,frames,triggered,buffered,skipped_inactive,failed,request_errors,triggered_pct,buffered_pct,skipped_pct,failed_pct,bytes_sent,rmse_gt_mean,rmse_gt_std";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl ReplayReport {
    /// Deterministic per-position CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_CSV_HEADER);
        s.push('\n');
        for p in &self.positions {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{},{},{}",
                self.scenario,
                self.theta,
                self.window,
                p.position_id,
                p.frames,
                p.triggered,
                p.buffered,
                p.skipped_inactive,
                p.failed,
                p.request_errors,
                p.triggered_pct(),
                p.buffered_pct(),
                p.skipped_pct(),
                p.failed_pct(),
                p.bytes_sent,
                opt(p.rmse_mean),
                opt(p.rmse_std),
            );
        }
        s
    }

    /// Percentiles of the per-frame client processing time.
    pub fn frame_time_percentiles(&self) -> Option<Percentiles> {
        Percentiles::of(&self.timings.iter().map(StageTimings::total_ms).collect::<Vec<_>>())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "scenario {} | theta {} | window {} | {} frames\n",
            self.scenario, self.theta, self.window, self.frames
        );
        for p in &self.positions {
            let _ = writeln!(
                s,
                "  position {}: triggered {:.2}% buffered {:.2}% inactive {:.2}% failed {:.2}% | {} bytes sent | rmse vs ground truth {}",
                p.position_id,
                p.triggered_pct(),
                p.buffered_pct(),
                p.skipped_pct(),
                p.failed_pct(),
                p.bytes_sent,
                match (p.rmse_mean, p.rmse_std) {
                    (Some(m), Some(sd)) => format!("{m:.4} ± {sd:.4}"),
                    _ => "n/a".to_string(),
                }
            );
        }
        for (name, get) in StageTimings::STAGES {
            if let Some(p) = Percentiles::of(&self.timings.iter().map(get).collect::<Vec<_>>()) {
                let _ = writeln!(s, "  {name:<11} p50 {:.3} ms  p95 {:.3} ms", p.p50, p.p95);
            }
        }
        s
    }

    /// Displayed lighting of one position, per frame.
    pub fn lighting_series(&self, position_index: usize) -> Vec<Option<ShCoefficients>> {
        let mut out = vec![None; self.frames];
        for r in self.records.iter().filter(|r| r.position_index == position_index) {
            out[r.frame] = r.lighting;
        }
        out
    }
}

/// Mean and standard deviation of the per-frame SH RMSE between two runs
/// over frames where both have lighting, pooled across positions.
pub fn compare_lighting(a: &ReplayReport, b: &ReplayReport) -> Option<(f64, f64)> {
    let positions = a.positions.len().min(b.positions.len());
    let mut errs = Vec::new();
    for p in 0..positions {
        for (x, y) in a.lighting_series(p).iter().zip(b.lighting_series(p)) {
            if let (Some(x), Some(y)) = (x, y) {
                errs.push(sh_rmse(x, &y));
            }
        }
    }
    mean_std(&errs)
}

/// Feeds every frame through a fresh client pipeline, sends triggered
/// packets to `edge`, and tracks the lighting the client would display.
/// Request failures are counted per position, never fatal.
pub fn replay<C: EdgeClient + ?Sized>(recording: &Recording, edge: &mut C, config: &ReplayConfig) -> Result<ReplayReport> {
    let manifest = &recording.manifest;
    if manifest.anchor_count != config.anchors.len() {
        return Err(crate::Error::invalid(format!(
            "recording expects {} anchors, replay configured for {}",
            manifest.anchor_count,
            config.anchors.len()
        )));
    }
    let mut pipeline =
        ClientPipeline::new(config.anchors.clone(), config.grid.clone(), manifest.intrinsics, config.pipeline)?;
    let session = edge.create_session(config.anchors.len())?;
    let scene = manifest.scene.as_ref().filter(|_| config.ground_truth);

    let mut summaries: Vec<PositionSummary> = Vec::new();
    let mut server_ids: Vec<u32> = Vec::new();
    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut rmse: Vec<Vec<f64>> = Vec::new();

    for (index, frame) in recording.frames.iter().enumerate() {
        while server_ids.len() < frame.positions.len() {
            let world = frame.positions[server_ids.len()];
            let id = edge.register_position(&session, world)?;
            pipeline.add_position(id, world);
            server_ids.push(id);
            summaries.push(PositionSummary { position_id: id, ..Default::default() });
            rmse.push(Vec::new());
        }

        let report = pipeline.process_frame(frame)?;
        timings.push(report.timings);
        for o in &report.outcomes {
            let summary = &mut summaries[o.position_index];
            summary.frames += 1;
            match &o.outcome {
                Outcome::SkippedInactive => summary.skipped_inactive += 1,
                Outcome::Buffered => summary.buffered += 1,
                Outcome::Failed(_) => summary.failed += 1,
                Outcome::Triggered(packet) => {
                    summary.triggered += 1;
                    summary.bytes_sent += packet.len();
                    match edge.estimate(&session, o.position_id, packet) {
                        Ok(sh) => {
                            pipeline.position_mut(o.position_index).apply_response(frame.timestamp, sh, frame.ambient);
                        }
                        Err(_) => summary.request_errors += 1,
                    }
                }
            }
            let buffers = &pipeline.positions()[o.position_index];
            let lighting = buffers.lighting(&frame.ambient);
            let gt_err = match (scene, &lighting) {
                (Some(scene), Some(sh)) => {
                    let gt = ground_truth_sh(scene, &buffers.world_position, index)?;
                    let e = sh_rmse(sh, &gt);
                    rmse[o.position_index].push(e);
                    Some(e)
                }
                _ => None,
            };
            records.push(FrameRecord {
                frame: index,
                position_index: o.position_index,
                outcome: o.outcome.label(),
                max_pooled: o.max_pooled,
                bytes_sent: o.bytes_sent(),
                lighting,
                rmse_ground_truth: gt_err,
            });
        }
    }

    for (summary, errs) in summaries.iter_mut().zip(&rmse) {
        if let Some((m, s)) = mean_std(errs) {
            summary.rmse_mean = Some(m);
            summary.rmse_std = Some(s);
        }
    }

    Ok(ReplayReport {
        scenario: manifest.scenario.clone(),
        theta: config.pipeline.trigger.theta,
        window: config.pipeline.trigger.window,
        frames: recording.frames.len(),
        positions: summaries,
        records,
        timings,
    })
}
