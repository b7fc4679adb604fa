//! Per-frame client pipeline.
//!
//! For every active estimation position a frame goes through:
//! back-project, sphere-sample around the position, merge into the
//! temporary buffer, compare against the persistent buffer, and on a
//! trigger merge into the persistent buffer and encode the temporary
//! buffer for the edge.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::estimator::ShCoefficients;
use crate::sampling::{backproject, sphere_sample_at, CameraIntrinsics, CameraPose, Rgb, UnitSphereCloud};
use crate::sphere::{AccelerationGrid, AnchorSet};
use crate::timing::Stopwatch;
use crate::trigger::{should_trigger, TriggerConfig};
use crate::{Error, Result, Vec3};

/// Ambient light sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientSample {
    /// Lux.
    pub intensity: f64,
    pub color: [f64; 3],
}

/// One captured frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    /// Seconds.
    pub timestamp: f64,
    /// Row-major, `[0, 1]`.
    pub rgb: Vec<Rgb>,
    /// Row-major, meters; 0 marks a missing sample.
    pub depth: Vec<f32>,
    pub pose: CameraPose,
    pub ambient: AmbientSample,
    /// Estimation positions known at this frame, world space.
    pub positions: Vec<Vec3>,
}

const COMPENSATION_MIN: f64 = 0.5;
const COMPENSATION_MAX: f64 = 2.0;

/// Rescales a stale SH response by the ambient change since it was
/// computed: every coefficient by the clamped intensity ratio, each channel
/// by its clamped color ratio. Channels whose old color is zero are left
/// alone.
pub fn compensate(
    last_response: &ShCoefficients,
    ambient_then: &AmbientSample,
    ambient_now: &AmbientSample,
) -> Result<ShCoefficients> {
    if !(ambient_then.intensity > 0.0) {
        return Err(Error::invalid("ambient intensity at response time must be positive"));
    }
    let ratio = |now: f64, then: f64| (now / then).clamp(COMPENSATION_MIN, COMPENSATION_MAX);
    let global = ratio(ambient_now.intensity, ambient_then.intensity);
    let channels = [0, 1, 2].map(|c| {
        let then = ambient_then.color[c];
        if then == 0.0 {
            global
        } else {
            global * ratio(ambient_now.color[c], then)
        }
    });
    Ok(last_response.scaled_channels(channels))
}

/// Whether `position` projects inside the image of a camera at `pose`.
pub fn is_active(position: &Vec3, pose: &CameraPose, intrinsics: &CameraIntrinsics) -> bool {
    is_active_with_margin(position, pose, intrinsics, 0.0)
}

/// [`is_active`] with the frustum widened by `margin_deg` on every side.
pub fn is_active_with_margin(
    position: &Vec3,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    margin_deg: f64,
) -> bool {
    let p = pose.to_camera(position);
    if !(p.z > 0.0) {
        return false;
    }
    let u = intrinsics.fx * p.x / p.z + intrinsics.cx;
    let v = intrinsics.fy * p.y / p.z + intrinsics.cy;
    let t = margin_deg.to_radians().tan();
    let (mu, mv) = (intrinsics.fx * t, intrinsics.fy * t);
    u >= -mu && u < intrinsics.width as f64 + mu && v >= -mv && v < intrinsics.height as f64 + mv
}

/// Client-side state of one estimation position.
#[derive(Debug, Clone)]
pub struct PositionBuffers {
    pub position_id: u32,
    pub world_position: Vec3,
    pub temporary: UnitSphereCloud,
    pub persistent: UnitSphereCloud,
    pub last_response: Option<ShCoefficients>,
    pub ambient_at_response: Option<AmbientSample>,
    /// Timestamp of the request the last response answered.
    pub response_timestamp: Option<f64>,
}

impl PositionBuffers {
    pub fn new(position_id: u32, world_position: Vec3, anchor_count: usize) -> Self {
        Self {
            position_id,
            world_position,
            temporary: UnitSphereCloud::empty(anchor_count),
            persistent: UnitSphereCloud::empty(anchor_count),
            last_response: None,
            ambient_at_response: None,
            response_timestamp: None,
        }
    }

    /// Stores a response unless a response to a newer request is already
    /// held. Returns whether it was applied.
    pub fn apply_response(&mut self, request_timestamp: f64, sh: ShCoefficients, ambient: AmbientSample) -> bool {
        if matches!(self.response_timestamp, Some(t) if request_timestamp < t) {
            return false;
        }
        self.last_response = Some(sh);
        self.ambient_at_response = Some(ambient);
        self.response_timestamp = Some(request_timestamp);
        true
    }

    /// Last response compensated to the current ambient reading. Falls back
    /// to the raw response when compensation is impossible (dark sensor).
    pub fn lighting(&self, ambient_now: &AmbientSample) -> Option<ShCoefficients> {
        let sh = self.last_response?;
        match &self.ambient_at_response {
            Some(then) => Some(compensate(&sh, then, ambient_now).unwrap_or(sh)),
            None => Some(sh),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub trigger: TriggerConfig,
    /// Extra field of view on each side when deciding activity.
    pub active_margin_deg: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { trigger: TriggerConfig::default(), active_margin_deg: 0.0 }
    }
}

impl PipelineConfig {
    /// `theta == 0` requests on every frame regardless of change.
    pub fn every_frame(&self) -> bool {
        self.trigger.theta == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    SkippedInactive,
    Buffered,
    Triggered(Vec<u8>),
    Failed(String),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::SkippedInactive => "skipped-inactive",
            Outcome::Buffered => "buffered",
            Outcome::Triggered(_) => "triggered",
            Outcome::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionOutcome {
    pub position_index: usize,
    pub position_id: u32,
    pub outcome: Outcome,
    pub max_pooled: f64,
}

impl PositionOutcome {
    pub fn bytes_sent(&self) -> usize {
        match &self.outcome {
            Outcome::Triggered(p) => p.len(),
            _ => 0,
        }
    }
}

/// Milliseconds spent per stage, summed over positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub backproject_ms: f64,
    pub sample_ms: f64,
    pub merge_ms: f64,
    pub trigger_ms: f64,
    pub encode_ms: f64,
}

pub type StageField = fn(&StageTimings) -> f64;

impl StageTimings {
    /// Named accessors for each stage, followed by the frame total.
    pub const STAGES: [(&'static str, StageField); 6] = [
        ("backproject", |t| t.backproject_ms),
        ("sample", |t| t.sample_ms),
        ("merge", |t| t.merge_ms),
        ("trigger", |t| t.trigger_ms),
        ("encode", |t| t.encode_ms),
        ("total", StageTimings::total_ms),
    ];

    pub fn total_ms(&self) -> f64 {
        self.backproject_ms + self.sample_ms + self.merge_ms + self.trigger_ms + self.encode_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub timestamp: f64,
    pub outcomes: Vec<PositionOutcome>,
    pub timings: StageTimings,
    /// Sphere-sampling passes run for this frame.
    pub sampling_ops: usize,
}

impl FrameReport {
    pub fn log_lines(&self) -> impl Iterator<Item = FrameLogLine<'_>> {
        self.outcomes.iter().map(move |o| FrameLogLine { report: self, outcome: o })
    }
}

/// One structured log line per position and frame.
pub struct FrameLogLine<'a> {
    report: &'a FrameReport,
    outcome: &'a PositionOutcome,
}

impl fmt::Display for FrameLogLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.report.timings;
        write!(
            f,
            "t={:.4} position={} outcome={} max_pooled={:.4} bytes={} backproject_ms={:.3} sample_ms={:.3} merge_ms={:.3} trigger_ms={:.3} encode_ms={:.3}",
            self.report.timestamp,
            self.outcome.position_id,
            self.outcome.outcome.label(),
            self.outcome.max_pooled,
            self.outcome.bytes_sent(),
            t.backproject_ms,
            t.sample_ms,
            t.merge_ms,
            t.trigger_ms,
            t.encode_ms,
        )?;
        if let Outcome::Failed(reason) = &self.outcome.outcome {
            write!(f, " error={reason:?}")?;
        }
        Ok(())
    }
}

/// Frame-ordered client state machine for one session.
#[derive(Debug, Clone)]
pub struct ClientPipeline {
    anchors: Arc<AnchorSet>,
    grid: Arc<AccelerationGrid>,
    intrinsics: CameraIntrinsics,
    config: PipelineConfig,
    positions: Vec<PositionBuffers>,
}

impl ClientPipeline {
    pub fn new(
        anchors: Arc<AnchorSet>,
        grid: Arc<AccelerationGrid>,
        intrinsics: CameraIntrinsics,
        config: PipelineConfig,
    ) -> Result<Self> {
        intrinsics.validate()?;
        config.trigger.validate()?;
        if grid.anchor_count() != anchors.len() {
            return Err(Error::invalid("grid and anchor set disagree on anchor count"));
        }
        if config.trigger.window > anchors.neighbor_capacity() + 1 {
            return Err(Error::invalid(format!(
                "window {} exceeds neighbor capacity {} + 1",
                config.trigger.window,
                anchors.neighbor_capacity()
            )));
        }
        Ok(Self { anchors, grid, intrinsics, config, positions: Vec::new() })
    }

    pub fn anchors(&self) -> &Arc<AnchorSet> {
        &self.anchors
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn add_position(&mut self, position_id: u32, world_position: Vec3) -> usize {
        self.positions.push(PositionBuffers::new(position_id, world_position, self.anchors.len()));
        self.positions.len() - 1
    }

    pub fn positions(&self) -> &[PositionBuffers] {
        &self.positions
    }

    pub fn position_mut(&mut self, index: usize) -> &mut PositionBuffers {
        &mut self.positions[index]
    }

    pub fn process_frame(&mut self, frame: &FrameInput) -> Result<FrameReport> {
        let mut timings = StageTimings::default();
        let active: Vec<bool> = self
            .positions
            .iter()
            .map(|p| is_active_with_margin(&p.world_position, &frame.pose, &self.intrinsics, self.config.active_margin_deg))
            .collect();

        let mut outcomes = Vec::with_capacity(self.positions.len());
        let mut sampling_ops = 0;
        if !active.iter().any(|&a| a) {
            for (i, p) in self.positions.iter().enumerate() {
                outcomes.push(PositionOutcome {
                    position_index: i,
                    position_id: p.position_id,
                    outcome: Outcome::SkippedInactive,
                    max_pooled: 0.0,
                });
            }
            return Ok(FrameReport { timestamp: frame.timestamp, outcomes, timings, sampling_ops });
        }

        let mut watch = Stopwatch::start();
        let cloud = backproject(&frame.rgb, &frame.depth, &self.intrinsics, &frame.pose)?;
        timings.backproject_ms += watch.lap_ms();

        for (i, buffers) in self.positions.iter_mut().enumerate() {
            let mut result = PositionOutcome {
                position_index: i,
                position_id: buffers.position_id,
                outcome: Outcome::SkippedInactive,
                max_pooled: 0.0,
            };
            if !active[i] {
                outcomes.push(result);
                continue;
            }
            sampling_ops += 1;
            let step = (|| -> Result<(Outcome, f64)> {
                let mut watch = Stopwatch::start();
                let sample = sphere_sample_at(&cloud, &buffers.world_position, &self.anchors, &self.grid)?;
                timings.sample_ms += watch.lap_ms();
                buffers.temporary.merge_from(&sample)?;
                timings.merge_ms += watch.lap_ms();
                let decision =
                    should_trigger(&buffers.temporary, &buffers.persistent, &self.anchors, &self.config.trigger)?;
                timings.trigger_ms += watch.lap_ms();
                if !(decision.trigger || self.config.every_frame()) {
                    return Ok((Outcome::Buffered, decision.max_pooled));
                }
                let packet = codec::encode(&buffers.temporary)?;
                buffers.persistent.merge_from(&buffers.temporary)?;
                timings.encode_ms += watch.lap_ms();
                Ok((Outcome::Triggered(packet), decision.max_pooled))
            })();
            match step {
                Ok((outcome, max_pooled)) => {
                    result.outcome = outcome;
                    result.max_pooled = max_pooled;
                }
                Err(e) => result.outcome = Outcome::Failed(e.to_string()),
            }
            outcomes.push(result);
        }
        Ok(FrameReport { timestamp: frame.timestamp, outcomes, timings, sampling_ops })
    }
}
