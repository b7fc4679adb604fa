//! Synthetic sessions, the recording container, and the replay driver.

mod driver;
pub mod recording;
pub mod scene;

pub use driver::{
    compare_lighting, replay, EdgeClient, FrameRecord, PositionSummary, ReplayConfig, ReplayReport,
    REPORT_CSV_HEADER,
};
pub use recording::{read_recording, write_recording, Manifest, Recording};
pub use scene::{ground_truth_sh, render_frame, Scenario, SyntheticScene};

use crate::Result;

/// Renders every frame of `scene` into a recording.
pub fn record_synthetic(scene: &SyntheticScene, anchor_count: usize) -> Result<Recording> {
    scene.validate()?;
    let frames = (0..scene.frame_count).map(|i| render_frame(scene, i)).collect::<Result<Vec<_>>>()?;
    Recording::new(scene.label.clone(), scene.intrinsics, anchor_count, Some(scene.clone()), frames)
}
