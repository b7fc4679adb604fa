//! Browser bindings for the demo page: observe the lab room on the anchor
//! sphere, explore the change trigger, and measure grid lookup mismatch.

use spherelight::codec;
use spherelight::estimator::{project_sh, ShCoefficients};
use spherelight::metrics::{cube_directions, mismatch_rate as grid_mismatch};
use spherelight::replay::scene::{CameraPath, Ramp};
use spherelight::replay::{render_frame, Scenario, SyntheticScene};
use spherelight::sampling::{backproject, sphere_sample_at, UnitSphereCloud};
use spherelight::sphere::{from_spherical, AccelerationGrid, AnchorSet, DEFAULT_NEIGHBOR_CAPACITY};
use spherelight::trigger::{should_trigger, TriggerConfig};
use spherelight::Vec3;
use std::f64::consts::PI;
use wasm_bindgen::prelude::*;

fn js_err(e: spherelight::Error) -> JsError {
    JsError::new(&e.to_string())
}

const ORBIT_CENTER: Vec3 = Vec3::new(2.0, 1.0, 2.6);
const ORBIT_RADIUS: f64 = 1.4;

/// The lab room seen from a camera on a circle around the lamp, with one
/// estimation position under it.
#[wasm_bindgen]
pub struct RoomDemo {
    scene: SyntheticScene,
    anchors: AnchorSet,
    grid: AccelerationGrid,
    cloud: UnitSphereCloud,
    sh: Option<ShCoefficients>,
}

#[wasm_bindgen]
impl RoomDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(anchor_count: usize) -> Result<RoomDemo, JsError> {
        let anchors = AnchorSet::generate(anchor_count, DEFAULT_NEIGHBOR_CAPACITY).map_err(js_err)?;
        let grid = AccelerationGrid::build(&anchors, 512, 256).map_err(js_err)?;
        let mut scene = SyntheticScene::lab(Scenario::R3, 1);
        scene.estimation_positions = vec![Vec3::new(2.0, 0.9, 2.6)];
        let cloud = UnitSphereCloud::empty(anchor_count);
        Ok(Self { scene, anchors, grid, cloud, sh: None })
    }

    fn sample(&self, kelvin: f64, intensity: f64, orbit_deg: f64) -> Result<UnitSphereCloud, JsError> {
        let mut scene = self.scene.clone();
        scene.temperature = Ramp::constant(kelvin.clamp(1500.0, 6500.0));
        scene.intensity = Ramp::constant(intensity.clamp(0.0, 1.0));
        let a = orbit_deg.to_radians();
        scene.camera = CameraPath::Fixed {
            eye: ORBIT_CENTER + Vec3::new(ORBIT_RADIUS * a.cos(), 0.5, ORBIT_RADIUS * a.sin()),
            target: ORBIT_CENTER,
        };
        let frame = render_frame(&scene, 0).map_err(js_err)?;
        let points = backproject(&frame.rgb, &frame.depth, &scene.intrinsics, &frame.pose).map_err(js_err)?;
        sphere_sample_at(&points, &scene.estimation_positions[0], &self.anchors, &self.grid).map_err(js_err)
    }

    /// Renders a frame with the given light and camera angle and makes its
    /// sphere sample the current observation.
    pub fn observe(&mut self, kelvin: f64, intensity: f64, orbit_deg: f64) -> Result<(), JsError> {
        self.cloud = self.sample(kelvin, intensity, orbit_deg)?;
        self.sh = project_sh(&self.cloud, &self.anchors).ok();
        Ok(())
    }

    pub fn initialized(&self) -> usize {
        self.cloud.initialized_count()
    }

    pub fn packet_bytes(&self) -> usize {
        codec::packet_len(self.cloud.initialized_count())
    }

    /// Equirectangular RGBA image of the current observation; unobserved
    /// anchors are dark grey.
    pub fn sphere_panorama(&self, width: usize, height: usize) -> Vec<u8> {
        panorama(width, height, |d| {
            let e = self.cloud.entry(self.grid.lookup(d).expect("unit direction"));
            if e.initialized {
                e.color.map(|c| c as f64)
            } else {
                [0.12; 3]
            }
        })
    }

    /// Equirectangular RGBA image of the SH estimate, black before any
    /// observation.
    pub fn sh_panorama(&self, width: usize, height: usize) -> Vec<u8> {
        panorama(width, height, |d| self.sh.map_or([0.0; 3], |sh| sh.evaluate(d)))
    }

    /// Pools the change between the current observation and a new one;
    /// returns `[max pooled difference, 1 if it triggers else 0]`.
    pub fn trigger(
        &self,
        kelvin: f64,
        intensity: f64,
        orbit_deg: f64,
        theta: f64,
        window: usize,
    ) -> Result<Vec<f64>, JsError> {
        let next = self.sample(kelvin, intensity, orbit_deg)?;
        let config = TriggerConfig::new(theta, window).map_err(js_err)?;
        let d = should_trigger(&next, &self.cloud, &self.anchors, &config).map_err(js_err)?;
        Ok(vec![d.max_pooled, if d.trigger { 1.0 } else { 0.0 }])
    }
}

/// Equirectangular image with the room's up axis (+y) at the top row.
fn panorama(width: usize, height: usize, color: impl Fn(&Vec3) -> [f64; 3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height * 4);
    for v in 0..height {
        let polar = PI * (v as f64 + 0.5) / height as f64;
        for u in 0..width {
            let azimuth = 2.0 * PI * (u as f64 + 0.5) / width as f64;
            let d = from_spherical(polar, azimuth);
            let c = color(&Vec3::new(d.x, d.z, d.y));
            out.extend(c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8));
            out.push(255);
        }
    }
    out
}

/// Fraction of `points` random directions (cube of side 10 m) whose grid
/// lookup differs from the exact nearest anchor.
#[wasm_bindgen]
pub fn mismatch_rate(anchor_count: usize, width: usize, height: usize, points: usize, seed: u32) -> Result<f64, JsError> {
    let anchors = AnchorSet::lattice(anchor_count).map_err(js_err)?;
    let grid = AccelerationGrid::build(&anchors, width, height).map_err(js_err)?;
    grid_mismatch(&anchors, &grid, &cube_directions(points, 10.0, seed as u64)).map_err(js_err)
}
