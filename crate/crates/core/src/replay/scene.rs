//! Deterministic box-room scenes standing in for captured RGB-D sessions.
//!
//! Radiance leaving a wall point `x` with inward normal `n` is
//!
//! ```text
//! L(x) = albedo ⊙ (fill + intensity · power · rgb(T) · max(0, n·l) / r²) + emission
//! ```
//!
//! with `l` the unit vector to the point light at distance `r`. `fill` is a
//! neutral, unshadowed room light that stays constant, so a scene with
//! `fill = 0` and `emission = 0` is black at zero lamp intensity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::client::{AmbientSample, FrameInput};
use crate::codec::{dequantize_color, quantize_color};
use crate::estimator::{ShAccumulator, ShCoefficients};
use crate::sampling::{CameraIntrinsics, CameraPose};
use crate::{Error, Result, Vec3};

/// Lux reported by the ambient sensor per unit of mean wall radiance.
pub const LUX_PER_RADIANCE: f64 = 1000.0;

/// Directions used by [`ground_truth_sh`]: a polar x azimuth midpoint grid
/// equal-area in `cos(polar)`.
pub const GROUND_TRUTH_POLAR_STEPS: usize = 250;
pub const GROUND_TRUTH_AZIMUTH_STEPS: usize = 400;

// (kelvin, rgb) knots of the color-temperature lookup, linearly
// interpolated: three segments between 1500 K and 6500 K.
const BLACKBODY_KNOTS: [(f64, [f64; 3]); 4] = [
    (1500.0, [1.0, 0.427, 0.0]),
    (3000.0, [1.0, 0.706, 0.420]),
    (4500.0, [1.0, 0.859, 0.729]),
    (6500.0, [1.0, 0.976, 0.992]),
];

/// Normalized RGB of a light at `kelvin`, clamped to 1500-6500 K.
pub fn blackbody_rgb(kelvin: f64) -> [f64; 3] {
    let t = kelvin.clamp(BLACKBODY_KNOTS[0].0, BLACKBODY_KNOTS[3].0);
    for pair in BLACKBODY_KNOTS.windows(2) {
        let ((t0, c0), (t1, c1)) = (pair[0], pair[1]);
        if t <= t1 {
            let s = (t - t0) / (t1 - t0);
            return [0, 1, 2].map(|i| c0[i] + s * (c1[i] - c0[i]));
        }
    }
    BLACKBODY_KNOTS[3].1
}

/// Linear ramp between two values over the frames of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub end: f64,
}

impl Ramp {
    pub fn constant(v: f64) -> Self {
        Self { start: v, end: v }
    }

    pub fn at(&self, frame: usize, frame_count: usize) -> f64 {
        if frame_count <= 1 {
            return self.start;
        }
        let s = frame as f64 / (frame_count - 1) as f64;
        self.start + s * (self.end - self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CameraPath {
    Fixed { eye: Vec3, target: Vec3 },
    /// Circles `center` at `radius` and height `eye_height`, looking at
    /// `center`, sweeping `turns` revolutions over the recording.
    Orbit { center: Vec3, radius: f64, eye_height: f64, turns: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub label: String,
    pub room_min: Vec3,
    pub room_max: Vec3,
    /// Per face: -x, +x, -y (floor), +y (ceiling), -z, +z.
    pub albedo: [[f64; 3]; 6],
    pub emission: f64,
    pub fill: f64,
    pub light_position: Vec3,
    pub light_power: f64,
    pub temperature: Ramp,
    pub intensity: Ramp,
    pub camera: CameraPath,
    pub intrinsics: CameraIntrinsics,
    pub estimation_positions: Vec<Vec3>,
    pub frame_count: usize,
    pub fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Fixed camera, light temperature 1500 K to 6500 K.
    R1,
    /// Fixed camera, light intensity 0 % to 100 %.
    R2,
    /// Camera orbiting the light.
    R3,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r1" => Ok(Scenario::R1),
            "r2" => Ok(Scenario::R2),
            "r3" => Ok(Scenario::R3),
            other => Err(Error::invalid(format!("unknown scenario {other:?}"))),
        }
    }
}

pub const DEFAULT_WIDTH: usize = 256;
pub const DEFAULT_HEIGHT: usize = 192;
pub const DEFAULT_FOV_DEG: f64 = 65.0;

const ROOM_ALBEDO: [[f64; 3]; 6] = [
    [0.70, 0.62, 0.55],
    [0.55, 0.65, 0.72],
    [0.60, 0.45, 0.30],
    [0.85, 0.85, 0.85],
    [0.72, 0.70, 0.60],
    [0.50, 0.60, 0.50],
];

impl SyntheticScene {
    /// The lab room: 4 x 3 x 5 m, a desk lamp at 1.2 m and one estimation
    /// position on the desk in front of the camera.
    pub fn lab(scenario: Scenario, frame_count: usize) -> Self {
        let intrinsics =
            CameraIntrinsics::from_fov(DEFAULT_WIDTH, DEFAULT_HEIGHT, DEFAULT_FOV_DEG).expect("valid defaults");
        let light_position = Vec3::new(2.0, 1.2, 2.6);
        let desk = Vec3::new(2.0, 0.9, 3.2);
        let (temperature, intensity, camera, label) = match scenario {
            Scenario::R1 => (
                Ramp { start: 1500.0, end: 6500.0 },
                Ramp::constant(1.0),
                CameraPath::Fixed { eye: Vec3::new(2.0, 1.5, 1.0), target: desk },
                "r1",
            ),
            Scenario::R2 => (
                Ramp::constant(4000.0),
                Ramp { start: 0.0, end: 1.0 },
                CameraPath::Fixed { eye: Vec3::new(2.0, 1.5, 1.0), target: desk },
                "r2",
            ),
            Scenario::R3 => (
                Ramp::constant(4000.0),
                Ramp::constant(1.0),
                CameraPath::Orbit { center: Vec3::new(2.0, 1.0, 2.6), radius: 1.4, eye_height: 1.5, turns: 1.0 },
                "r3",
            ),
        };
        let estimation_positions = match scenario {
            Scenario::R3 => vec![Vec3::new(2.0, 0.9, 2.6)],
            _ => vec![desk],
        };
        Self {
            label: label.to_string(),
            room_min: Vec3::zeros(),
            room_max: Vec3::new(4.0, 3.0, 5.0),
            albedo: ROOM_ALBEDO,
            emission: 0.0,
            fill: 0.3,
            light_position,
            light_power: 0.6,
            temperature,
            intensity,
            camera,
            intrinsics,
            estimation_positions,
            frame_count,
            fps: 30.0,
        }
    }

    /// A random single-frame room: size, albedos, lamp, camera and
    /// estimation position all drawn from `seed`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = Vec3::new(rng.gen_range(3.0..7.0), rng.gen_range(2.4..3.5), rng.gen_range(3.0..7.0));
        let inside = |rng: &mut ChaCha8Rng, margin: f64| {
            Vec3::new(
                rng.gen_range(margin..size.x - margin),
                rng.gen_range(margin..size.y - margin),
                rng.gen_range(margin..size.z - margin),
            )
        };
        let mut albedo = [[0.0; 3]; 6];
        for face in albedo.iter_mut() {
            *face = [rng.gen_range(0.2..0.9), rng.gen_range(0.2..0.9), rng.gen_range(0.2..0.9)];
        }
        let eye = inside(&mut rng, 0.5);
        let position = inside(&mut rng, 0.5);
        let mut target = position;
        if (target - eye).norm() < 0.3 {
            target = Vec3::new(size.x / 2.0, size.y / 2.0, size.z / 2.0);
        }
        let horizontal = Vec3::new(target.x - eye.x, 0.0, target.z - eye.z);
        if horizontal.norm() < 1e-3 {
            target.x += 0.5;
        }
        Self {
            label: format!("random-{seed}"),
            room_min: Vec3::zeros(),
            room_max: size,
            albedo,
            emission: 0.0,
            fill: rng.gen_range(0.1..0.4),
            light_position: inside(&mut rng, 0.3),
            light_power: rng.gen_range(0.3..1.0),
            temperature: Ramp::constant(rng.gen_range(1500.0..6500.0)),
            intensity: Ramp::constant(1.0),
            camera: CameraPath::Fixed { eye, target },
            intrinsics: CameraIntrinsics::from_fov(DEFAULT_WIDTH, DEFAULT_HEIGHT, DEFAULT_FOV_DEG)
                .expect("valid defaults"),
            estimation_positions: vec![position],
            frame_count: 1,
            fps: 30.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.frame_count == 0 {
            return Err(Error::invalid("scene needs at least one frame"));
        }
        for f in 0..self.frame_count {
            let eye = self.pose(f)?.position;
            if !self.contains(&eye) {
                return Err(Error::invalid(format!("camera leaves the room at frame {f}")));
            }
        }
        for p in &self.estimation_positions {
            if !self.contains(p) {
                return Err(Error::invalid(format!("estimation position {p:?} is outside the room")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.room_min[i] && p[i] < self.room_max[i])
    }

    pub fn pose(&self, frame: usize) -> Result<CameraPose> {
        match self.camera {
            CameraPath::Fixed { eye, target } => CameraPose::look_at(eye, target, Vec3::y()),
            CameraPath::Orbit { center, radius, eye_height, turns } => {
                let s = if self.frame_count <= 1 { 0.0 } else { frame as f64 / self.frame_count as f64 };
                let a = 2.0 * PI * turns * s;
                let eye = Vec3::new(center.x + radius * a.cos(), eye_height, center.z + radius * a.sin());
                CameraPose::look_at(eye, center, Vec3::y())
            }
        }
    }

    /// Lamp RGB radiance scale (`intensity * power * rgb(T)`) at `frame`.
    fn lamp(&self, frame: usize) -> [f64; 3] {
        let t = self.temperature.at(frame, self.frame_count);
        let i = self.intensity.at(frame, self.frame_count) * self.light_power;
        blackbody_rgb(t).map(|c| c * i)
    }

    /// First wall hit leaving the room interior from `origin` along `dir`
    /// (need not be unit). Returns the ray parameter and face.
    fn exit(&self, origin: &Vec3, dir: &Vec3) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for axis in 0..3 {
            let d = dir[axis];
            let (bound, face) = if d > 0.0 {
                (self.room_max[axis], 2 * axis + 1)
            } else if d < 0.0 {
                (self.room_min[axis], 2 * axis)
            } else {
                continue;
            };
            let t = (bound - origin[axis]) / d;
            if t < best.0 {
                best = (t, face);
            }
        }
        best
    }

    fn surface_radiance(&self, x: &Vec3, face: usize, lamp: &[f64; 3]) -> [f64; 3] {
        let mut normal = Vec3::zeros();
        normal[face / 2] = if face.is_multiple_of(2) { 1.0 } else { -1.0 };
        let to_light = self.light_position - x;
        let r2 = to_light.norm_squared().max(1e-6);
        let cos = (normal.dot(&to_light) / r2.sqrt()).max(0.0);
        let direct = cos / r2;
        let albedo = &self.albedo[face];
        [0, 1, 2].map(|c| albedo[c] * (self.fill + lamp[c] * direct) + self.emission)
    }

    /// Unclamped radiance seen from `origin` looking along `dir`.
    pub fn radiance(&self, origin: &Vec3, dir: &Vec3, frame: usize) -> [f64; 3] {
        let lamp = self.lamp(frame);
        let (t, face) = self.exit(origin, dir);
        self.surface_radiance(&(origin + dir * t), face, &lamp)
    }

    /// Area-weighted mean wall radiance, by a 32 x 32 midpoint rule per face.
    pub fn mean_wall_radiance(&self, frame: usize) -> [f64; 3] {
        const STEPS: usize = 32;
        let lamp = self.lamp(frame);
        let size = self.room_max - self.room_min;
        let mut sum = [0.0; 3];
        let mut area = 0.0;
        for face in 0..6 {
            let axis = face / 2;
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            let cell = size[a] * size[b] / (STEPS * STEPS) as f64;
            for i in 0..STEPS {
                for j in 0..STEPS {
                    let mut x = self.room_min;
                    x[axis] = if face % 2 == 0 { self.room_min[axis] } else { self.room_max[axis] };
                    x[a] += size[a] * (i as f64 + 0.5) / STEPS as f64;
                    x[b] += size[b] * (j as f64 + 0.5) / STEPS as f64;
                    let l = self.surface_radiance(&x, face, &lamp);
                    for c in 0..3 {
                        sum[c] += l[c] * cell;
                    }
                    area += cell;
                }
            }
        }
        sum.map(|s| s / area)
    }

    /// Ambient sensor model: lux proportional to the brightest channel of
    /// the mean wall radiance, color the mean radiance normalized to that
    /// channel.
    pub fn ambient(&self, frame: usize) -> AmbientSample {
        let mean = self.mean_wall_radiance(frame);
        let peak = mean.iter().cloned().fold(0.0, f64::max);
        let color = if peak > 0.0 { mean.map(|c| c / peak) } else { [0.0; 3] };
        AmbientSample { intensity: LUX_PER_RADIANCE * peak, color }
    }
}

/// Ray-casts one frame: 8-bit LDR color, z-depth in meters.
pub fn render_frame(scene: &SyntheticScene, frame: usize) -> Result<FrameInput> {
    if frame >= scene.frame_count {
        return Err(Error::invalid(format!("frame {frame} out of range (count {})", scene.frame_count)));
    }
    let k = &scene.intrinsics;
    let pose = scene.pose(frame)?;
    let rot = pose.orientation.to_rotation_matrix();
    let lamp = scene.lamp(frame);
    let n = k.pixel_count();
    let mut rgb = Vec::with_capacity(n);
    let mut depth = Vec::with_capacity(n);
    for v in 0..k.height {
        for u in 0..k.width {
            let cam = Vec3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
            let dir = rot * cam;
            let (t, face) = scene.exit(&pose.position, &dir);
            let l = scene.surface_radiance(&(pose.position + dir * t), face, &lamp);
            rgb.push(l.map(|c| dequantize_color(quantize_color(c as f32))));
            depth.push(t as f32);
        }
    }
    Ok(FrameInput {
        timestamp: frame as f64 / scene.fps,
        rgb,
        depth,
        pose,
        ambient: scene.ambient(frame),
        positions: scene.estimation_positions.clone(),
    })
}

/// Reference SH of the unclamped scene radiance around `position`.
pub fn ground_truth_sh(scene: &SyntheticScene, position: &Vec3, frame: usize) -> Result<ShCoefficients> {
    if !scene.contains(position) {
        return Err(Error::invalid(format!("position {position:?} is outside the room")));
    }
    if frame >= scene.frame_count {
        return Err(Error::invalid(format!("frame {frame} out of range (count {})", scene.frame_count)));
    }
    let mut acc = ShAccumulator::default();
    for i in 0..GROUND_TRUTH_POLAR_STEPS {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / GROUND_TRUTH_POLAR_STEPS as f64;
        let r = (1.0 - z * z).sqrt();
        for j in 0..GROUND_TRUTH_AZIMUTH_STEPS {
            let phi = 2.0 * PI * (j as f64 + 0.5) / GROUND_TRUTH_AZIMUTH_STEPS as f64;
            let d = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            acc.add(&d, scene.radiance(position, &d, frame));
        }
    }
    acc.finish()
}
