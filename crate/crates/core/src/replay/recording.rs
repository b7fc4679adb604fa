//! Recording container: a directory holding `manifest.json` and
//! `frames.bin`.
//!
//! Each frame in `frames.bin`, little-endian:
//!
//! ```text
//! timestamp        f64
//! pose position    3 x f32
//! pose orientation 4 x f32 (w, x, y, z)
//! ambient          f32 lux, 3 x f32 color
//! position count   u16, then 3 x f32 per position
//! rgb              width * height * 3 u8, row-major
//! depth            width * height u16 millimeters, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::scene::SyntheticScene;
use crate::client::{AmbientSample, FrameInput};
use crate::codec::{dequantize_color, quantize_color};
use crate::sampling::{CameraIntrinsics, CameraPose};
use crate::{Error, Result, Vec3};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.bin";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub scenario: String,
    pub intrinsics: CameraIntrinsics,
    pub anchor_count: usize,
    /// Always `"mm"`.
    pub depth_unit: String,
    pub frame_count: usize,
    /// Present for synthetic recordings; enables ground-truth lighting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SyntheticScene>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub manifest: Manifest,
    pub frames: Vec<FrameInput>,
}

impl Recording {
    /// Builds a recording, rounding frames to storage precision so that a
    /// write/read round trip is lossless.
    pub fn new(
        scenario: impl Into<String>,
        intrinsics: CameraIntrinsics,
        anchor_count: usize,
        scene: Option<SyntheticScene>,
        frames: Vec<FrameInput>,
    ) -> Result<Self> {
        let frames = frames.into_iter().map(|f| to_storage_precision(&f)).collect::<Result<Vec<_>>>()?;
        let rec = Self {
            manifest: Manifest {
                format_version: FORMAT_VERSION,
                scenario: scenario.into(),
                intrinsics,
                anchor_count,
                depth_unit: "mm".to_string(),
                frame_count: frames.len(),
                scene,
            },
            frames,
        };
        rec.validate().map_err(|e| match e {
            Error::MalformedRecording(m) => Error::invalid(m),
            other => other,
        })?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        m.intrinsics.validate().map_err(|e| Error::MalformedRecording(e.to_string()))?;
        if m.depth_unit != "mm" {
            return Err(Error::MalformedRecording(format!("unsupported depth unit {:?}", m.depth_unit)));
        }
        if m.frame_count != self.frames.len() {
            return Err(Error::MalformedRecording(format!(
                "manifest lists {} frames, stream holds {}",
                m.frame_count,
                self.frames.len()
            )));
        }
        let n = m.intrinsics.pixel_count();
        let mut last = f64::NEG_INFINITY;
        for (i, f) in self.frames.iter().enumerate() {
            if f.rgb.len() != n || f.depth.len() != n {
                return Err(Error::MalformedRecording(format!("frame {i} has the wrong dimensions")));
            }
            if !(f.timestamp > last) {
                return Err(Error::MalformedRecording(format!("timestamps not strictly increasing at frame {i}")));
            }
            last = f.timestamp;
        }
        Ok(())
    }
}

fn depth_to_mm(d: f32) -> Result<u16> {
    let mm = (d as f64 * 1000.0).round();
    if !(0.0..=u16::MAX as f64).contains(&mm) {
        return Err(Error::invalid(format!("depth {d} m is not storable as u16 millimeters")));
    }
    Ok(mm as u16)
}

fn mm_to_depth(mm: u16) -> f32 {
    (mm as f64 / 1000.0) as f32
}

fn f32_round(v: f64) -> f64 {
    v as f32 as f64
}

fn to_storage_precision(f: &FrameInput) -> Result<FrameInput> {
    let q = f.pose.wxyz().map(f32_round);
    Ok(FrameInput {
        timestamp: f.timestamp,
        rgb: f.rgb.iter().map(|c| c.map(|v| dequantize_color(quantize_color(v)))).collect(),
        depth: f.depth.iter().map(|&d| depth_to_mm(d).map(mm_to_depth)).collect::<Result<_>>()?,
        pose: pose_from_parts(f.pose.position.map(f32_round), q),
        ambient: AmbientSample {
            intensity: f32_round(f.ambient.intensity),
            color: f.ambient.color.map(f32_round),
        },
        positions: f.positions.iter().map(|p| p.map(f32_round)).collect(),
    })
}

// Stored quaternions are kept bit-for-bit; they are unit to f32 precision.
fn pose_from_parts(position: Vec3, wxyz: [f64; 4]) -> CameraPose {
    CameraPose {
        position,
        orientation: UnitQuaternion::new_unchecked(Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3])),
    }
}

pub fn write_recording(recording: &Recording, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = serde_json::to_string_pretty(&recording.manifest)
        .map_err(|e| Error::invalid(format!("manifest serialization: {e}")))?;
    fs::write(dir.join(MANIFEST_FILE), manifest)?;

    let n = recording.manifest.intrinsics.pixel_count();
    let mut out = std::io::BufWriter::new(fs::File::create(dir.join(FRAMES_FILE))?);
    let mut buf = Vec::with_capacity(64 + n * 5);
    for f in &recording.frames {
        buf.clear();
        buf.extend_from_slice(&f.timestamp.to_le_bytes());
        for v in f.pose.position.iter() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        for v in f.pose.wxyz() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf.extend_from_slice(&(f.ambient.intensity as f32).to_le_bytes());
        for v in f.ambient.color {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let count = u16::try_from(f.positions.len()).map_err(|_| Error::invalid("too many positions in frame"))?;
        buf.extend_from_slice(&count.to_le_bytes());
        for p in &f.positions {
            for v in p.iter() {
                buf.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        if f.rgb.len() != n || f.depth.len() != n {
            return Err(Error::invalid("frame dimensions do not match the manifest"));
        }
        for c in &f.rgb {
            buf.extend(c.iter().map(|&v| quantize_color(v)));
        }
        for &d in &f.depth {
            buf.extend_from_slice(&depth_to_mm(d)?.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::MalformedRecording(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::MalformedRecording(format!(
            "unsupported format version {}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

pub fn read_recording(dir: &Path) -> Result<Recording> {
    let manifest = read_manifest(dir)?;
    let bytes = fs::read(dir.join(FRAMES_FILE))?;
    let n = manifest.intrinsics.pixel_count();
    let mut r = Reader { bytes: &bytes, at: 0 };
    let mut frames = Vec::with_capacity(manifest.frame_count);
    for i in 0..manifest.frame_count {
        frames.push(r.frame(n).map_err(|what| {
            Error::MalformedRecording(format!("frame {i}: stream ends inside {what}"))
        })?);
    }
    if r.at != bytes.len() {
        return Err(Error::MalformedRecording(format!(
            "{} trailing bytes after {} frames",
            bytes.len() - r.at,
            manifest.frame_count
        )));
    }
    let rec = Recording { manifest, frames };
    rec.validate()?;
    Ok(rec)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8], &'static str> {
        let end = self.at.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or(what)?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn f32(&mut self, what: &'static str) -> Result<f64, &'static str> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
    }

    fn vec3(&mut self, what: &'static str) -> Result<Vec3, &'static str> {
        Ok(Vec3::new(self.f32(what)?, self.f32(what)?, self.f32(what)?))
    }

    fn frame(&mut self, pixels: usize) -> Result<FrameInput, &'static str> {
        let t = self.take(8, "timestamp")?;
        let timestamp = f64::from_le_bytes(t.try_into().expect("8 bytes"));
        let position = self.vec3("pose")?;
        let q = [self.f32("pose")?, self.f32("pose")?, self.f32("pose")?, self.f32("pose")?];
        let intensity = self.f32("ambient")?;
        let color = [self.f32("ambient")?, self.f32("ambient")?, self.f32("ambient")?];
        let c = self.take(2, "position count")?;
        let count = u16::from_le_bytes([c[0], c[1]]) as usize;
        let mut positions = Vec::with_capacity(count);
        for _ in 0..count {
            positions.push(self.vec3("positions")?);
        }
        let rgb = self
            .take(pixels * 3, "rgb")?
            .chunks_exact(3)
            .map(|p| [dequantize_color(p[0]), dequantize_color(p[1]), dequantize_color(p[2])])
            .collect();
        let depth = self
            .take(pixels * 2, "depth")?
            .chunks_exact(2)
            .map(|p| mm_to_depth(u16::from_le_bytes([p[0], p[1]])))
            .collect();
        Ok(FrameInput {
            timestamp,
            rgb,
            depth,
            pose: pose_from_parts(position, q),
            ambient: AmbientSample { intensity, color },
            positions,
        })
    }
}
