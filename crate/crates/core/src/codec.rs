//! Wire formats.
//!
//! Sphere cloud packet, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "XSPC"
//! 4       1     version (1)
//! 5       1     flags (0)
//! 6       2     anchor_count  u16
//! 8       2     entry_count   u16
//! 10      7*n   entries, ascending anchor index:
//!               index u16 | r u8 | g u8 | b u8 | distance binary16
//! ```
//!
//! Only initialized anchors are written. SH responses are 27 binary32
//! values, channel-major.

use half::f16;

use crate::estimator::ShCoefficients;
use crate::sampling::UnitSphereCloud;
use crate::{Error, PacketError, Result};

pub const MAGIC: [u8; 4] = *b"XSPC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;
pub const ENTRY_LEN: usize = 7;
pub const SH_PACKET_LEN: usize = 27 * 4;

/// Encoded size of a cloud with `initialized` non-empty anchors.
pub const fn packet_len(initialized: usize) -> usize {
    HEADER_LEN + ENTRY_LEN * initialized
}

/// Round-half-up 8-bit quantization of a `[0, 1]` channel.
pub fn quantize_color(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) as f64 * 255.0 + 0.5).floor().min(255.0) as u8
}

pub fn dequantize_color(q: u8) -> f32 {
    q as f32 / 255.0
}

pub fn encode(cloud: &UnitSphereCloud) -> Result<Vec<u8>> {
    let anchors = cloud.anchor_count();
    if anchors > u16::MAX as usize {
        return Err(Error::invalid(format!("anchor count {anchors} exceeds 65535")));
    }
    let count = cloud.initialized_count();
    let mut out = Vec::with_capacity(packet_len(count));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(0);
    out.extend_from_slice(&(anchors as u16).to_le_bytes());
    out.extend_from_slice(&(count as u16).to_le_bytes());
    for index in cloud.initialized_indices() {
        let e = cloud.entry(index);
        if !e.distance.is_finite() || e.distance < 0.0 || e.distance > f16::MAX.to_f32() {
            return Err(Error::invalid(format!(
                "distance {} at anchor {index} is not encodable as binary16",
                e.distance
            )));
        }
        out.extend_from_slice(&(index as u16).to_le_bytes());
        out.extend(e.color.iter().map(|&c| quantize_color(c)));
        out.extend_from_slice(&f16::from_f32(e.distance).to_le_bytes());
    }
    Ok(out)
}

/// Parsed packet header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHeader {
    pub anchor_count: u16,
    pub entry_count: u16,
}

pub fn decode_header(bytes: &[u8]) -> Result<PacketHeader, PacketError> {
    if bytes.len() < HEADER_LEN {
        return Err(PacketError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    if bytes[0..4] != MAGIC {
        return Err(PacketError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(PacketError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != 0 {
        return Err(PacketError::UnsupportedFlags(bytes[5]));
    }
    let anchor_count = u16::from_le_bytes([bytes[6], bytes[7]]);
    let entry_count = u16::from_le_bytes([bytes[8], bytes[9]]);
    if entry_count > anchor_count {
        return Err(PacketError::TooManyEntries { entries: entry_count, anchors: anchor_count });
    }
    Ok(PacketHeader { anchor_count, entry_count })
}

pub fn decode(bytes: &[u8]) -> Result<UnitSphereCloud> {
    Ok(decode_packet(bytes)?)
}

fn decode_packet(bytes: &[u8]) -> Result<UnitSphereCloud, PacketError> {
    let header = decode_header(bytes)?;
    let expected = packet_len(header.entry_count as usize);
    if bytes.len() < expected {
        return Err(PacketError::Truncated { expected, actual: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(PacketError::TrailingBytes { expected, actual: bytes.len() });
    }
    let mut cloud = UnitSphereCloud::empty(header.anchor_count as usize);
    let mut previous: Option<u16> = None;
    for entry in bytes[HEADER_LEN..].chunks_exact(ENTRY_LEN) {
        let index = u16::from_le_bytes([entry[0], entry[1]]);
        if index >= header.anchor_count {
            return Err(PacketError::IndexOutOfRange { index, anchors: header.anchor_count });
        }
        match previous {
            Some(p) if p == index => return Err(PacketError::DuplicateIndex(index)),
            Some(p) if p > index => return Err(PacketError::UnsortedIndex { index, previous: p }),
            _ => {}
        }
        previous = Some(index);
        let distance = f16::from_le_bytes([entry[5], entry[6]]).to_f32();
        if !distance.is_finite() || distance < 0.0 {
            return Err(PacketError::InvalidDistance(index));
        }
        let color = [entry[2], entry[3], entry[4]].map(dequantize_color);
        cloud.set(index as usize, color, distance);
    }
    Ok(cloud)
}

pub fn encode_sh(sh: &ShCoefficients) -> Vec<u8> {
    let mut out = Vec::with_capacity(SH_PACKET_LEN);
    for v in sh.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_sh(bytes: &[u8]) -> Result<ShCoefficients> {
    if bytes.len() != SH_PACKET_LEN {
        return Err(PacketError::ShLength(bytes.len()).into());
    }
    let mut values = [0.0f64; 27];
    for (v, chunk) in values.iter_mut().zip(bytes.chunks_exact(4)) {
        *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
    }
    ShCoefficients::new(values)
}
