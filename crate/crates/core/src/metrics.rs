//! Evaluation helpers shared by the CLI and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec;
use crate::sampling::{
    completeness_entropy, farthest_point_downsample, sphere_sample, uniform_random_downsample, PointCloud,
};
use crate::sphere::{AccelerationGrid, AnchorSet};
use crate::{par, Error, Result, Vec3};

/// Fraction of directions whose grid lookup differs from the exact nearest
/// anchor.
pub fn mismatch_rate(anchors: &AnchorSet, grid: &AccelerationGrid, directions: &[Vec3]) -> Result<f64> {
    if directions.is_empty() {
        return Err(Error::invalid("mismatch rate needs at least one direction"));
    }
    if grid.anchor_count() != anchors.len() {
        return Err(Error::invalid("grid and anchor set disagree on anchor count"));
    }
    let units = directions.iter().map(crate::sphere::unit).collect::<Result<Vec<_>>>()?;
    let misses = par::map_slice(&units, |d| (grid.lookup_unit(d) != anchors.nearest_unit(d)) as usize);
    Ok(misses.iter().sum::<usize>() as f64 / units.len() as f64)
}

/// Directions from the center of a cube of side `edge` to `count` points
/// drawn uniformly inside it.
pub fn cube_directions(count: usize, edge: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = edge / 2.0;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Vec3::new(rng.gen_range(-h..h), rng.gen_range(-h..h), rng.gen_range(-h..h));
        if p.norm() > 0.0 {
            out.push(p);
        }
    }
    out
}

/// `completeness_entropy(sampled) / completeness_entropy(raw)`.
pub fn relative_entropy(sampled: &[Vec3], raw: &[Vec3]) -> Result<f64> {
    if sampled.is_empty() || raw.is_empty() {
        return Err(Error::invalid("relative entropy needs nonempty direction sets"));
    }
    Ok(completeness_entropy(sampled)? / completeness_entropy(raw)?)
}

/// Point-budget reduction strategies compared by [`sampler_entropy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sampler {
    /// Sphere sampling; its budget is the anchor count.
    Sphere,
    /// `k` points uniformly at random.
    Random,
    /// `k` points by farthest-point sampling.
    Farthest,
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Sphere => "uspc",
            Sampler::Random => "random",
            Sampler::Farthest => "fps",
        }
    }
}

/// Relative entropy of `sampler`'s output on a cloud already centered on
/// the estimation position. Sphere samples contribute their anchor
/// directions; the baselines keep `min(k, len)` raw points.
pub fn sampler_entropy(
    sampler: Sampler,
    centered: &PointCloud,
    anchors: &AnchorSet,
    grid: &AccelerationGrid,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let raw = centered.directions_from(&Vec3::zeros());
    let k = k.min(centered.len());
    let sampled = match sampler {
        Sampler::Sphere => sphere_sample(centered, anchors, grid)?.initialized_directions(anchors),
        Sampler::Random => uniform_random_downsample(centered, k, seed)?.directions_from(&Vec3::zeros()),
        Sampler::Farthest => farthest_point_downsample(centered, k)?.directions_from(&Vec3::zeros()),
    };
    relative_entropy(&sampled, &raw)
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Self { p50: rank(0.50), p95: rank(0.95), max: v[v.len() - 1] })
    }
}

/// Packet accounting against sending the raw RGB-D frame (3 bytes of color
/// plus 2 bytes of depth per pixel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncodingStats {
    pub packets: usize,
    pub mean_entries: f64,
    pub mean_bytes: f64,
    pub max_bytes: usize,
    pub raw_frame_bytes: usize,
}

impl EncodingStats {
    pub fn from_entry_counts(entries: &[usize], pixels: usize) -> Option<Self> {
        if entries.is_empty() {
            return None;
        }
        let n = entries.len() as f64;
        let bytes: Vec<usize> = entries.iter().map(|&e| codec::packet_len(e)).collect();
        Some(Self {
            packets: entries.len(),
            mean_entries: entries.iter().sum::<usize>() as f64 / n,
            mean_bytes: bytes.iter().sum::<usize>() as f64 / n,
            max_bytes: *bytes.iter().max().expect("nonempty"),
            raw_frame_bytes: pixels * 5,
        })
    }

    pub fn reduction(&self) -> f64 {
        1.0 - self.mean_bytes / self.raw_frame_bytes as f64
    }
}

/// Named scalar results of an evaluation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub metrics: Vec<(String, f64, &'static str)>,
}

impl EvalReport {
    pub fn push(&mut self, name: impl Into<String>, value: f64, unit: &'static str) {
        self.metrics.push((name.into(), value, unit));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _, _)| n == name).map(|(_, v, _)| *v)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value,unit\n");
        for (name, value, unit) in &self.metrics {
            s.push_str(&format!("{name},{value:.6},{unit}\n"));
        }
        s
    }
}
