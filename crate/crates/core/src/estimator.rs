//! Degree-2 real spherical harmonics and the estimator interface.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::sampling::UnitSphereCloud;
use crate::sphere::AnchorSet;
use crate::{Error, Result, Vec3};

pub const SH_BASIS_COUNT: usize = 9;
pub const SH_VALUE_COUNT: usize = 3 * SH_BASIS_COUNT;

const Y00: f64 = 0.282095;
const Y1: f64 = 0.488603;
const Y2_OFF: f64 = 1.092548;
const Y20: f64 = 0.315392;
const Y22: f64 = 0.546274;

/// Radiance SH for three color channels. Values are channel-major, each
/// channel in `(l, m)` order `(0,0) (1,-1) (1,0) (1,1) (2,-2) (2,-1) (2,0)
/// (2,1) (2,2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShCoefficients {
    values: [f64; SH_VALUE_COUNT],
}

impl Default for ShCoefficients {
    fn default() -> Self {
        Self { values: [0.0; SH_VALUE_COUNT] }
    }
}

impl ShCoefficients {
    pub fn new(values: [f64; SH_VALUE_COUNT]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("SH coefficients must be finite"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64; SH_VALUE_COUNT] {
        &self.values
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.values[channel * SH_BASIS_COUNT..(channel + 1) * SH_BASIS_COUNT]
    }

    pub fn get(&self, channel: usize, basis: usize) -> f64 {
        self.values[channel * SH_BASIS_COUNT + basis]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.map(|v| v * factor) }
    }

    /// Per-channel scaling.
    pub fn scaled_channels(&self, factors: [f64; 3]) -> Self {
        let mut values = self.values;
        for (i, v) in values.iter_mut().enumerate() {
            *v *= factors[i / SH_BASIS_COUNT];
        }
        Self { values }
    }

    /// Radiance reconstructed in `direction`.
    pub fn evaluate(&self, direction: &Vec3) -> [f64; 3] {
        let y = basis_unchecked(direction);
        [0, 1, 2].map(|c| self.channel(c).iter().zip(&y).map(|(a, b)| a * b).sum())
    }
}

/// Basis values `Y_lm` at a unit direction.
pub fn sh_basis(direction: &Vec3) -> Result<[f64; SH_BASIS_COUNT]> {
    if !((direction.norm() - 1.0).abs() <= 1e-6) {
        return Err(Error::invalid(format!("SH basis needs a unit direction, norm {}", direction.norm())));
    }
    Ok(basis_unchecked(direction))
}

fn basis_unchecked(d: &Vec3) -> [f64; SH_BASIS_COUNT] {
    let (x, y, z) = (d.x, d.y, d.z);
    [
        Y00,
        Y1 * y,
        Y1 * z,
        Y1 * x,
        Y2_OFF * x * y,
        Y2_OFF * y * z,
        Y20 * (3.0 * z * z - 1.0),
        Y2_OFF * x * z,
        Y22 * (x * x - y * y),
    ]
}

/// Accumulates `sum radiance * Y_lm` over samples and scales by
/// `4 pi / count`, a Monte Carlo quadrature over near-uniform directions.
#[derive(Debug, Clone, Default)]
pub struct ShAccumulator {
    sums: [f64; SH_VALUE_COUNT],
    count: usize,
}

impl ShAccumulator {
    pub fn add(&mut self, direction: &Vec3, radiance: [f64; 3]) {
        let y = basis_unchecked(direction);
        for (c, r) in radiance.iter().enumerate() {
            for (k, yk) in y.iter().enumerate() {
                self.sums[c * SH_BASIS_COUNT + k] += r * yk;
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<ShCoefficients> {
        if self.count == 0 {
            return Err(Error::InsufficientObservation);
        }
        let w = 4.0 * PI / self.count as f64;
        ShCoefficients::new(self.sums.map(|s| s * w))
    }
}

/// Lighting estimator contract: a sphere cloud (plus the anchors that give
/// its entries directions) in, SH coefficients out. Must be deterministic
/// and tolerate partially initialized clouds.
pub trait LightingEstimator: Send + Sync {
    fn name(&self) -> &str;

    fn estimate(&self, cloud: &UnitSphereCloud, anchors: &AnchorSet) -> Result<ShCoefficients>;
}

/// Analytic projector: quadrature of initialized anchor colors against the
/// SH basis. Uninitialized anchors are left out of the sum rather than
/// counted as black; distances are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShProjector;

impl LightingEstimator for ShProjector {
    fn name(&self) -> &str {
        "projector"
    }

    fn estimate(&self, cloud: &UnitSphereCloud, anchors: &AnchorSet) -> Result<ShCoefficients> {
        project_sh(cloud, anchors)
    }
}

pub fn project_sh(cloud: &UnitSphereCloud, anchors: &AnchorSet) -> Result<ShCoefficients> {
    if cloud.anchor_count() != anchors.len() {
        return Err(Error::invalid(format!(
            "cloud has {} anchors, anchor set {}",
            cloud.anchor_count(),
            anchors.len()
        )));
    }
    let mut acc = ShAccumulator::default();
    for i in cloud.initialized_indices() {
        let c = cloud.entry(i).color;
        acc.add(&anchors.direction(i), [c[0] as f64, c[1] as f64, c[2] as f64]);
    }
    acc.finish()
}

/// Root mean square difference over all 27 values.
pub fn sh_rmse(a: &ShCoefficients, b: &ShCoefficients) -> f64 {
    let sq: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
    (sq / SH_VALUE_COUNT as f64).sqrt()
}
