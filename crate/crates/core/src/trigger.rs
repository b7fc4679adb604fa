//! On-device change detection between the temporary and persistent
//! sphere clouds.

use serde::{Deserialize, Serialize};

use crate::sampling::UnitSphereCloud;
use crate::sphere::AnchorSet;
use crate::{Error, Result};

pub const DEFAULT_THETA: f64 = 0.6;
pub const DEFAULT_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    /// Pooled difference that must be exceeded, on the `[0, 1]` color scale.
    pub theta: f64,
    /// Anchors per pooling window: the anchor itself plus its `window - 1`
    /// nearest neighbors.
    pub window: usize,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA, window: DEFAULT_WINDOW }
    }
}

impl TriggerConfig {
    pub fn new(theta: f64, window: usize) -> Result<Self> {
        let c = Self { theta, window };
        c.validate()?;
        Ok(c)
    }

    /// `theta` may be 0 here; the client pipeline reads that as "request
    /// every frame".
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta must be in [0, 1], got {}", self.theta)));
        }
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        Ok(())
    }
}

/// Per-anchor change in `[0, 1]`: mean squared channel difference when both
/// sides are initialized, 1 when exactly one is, 0 when neither is.
pub fn anchor_difference(temp: &UnitSphereCloud, persistent: &UnitSphereCloud) -> Result<Vec<f64>> {
    if temp.anchor_count() != persistent.anchor_count() {
        return Err(Error::invalid(format!(
            "anchor count mismatch: {} vs {}",
            temp.anchor_count(),
            persistent.anchor_count()
        )));
    }
    Ok(temp
        .entries()
        .iter()
        .zip(persistent.entries())
        .map(|(a, b)| match (a.initialized, b.initialized) {
            (false, false) => 0.0,
            (true, true) => {
                a.color
                    .iter()
                    .zip(&b.color)
                    .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                    .sum::<f64>()
                    / 3.0
            }
            _ => 1.0,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerDecision {
    pub trigger: bool,
    pub max_pooled: f64,
}

/// Pools [`anchor_difference`] over each anchor's window and fires when any
/// pooled value is strictly above `theta`.
pub fn should_trigger(
    temp: &UnitSphereCloud,
    persistent: &UnitSphereCloud,
    anchors: &AnchorSet,
    config: &TriggerConfig,
) -> Result<TriggerDecision> {
    config.validate()?;
    if anchors.len() != temp.anchor_count() {
        return Err(Error::invalid(format!(
            "anchor set has {} anchors, clouds have {}",
            anchors.len(),
            temp.anchor_count()
        )));
    }
    if config.window > anchors.neighbor_capacity() + 1 {
        return Err(Error::invalid(format!(
            "window {} exceeds neighbor capacity {} + 1",
            config.window,
            anchors.neighbor_capacity()
        )));
    }
    let diff = anchor_difference(temp, persistent)?;
    let max_pooled = pooled(&diff, anchors, config.window).fold(0.0, f64::max);
    Ok(TriggerDecision { trigger: max_pooled > config.theta, max_pooled })
}

/// Window means of `diff`, one per anchor.
pub fn pooled<'a>(diff: &'a [f64], anchors: &'a AnchorSet, window: usize) -> impl Iterator<Item = f64> + 'a {
    (0..diff.len()).map(move |a| {
        let others: f64 = anchors.neighbors(a)[..window - 1].iter().map(|&n| diff[n as usize]).sum();
        (diff[a] + others) / window as f64
    })
}
