//! Edge-assisted, spatially-variant lighting estimation.
//!
//! The client side turns RGB-D frames into compact unit-sphere point clouds
//! (one colored, depth-culled sample per fixed anchor direction), decides per
//! frame whether the lighting changed enough to ask the edge for a new
//! estimate, and ships a striped little-endian encoding of the cloud. The
//! edge merges observations per estimation position and answers with
//! degree-2 spherical-harmonics coefficients.
//!
//! Module map:
//!
//! * [`sphere`]: anchor lattice, spherical coordinates, acceleration grid.
//! * [`sampling`]: point clouds, back-projection, sphere sampling, the
//!   completeness entropy and the baseline downsamplers.
//! * [`codec`]: wire format for sphere clouds and SH responses.
//! * [`trigger`]: pooled anchor-wise change detection.
//! * [`estimator`]: SH basis, the analytic projector, SH RMSE.
//! * [`client`]: the per-frame client pipeline.
//! * [`replay`]: synthetic scenes, the recording format and the replay driver.
//! * [`metrics`]: evaluation helpers shared by the CLI and tests.

// Negated comparisons are used deliberately so NaN falls into the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod client;
pub mod codec;
mod error;
pub mod estimator;
pub mod metrics;
mod par;
pub mod replay;
pub mod sampling;
pub mod sphere;
pub mod timing;
pub mod trigger;

pub use error::{Error, PacketError, Result};

pub use nalgebra::{UnitQuaternion, Vector3};

/// World or camera space vector, meters.
pub type Vec3 = Vector3<f64>;
