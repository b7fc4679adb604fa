//! Raw point clouds and their reduction to unit-sphere clouds.

use std::sync::OnceLock;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sphere::{AccelerationGrid, AnchorSet};
use crate::{par, Error, Result, Vec3};

/// Linear RGB in `[0, 1]`.
pub type Rgb = [f32; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub position: Vec3,
    pub color: Rgb,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Unit directions of every point seen from `origin`. Points at the
    /// origin are dropped.
    pub fn directions_from(&self, origin: &Vec3) -> Vec<Vec3> {
        self.points
            .iter()
            .filter_map(|p| {
                let d = p.position - origin;
                let n = d.norm();
                (n > 0.0).then(|| d / n)
            })
            .collect()
    }
}

/// One anchor slot of a [`UnitSphereCloud`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnchorEntry {
    pub color: Rgb,
    /// Distance from the sphere origin, meters.
    pub distance: f32,
    pub initialized: bool,
}

/// Per-anchor color and distance, indexed by anchor position. Anchor
/// directions are implied by the shared [`AnchorSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSphereCloud {
    entries: Vec<AnchorEntry>,
}

impl UnitSphereCloud {
    /// All anchors uninitialized.
    pub fn empty(anchor_count: usize) -> Self {
        Self { entries: vec![AnchorEntry::default(); anchor_count] }
    }

    pub fn anchor_count(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[AnchorEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &AnchorEntry {
        &self.entries[index]
    }

    pub fn set(&mut self, index: usize, color: Rgb, distance: f32) {
        self.entries[index] =
            AnchorEntry { color: clamp_color(color), distance, initialized: true };
    }

    pub fn clear(&mut self, index: usize) {
        self.entries[index] = AnchorEntry::default();
    }

    pub fn initialized_count(&self) -> usize {
        self.entries.iter().filter(|e| e.initialized).count()
    }

    pub fn initialized_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().enumerate().filter(|(_, e)| e.initialized).map(|(i, _)| i)
    }

    /// Anchor directions of the initialized entries.
    pub fn initialized_directions(&self, anchors: &AnchorSet) -> Vec<Vec3> {
        self.initialized_indices().map(|i| anchors.direction(i)).collect()
    }

    /// Points at `direction * distance` for every initialized anchor.
    pub fn to_point_cloud(&self, anchors: &AnchorSet) -> PointCloud {
        PointCloud::new(
            self.initialized_indices()
                .map(|i| {
                    let e = &self.entries[i];
                    Point { position: anchors.direction(i) * e.distance as f64, color: e.color }
                })
                .collect(),
        )
    }

    /// Anchor-wise overwrite of `self` with every initialized entry of `source`.
    pub fn merge_from(&mut self, source: &UnitSphereCloud) -> Result<()> {
        if source.anchor_count() != self.anchor_count() {
            return Err(Error::invalid(format!(
                "anchor count mismatch: {} vs {}",
                self.anchor_count(),
                source.anchor_count()
            )));
        }
        for (dst, src) in self.entries.iter_mut().zip(&source.entries) {
            if src.initialized {
                *dst = *src;
            }
        }
        Ok(())
    }
}

/// `destination` overwritten anchor-wise by the initialized entries of `source`.
pub fn merge(destination: &UnitSphereCloud, source: &UnitSphereCloud) -> Result<UnitSphereCloud> {
    let mut out = destination.clone();
    out.merge_from(source)?;
    Ok(out)
}

fn clamp_color(c: Rgb) -> Rgb {
    c.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
}

/// Pinhole intrinsics, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Symmetric intrinsics from a horizontal field of view in degrees.
    pub fn from_fov(width: usize, height: usize, horizontal_fov_deg: f64) -> Result<Self> {
        let fx = width as f64 / 2.0 / (horizontal_fov_deg.to_radians() / 2.0).tan();
        Self::new(fx, fx, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid camera intrinsics {self:?}")))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Camera-to-world rigid transform. Camera space is x right, y down,
/// z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl CameraPose {
    pub fn identity() -> Self {
        Self { position: Vec3::zeros(), orientation: UnitQuaternion::identity() }
    }

    /// Quaternion given as `(w, x, y, z)`; must be unit within 1e-6.
    pub fn new(position: Vec3, wxyz: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        if !((q.norm() - 1.0).abs() <= 1e-6) {
            return Err(Error::invalid(format!("orientation quaternion norm {} is not 1", q.norm())));
        }
        Ok(Self { position, orientation: UnitQuaternion::new_normalize(q) })
    }

    /// Camera at `eye` looking at `target`, image "up" toward `up`.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let forward = crate::sphere::unit(&(target - eye))?;
        let right = crate::sphere::unit(&forward.cross(&up))
            .map_err(|_| Error::invalid("look direction parallel to up vector"))?;
        let down = forward.cross(&right);
        let m = nalgebra::Matrix3::from_columns(&[right, down, forward]);
        let rot = nalgebra::Rotation3::from_matrix_unchecked(m);
        Ok(Self { position: eye, orientation: UnitQuaternion::from_rotation_matrix(&rot) })
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn to_world(&self, camera_point: &Vec3) -> Vec3 {
        self.orientation * camera_point + self.position
    }

    pub fn to_camera(&self, world_point: &Vec3) -> Vec3 {
        self.orientation.inverse_transform_vector(&(world_point - self.position))
    }
}

/// World-space points for every pixel with positive depth, in row-major
/// pixel order.
pub fn backproject(
    rgb: &[Rgb],
    depth: &[f32],
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<PointCloud> {
    intrinsics.validate()?;
    let n = intrinsics.pixel_count();
    if rgb.len() != n || depth.len() != n {
        return Err(Error::invalid(format!(
            "image size mismatch: expected {n} pixels, got rgb {} depth {}",
            rgb.len(),
            depth.len()
        )));
    }
    let rot = pose.orientation.to_rotation_matrix();
    let mut points = Vec::with_capacity(n);
    for v in 0..intrinsics.height {
        let y_scale = (v as f64 - intrinsics.cy) / intrinsics.fy;
        for u in 0..intrinsics.width {
            let i = v * intrinsics.width + u;
            let d = depth[i];
            if d.is_nan() || d < 0.0 {
                return Err(Error::invalid(format!("negative or NaN depth at pixel ({u}, {v})")));
            }
            if d == 0.0 {
                continue;
            }
            let d = d as f64;
            let cam = Vec3::new((u as f64 - intrinsics.cx) / intrinsics.fx * d, y_scale * d, d);
            points.push(Point { position: rot * cam + pose.position, color: clamp_color(rgb[i]) });
        }
    }
    Ok(PointCloud { points })
}

/// Re-centers the cloud on `estimation_position`.
pub fn translate_to(cloud: &PointCloud, estimation_position: &Vec3) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| Point { position: p.position - estimation_position, color: p.color })
            .collect(),
    }
}

/// Projects a cloud already centered on the sphere origin onto the anchors,
/// keeping the nearest point per anchor.
pub fn sphere_sample(
    cloud: &PointCloud,
    anchors: &AnchorSet,
    grid: &AccelerationGrid,
) -> Result<UnitSphereCloud> {
    sphere_sample_at(cloud, &Vec3::zeros(), anchors, grid)
}

/// [`sphere_sample`] of `translate_to(cloud, origin)` without materializing
/// the translated cloud.
pub fn sphere_sample_at(
    cloud: &PointCloud,
    origin: &Vec3,
    anchors: &AnchorSet,
    grid: &AccelerationGrid,
) -> Result<UnitSphereCloud> {
    if grid.anchor_count() != anchors.len() {
        return Err(Error::invalid(format!(
            "grid built for {} anchors, anchor set has {}",
            grid.anchor_count(),
            anchors.len()
        )));
    }
    Ok(sphere_sample_by(cloud, origin, anchors.len(), |d| grid.lookup_unit(d)))
}

/// Sphere sampling with exact nearest-anchor assignment.
pub fn sphere_sample_exact(cloud: &PointCloud, origin: &Vec3, anchors: &AnchorSet) -> UnitSphereCloud {
    sphere_sample_by(cloud, origin, anchors.len(), |d| anchors.nearest_unit(d))
}

/// Depth-culled projection with a caller-supplied unit-direction to anchor
/// assignment. Ties in distance keep the earliest point.
pub fn sphere_sample_by<F>(cloud: &PointCloud, origin: &Vec3, anchor_count: usize, assign: F) -> UnitSphereCloud
where
    F: Fn(&Vec3) -> usize + Sync + Send,
{
    let matched = par::map_slice(&cloud.points, |p| {
        let rel = p.position - origin;
        let dist = rel.norm();
        (dist > 0.0 && dist.is_finite()).then(|| (assign(&(rel / dist)) as u32, dist))
    });

    let mut best = vec![f64::INFINITY; anchor_count];
    let mut winner = vec![usize::MAX; anchor_count];
    for (i, m) in matched.iter().enumerate() {
        if let Some((a, dist)) = *m {
            let a = a as usize;
            if dist < best[a] {
                best[a] = dist;
                winner[a] = i;
            }
        }
    }

    let mut out = UnitSphereCloud::empty(anchor_count);
    for (a, &w) in winner.iter().enumerate() {
        if w != usize::MAX {
            out.set(a, cloud.points[w].color, best[a] as f32);
        }
    }
    out
}

/// Anchor counts `2^k, 1 <= k <= 12` over which completeness is measured.
pub const ENTROPY_SIZES: [usize; 12] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096];

fn entropy_lattices() -> &'static [AnchorSet] {
    static LATTICES: OnceLock<Vec<AnchorSet>> = OnceLock::new();
    LATTICES.get_or_init(|| {
        ENTROPY_SIZES.iter().map(|&n| AnchorSet::lattice(n).expect("n >= 2")).collect()
    })
}

/// Joint entropy (bits) of projecting `directions` onto anchor lattices of
/// every size in [`ENTROPY_SIZES`]. Each lattice carries total mass
/// `1/|S|`, spread over its anchors in proportion to how many directions
/// land on each. Ranges from `log2(12)` (all directions on one anchor) to
/// `log2(12) + 6.5` (uniform coverage at every scale).
pub fn completeness_entropy(directions: &[Vec3]) -> Result<f64> {
    if directions.is_empty() {
        return Err(Error::invalid("entropy needs at least one direction"));
    }
    let units = directions.iter().map(crate::sphere::unit).collect::<Result<Vec<_>>>()?;
    let total = units.len() as f64;
    let scales = ENTROPY_SIZES.len() as f64;
    let mut h = 0.0;
    for lattice in entropy_lattices() {
        let assigned = par::map_slice(&units, |d| lattice.nearest_unit(d) as u32);
        let mut counts = vec![0u64; lattice.len()];
        for a in assigned {
            counts[a as usize] += 1;
        }
        for &c in counts.iter().filter(|&&c| c > 0) {
            let p = c as f64 / total / scales;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

/// `k` points drawn without replacement, deterministic in `seed`.
pub fn uniform_random_downsample(cloud: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    if k > cloud.len() {
        return Err(Error::invalid(format!("cannot draw {k} of {} points", cloud.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, cloud.len(), k);
    Ok(PointCloud { points: picks.iter().map(|i| cloud.points[i]).collect() })
}

/// Greedy farthest-point sampling seeded at point 0; ties pick the lowest
/// index.
pub fn farthest_point_downsample(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if k == 0 || k > cloud.len() {
        return Err(Error::invalid(format!("k must be in 1..={}, got {k}", cloud.len())));
    }
    let pts = &cloud.points;
    let mut chosen = Vec::with_capacity(k);
    let mut min_d2 = vec![f64::INFINITY; pts.len()];
    let mut next = 0;
    for _ in 0..k {
        chosen.push(next);
        let c = pts[next].position;
        let mut far = usize::MAX;
        let mut far_d2 = f64::NEG_INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let d2 = (p.position - c).norm_squared();
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
            if min_d2[i] > far_d2 {
                far_d2 = min_d2[i];
                far = i;
            }
        }
        next = far;
    }
    Ok(PointCloud { points: chosen.into_iter().map(|i| pts[i]).collect() })
}
