//! Anchor lattice on the unit sphere and constant-time nearest-anchor lookup.
//!
//! Anchors are the fixed, ordered set of directions that every unit-sphere
//! cloud is indexed by. Client and server must agree on them bit for bit, so
//! they are always regenerated from the anchor count and never serialized.

use std::f64::consts::PI;

use crate::{par, Error, Result, Vec3};

pub const DEFAULT_ANCHOR_COUNT: usize = 1280;
/// Neighbors stored per anchor (a pooling window of up to 16 anchors).
pub const DEFAULT_NEIGHBOR_CAPACITY: usize = 15;
pub const DEFAULT_GRID_WIDTH: usize = 1024;
pub const DEFAULT_GRID_HEIGHT: usize = 512;

const TWO_PI: f64 = 2.0 * PI;
// Slack on the z-band pruning bound so rounding never drops a tied candidate.
const PRUNE_EPS: f64 = 1e-12;

/// Ordered unit directions plus, for each anchor, its nearest other anchors
/// sorted by ascending angular distance.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    directions: Vec<Vec3>,
    neighbor_capacity: usize,
    // Flattened `count * neighbor_capacity` table.
    neighbors: Vec<u32>,
    // Anchor indices sorted by descending z, and the z values in that order.
    z_order: Vec<u32>,
    z_sorted: Vec<f64>,
}

/// Fibonacci lattice direction `j` of `count`.
pub fn fibonacci_direction(j: usize, count: usize) -> Vec3 {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2 * j + 1) as f64 / count as f64;
    let azimuth = j as f64 * golden_angle;
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * azimuth.cos(), r * azimuth.sin(), z)
}

/// Builds the default anchor layout: a Fibonacci lattice of `count`
/// directions with `neighbor_capacity` neighbors per anchor.
pub fn generate_anchors(count: usize, neighbor_capacity: usize) -> Result<AnchorSet> {
    AnchorSet::generate(count, neighbor_capacity)
}

impl AnchorSet {
    pub fn generate(count: usize, neighbor_capacity: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid(format!("anchor count must be >= 2, got {count}")));
        }
        if neighbor_capacity == 0 || neighbor_capacity >= count {
            return Err(Error::invalid(format!(
                "neighbor capacity must be in 1..{count}, got {neighbor_capacity}"
            )));
        }
        let directions = (0..count).map(|j| fibonacci_direction(j, count)).collect();
        Ok(Self::assemble(directions, neighbor_capacity))
    }

    /// Lattice directions only, without neighbor lists. Enough for
    /// nearest-anchor queries.
    pub fn lattice(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid(format!("anchor count must be >= 2, got {count}")));
        }
        let directions = (0..count).map(|j| fibonacci_direction(j, count)).collect();
        Ok(Self::assemble(directions, 0))
    }

    /// Arbitrary anchor layout. Directions are normalized.
    pub fn from_directions(directions: Vec<Vec3>, neighbor_capacity: usize) -> Result<Self> {
        if directions.len() < 2 {
            return Err(Error::invalid("at least two anchor directions are required"));
        }
        if neighbor_capacity >= directions.len() {
            return Err(Error::invalid("neighbor capacity must be below the anchor count"));
        }
        if directions.len() > u32::MAX as usize {
            return Err(Error::invalid("too many anchors"));
        }
        let directions = directions
            .into_iter()
            .map(|d| unit(&d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(directions, neighbor_capacity))
    }

    fn assemble(directions: Vec<Vec3>, neighbor_capacity: usize) -> Self {
        let mut z_order: Vec<u32> = (0..directions.len() as u32).collect();
        z_order.sort_by(|&a, &b| {
            directions[b as usize].z.total_cmp(&directions[a as usize].z).then(a.cmp(&b))
        });
        let z_sorted = z_order.iter().map(|&i| directions[i as usize].z).collect();

        let neighbors = if neighbor_capacity == 0 {
            Vec::new()
        } else {
            par::map_range(directions.len(), |i| nearest_others(&directions, i, neighbor_capacity))
                .into_iter()
                .flatten()
                .collect()
        };
        Self { directions, neighbor_capacity, neighbors, z_order, z_sorted }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn direction(&self, index: usize) -> Vec3 {
        self.directions[index]
    }

    pub fn neighbor_capacity(&self) -> usize {
        self.neighbor_capacity
    }

    /// The nearest other anchors of `index`, closest first.
    pub fn neighbors(&self, index: usize) -> &[u32] {
        let cap = self.neighbor_capacity;
        &self.neighbors[index * cap..(index + 1) * cap]
    }

    /// Exact nearest anchor by angular distance, lowest index on ties.
    pub fn nearest_exact(&self, direction: &Vec3) -> Result<usize> {
        Ok(self.nearest_unit(&unit(direction)?))
    }

    /// Exact search over a z-band around the query. Anchors are visited in
    /// z order outward from the query's z; a side stops once its z gap alone
    /// exceeds the chord to the best anchor found so far, since
    /// `|q - a|^2 = 2 - 2 q.a >= (q.z - a.z)^2`. The argmin and tie-break are
    /// those of a full scan.
    pub(crate) fn nearest_unit(&self, q: &Vec3) -> usize {
        let n = self.len();
        let start = self.z_sorted.partition_point(|&z| z > q.z);
        let mut best = usize::MAX;
        let mut best_dot = f64::NEG_INFINITY;
        let consider = |slot: usize, best: &mut usize, best_dot: &mut f64| {
            let index = self.z_order[slot] as usize;
            let dot = self.directions[index].dot(q);
            if dot > *best_dot || (dot == *best_dot && index < *best) {
                *best_dot = dot;
                *best = index;
            }
        };

        let mut up = start; // slots [start, n)
        let mut down = start; // slots [0, start), walked downward
        let mut up_open = true;
        let mut down_open = true;
        while up_open || down_open {
            let bound = 2.0 - 2.0 * best_dot + PRUNE_EPS;
            if up_open {
                if up < n && (self.z_sorted[up] - q.z).powi(2) <= bound {
                    consider(up, &mut best, &mut best_dot);
                    up += 1;
                } else {
                    up_open = false;
                }
            }
            let bound = 2.0 - 2.0 * best_dot + PRUNE_EPS;
            if down_open {
                if down > 0 && (self.z_sorted[down - 1] - q.z).powi(2) <= bound {
                    consider(down - 1, &mut best, &mut best_dot);
                    down -= 1;
                } else {
                    down_open = false;
                }
            }
        }
        best
    }
}

fn nearest_others(directions: &[Vec3], index: usize, capacity: usize) -> Vec<u32> {
    let me = directions[index];
    let mut others: Vec<(f64, u32)> = directions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(j, d)| (d.dot(&me), j as u32))
        .collect();
    let by_angle = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if capacity < others.len() {
        others.select_nth_unstable_by(capacity, by_angle);
        others.truncate(capacity);
    }
    others.sort_by(by_angle);
    others.into_iter().map(|(_, j)| j).collect()
}

pub(crate) fn unit(v: &Vec3) -> Result<Vec3> {
    let norm = v.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::invalid("direction must be a finite nonzero vector"));
    }
    Ok(v / norm)
}

/// `(polar, azimuth)` of a direction: polar in `[0, pi]` from +z, azimuth in
/// `[0, 2 pi)` from +x toward +y.
pub fn to_spherical(direction: &Vec3) -> Result<(f64, f64)> {
    let d = unit(direction)?;
    Ok(spherical_of_unit(&d))
}

fn spherical_of_unit(d: &Vec3) -> (f64, f64) {
    let polar = d.z.clamp(-1.0, 1.0).acos();
    let mut azimuth = d.y.atan2(d.x);
    if azimuth < 0.0 {
        azimuth += TWO_PI;
    }
    if azimuth >= TWO_PI {
        azimuth -= TWO_PI;
    }
    (polar, azimuth + 0.0)
}

pub fn from_spherical(polar: f64, azimuth: f64) -> Vec3 {
    let s = polar.sin();
    Vec3::new(s * azimuth.cos(), s * azimuth.sin(), polar.cos())
}

pub fn nearest_anchor_exact(anchors: &AnchorSet, direction: &Vec3) -> Result<usize> {
    anchors.nearest_exact(direction)
}

/// Precomputed nearest anchor for every cell of a quantized
/// (azimuth, polar) grid.
#[derive(Debug, Clone)]
pub struct AccelerationGrid {
    width: usize,
    height: usize,
    anchor_count: usize,
    // Row-major by polar row: cells[v * width + u].
    cells: Vec<u32>,
}

pub fn build_grid(anchors: &AnchorSet, width: usize, height: usize) -> Result<AccelerationGrid> {
    AccelerationGrid::build(anchors, width, height)
}

impl AccelerationGrid {
    pub fn build(anchors: &AnchorSet, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        let cells = par::map_range(width * height, |cell| {
            let (u, v) = (cell % width, cell / width);
            anchors.nearest_unit(&Self::center(width, height, u, v)) as u32
        });
        Ok(Self { width, height, anchor_count: anchors.len(), cells })
    }

    fn center(width: usize, height: usize, u: usize, v: usize) -> Vec3 {
        let azimuth = TWO_PI * (u as f64 + 0.5) / width as f64;
        let polar = PI * (v as f64 + 0.5) / height as f64;
        from_spherical(polar, azimuth)
    }

    /// Direction the cell `(u, v)` was resolved at.
    pub fn cell_center(&self, u: usize, v: usize) -> Vec3 {
        Self::center(self.width, self.height, u, v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn anchor_count(&self) -> usize {
        self.anchor_count
    }

    pub fn cell(&self, u: usize, v: usize) -> usize {
        self.cells[v * self.width + u] as usize
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn lookup(&self, direction: &Vec3) -> Result<usize> {
        Ok(self.lookup_unit(&unit(direction)?))
    }

    pub(crate) fn lookup_unit(&self, d: &Vec3) -> usize {
        let (polar, azimuth) = spherical_of_unit(d);
        let u = ((azimuth / TWO_PI * self.width as f64) as usize).min(self.width - 1);
        let v = ((polar / PI * self.height as f64) as usize).min(self.height - 1);
        self.cells[v * self.width + u] as usize
    }
}
