use spherelight::{Error, Result, Vec3};

/// Estimation positions derived from a placement and the object's size:
/// the placement itself, its two x-extremes, or its four horizontal
/// half-extent corners.
pub fn fan_out_positions(placement: Vec3, object_extent: Vec3, count: usize) -> Result<Vec<Vec3>> {
    if object_extent.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("object extent must be finite and nonnegative".into()));
    }
    let hx = object_extent.x / 2.0;
    let hz = object_extent.z / 2.0;
    let offsets: &[(f64, f64)] = match count {
        1 => &[(0.0, 0.0)],
        2 => &[(-hx, 0.0), (hx, 0.0)],
        4 => &[(-hx, -hz), (hx, -hz), (-hx, hz), (hx, hz)],
        _ => return Err(Error::InvalidArgument(format!("position count {count} must be 1, 2 or 4"))),
    };
    Ok(offsets.iter().map(|&(dx, dz)| placement + Vec3::new(dx, 0.0, dz)).collect())
}
