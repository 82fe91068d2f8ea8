//! Uniform master-grid helpers. Every time the crate handles is an integer
//! multiple of a grid spacing `dt`; conversions go through here.

use crate::error::{Error, Result};

/// Relative slack when deciding that a real time sits on the grid.
const SNAP_TOL: f64 = 1e-7;

/// Converts `t` to a grid index, failing if `t` is not a multiple of `dt`.
pub fn to_steps(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("grid spacing must be positive, got {dt}")));
    }
    if !t.is_finite() || t < -SNAP_TOL * dt {
        return Err(Error::domain(format!("time {t} is not a nonnegative finite number")));
    }
    let pos = t / dt;
    let k = pos.round();
    if (pos - k).abs() > SNAP_TOL * k.max(1.0) {
        return Err(Error::domain(format!("time {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

/// Largest grid index whose time does not exceed `t`.
pub fn floor_steps(t: f64, dt: f64) -> usize {
    let pos = t / dt;
    let k = pos.round();
    if (pos - k).abs() <= SNAP_TOL * k.max(1.0) {
        k as usize
    } else {
        pos.floor().max(0.0) as usize
    }
}

/// Whether two spacings describe the same grid.
pub fn same_spacing(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[inline]
pub(crate) fn euclid(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[inline]
pub(crate) fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        (a[0] - b[0]).abs()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snaps_near_multiples() {
        assert_eq!(to_steps(0.3, 0.1).unwrap(), 3);
        assert_eq!(to_steps(0.0, 0.1).unwrap(), 0);
        assert!(to_steps(0.35, 0.1).is_err());
        assert!(to_steps(-1.0, 0.1).is_err());
        assert_eq!(floor_steps(0.35, 0.1), 3);
        assert_eq!(floor_steps(0.3, 0.1), 3);
    }
}
