//! Discrete Hölder-α norms over grid pairs.
//!
//! `||η||_{α;[a,b]} = max_{u<v} |η(v) - η(u)| / (v - u)^α + max_u |η(u)|`,
//! with `u, v` ranging over grid nodes only. This is a lower bound for the
//! norm of the continuous interpolant.

use crate::error::{Error, Result};
use crate::grid::{self, euclid, euclid_dist};

use super::PathBuffer;

/// `(m dt)^(-α)` for lags `m = 0, 1, ...`, grown on demand. Entry 0 is unused.
#[derive(Debug, Clone)]
pub struct PowTable {
    alpha: f64,
    dt: f64,
    inv: Vec<f64>,
}

impl PowTable {
    pub fn new(alpha: f64, dt: f64) -> Self {
        PowTable { alpha, dt, inv: vec![0.0] }
    }

    pub fn ensure(&mut self, max_lag: usize) {
        let start = self.inv.len();
        if max_lag >= start {
            self.inv
                .extend((start..=max_lag).map(|m| (m as f64 * self.dt).powf(-self.alpha)));
        }
    }

    #[inline]
    pub fn get(&self, m: usize) -> f64 {
        self.inv[m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.inv
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Hölder exponent must lie in (0, 1), got {alpha}")))
    }
}

/// Largest `|x[j + m] - x[j]|` over `j`, scalar series.
#[inline]
fn max_abs_lag_diff(x: &[f64], m: usize) -> f64 {
    let hi = &x[m..];
    let lo = &x[..x.len() - m];
    let mut acc = [0.0f64; 4];
    let mut hc = hi.chunks_exact(4);
    let mut lc = lo.chunks_exact(4);
    for (h, l) in (&mut hc).zip(&mut lc) {
        for k in 0..4 {
            let v = (h[k] - l[k]).abs();
            acc[k] = if v > acc[k] { v } else { acc[k] };
        }
    }
    let mut best = acc[0].max(acc[1]).max(acc[2].max(acc[3]));
    for (h, l) in hc.remainder().iter().zip(lc.remainder()) {
        best = best.max((h - l).abs());
    }
    best
}

/// Discrete Hölder-α norm of the rows in `values` (row-major, dimension `d`,
/// spacing `dt`), after subtracting `base` when given.
pub fn holder_norm_of_values(values: &[f64], d: usize, dt: f64, alpha: f64, base: Option<&[f64]>) -> f64 {
    let n = values.len() / d;
    if n == 0 {
        return 0.0;
    }
    let sup = (0..n)
        .map(|i| {
            let row = &values[i * d..(i + 1) * d];
            match base {
                Some(b) => euclid_dist(row, b),
                None => euclid(row),
            }
        })
        .fold(0.0, f64::max);
    let mut quot = 0.0f64;
    if d == 1 {
        for m in 1..n {
            let w = (m as f64 * dt).powf(-alpha);
            quot = quot.max(max_abs_lag_diff(values, m) * w);
        }
    } else {
        for m in 1..n {
            let w = (m as f64 * dt).powf(-alpha);
            let mut best = 0.0f64;
            for j in 0..n - m {
                best = best.max(euclid_dist(&values[(j + m) * d..(j + m + 1) * d], &values[j * d..(j + 1) * d]));
            }
            quot = quot.max(best * w);
        }
    }
    quot + sup
}

/// Discrete Hölder-α norm of the path on `[a, b]`.
pub fn holder_norm(path: &PathBuffer, alpha: f64, a: f64, b: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a < b) {
        return Err(Error::domain(format!("need a < b, got a = {a}, b = {b}")));
    }
    let r = path.memory();
    let ia = grid::to_steps(a + r, path.dt())?;
    let ib = grid::to_steps(b + r, path.dt())?;
    if ib >= path.len() {
        return Err(Error::domain(format!("b = {b} beyond t_now = {}", path.t_now())));
    }
    let d = path.dim();
    Ok(holder_norm_of_values(&path.raw()[ia * d..(ib + 1) * d], d, path.dt(), alpha, None))
}

/// Running Hölder norm of `X(.) - base` on `[0, t]`, updated as rows are appended.
///
/// Each new row is compared against every earlier row since time 0, so the
/// value after processing row `k` equals a from-scratch evaluation on `[0, t_k]`.
#[derive(Debug, Clone)]
pub struct HolderTracker {
    base: Vec<f64>,
    pows: PowTable,
    /// Absolute row of time 0.
    start: usize,
    /// Next absolute row to process.
    next: usize,
    quot: f64,
    sup: f64,
}

impl HolderTracker {
    pub fn new(alpha: f64, path: &PathBuffer, base: &[f64]) -> Result<Self> {
        check_alpha(alpha)?;
        if base.len() != path.dim() {
            return Err(Error::Shape(format!("base has {} components, path has {}", base.len(), path.dim())));
        }
        let start = path.lag_steps();
        Ok(HolderTracker {
            base: base.to_vec(),
            pows: PowTable::new(alpha, path.dt()),
            start,
            next: start,
            quot: 0.0,
            sup: 0.0,
        })
    }

    pub fn value(&self) -> f64 {
        self.quot + self.sup
    }

    /// Processes every row appended since the last call and returns the current norm.
    pub fn update(&mut self, path: &PathBuffer) -> f64 {
        self.advance(path, path.len())
    }

    /// Processes rows up to (excluding) absolute row `end`.
    pub fn advance(&mut self, path: &PathBuffer, end: usize) -> f64 {
        let d = path.dim();
        let raw = path.raw();
        let end = end.min(path.len());
        if end > self.next {
            self.pows.ensure(end - 1 - self.start);
        }
        while self.next < end {
            let k = self.next;
            let xk = &raw[k * d..(k + 1) * d];
            self.sup = self.sup.max(euclid_dist(xk, &self.base));
            if k > self.start {
                let inv = self.pows.as_slice();
                let q = if d == 1 {
                    scan_scalar(raw[k], &raw[self.start..k], &inv[1..=k - self.start])
                } else {
                    let mut best = 0.0f64;
                    for j in self.start..k {
                        let v = euclid_dist(xk, &raw[j * d..(j + 1) * d]) * inv[k - j];
                        best = best.max(v);
                    }
                    best
                };
                self.quot = self.quot.max(q);
            }
            self.next += 1;
        }
        self.value()
    }
}

/// `max_j |x - prev[j]| * inv[len - 1 - j]`; `inv[i]` is the weight for lag `i + 1`.
#[inline]
fn scan_scalar(x: f64, prev: &[f64], inv: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let n = prev.len();
    let mut it_p = prev.iter().rev();
    let mut i = 0;
    while i + 4 <= n {
        for k in 0..4 {
            let p = *it_p.next().unwrap();
            let v = (x - p).abs() * inv[i + k];
            acc[k] = if v > acc[k] { v } else { acc[k] };
        }
        i += 4;
    }
    let mut best = acc[0].max(acc[1]).max(acc[2].max(acc[3]));
    for p in it_p {
        best = best.max((x - p).abs() * inv[i]);
        i += 1;
    }
    best
}

/// First grid time `t <= horizon` with `||X(.) - base||_{α;[0,t]} >= threshold`.
pub fn holder_hit_time(
    path: &PathBuffer,
    alpha: f64,
    base: &[f64],
    threshold: f64,
    horizon: f64,
) -> Result<Option<f64>> {
    if !(threshold > 0.0) {
        return Err(Error::domain(format!("threshold must be positive, got {threshold}")));
    }
    let h = grid::to_steps(horizon, path.dt())?;
    if h > path.steps() {
        return Err(Error::domain(format!("horizon {horizon} beyond t_now = {}", path.t_now())));
    }
    let mut tracker = HolderTracker::new(alpha, path, base)?;
    for k in 0..=h {
        if tracker.advance(path, path.lag_steps() + k + 1) >= threshold {
            return Ok(Some(k as f64 * path.dt()));
        }
    }
    Ok(None)
}
