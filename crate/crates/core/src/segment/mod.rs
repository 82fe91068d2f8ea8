//! Segments of the state space `C([-r, 0]; R^d)` and the append-only path
//! buffer they are cut from.
//!
//! Everything lives on a uniform grid of spacing `dt` with `r / dt` integer.
//! Between grid nodes a segment is the linear interpolant of its node values.

mod csv;
mod holder;

pub use self::csv::{read_path_csv, write_path_csv, write_path_rows, write_rows_csv};
pub use self::holder::{
    holder_hit_time, holder_norm, holder_norm_of_values, HolderTracker, PowTable,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, euclid_dist};

/// Read access to a segment's node values, whether owned or borrowed from a path.
pub trait SegmentLike {
    fn dim(&self) -> usize;
    fn dt(&self) -> f64;
    /// Number of grid intervals covering `[-r, 0]`.
    fn lag_steps(&self) -> usize;
    /// Value at `u = -r + i * dt`.
    fn node(&self, i: usize) -> &[f64];

    fn memory(&self) -> f64 {
        self.lag_steps() as f64 * self.dt()
    }

    /// `x(0)`.
    fn terminal(&self) -> &[f64] {
        self.node(self.lag_steps())
    }

    /// Component `comp` of the linear interpolant at `u`; `u` is clamped into `[-r, 0]`.
    fn eval_component(&self, comp: usize, u: f64) -> f64 {
        let lag = self.lag_steps();
        let pos = ((u / self.dt()) + lag as f64).clamp(0.0, lag as f64);
        let near = pos.round();
        if (pos - near).abs() <= 1e-9 * near.max(1.0) {
            return self.node(near as usize)[comp];
        }
        let i = (pos.floor() as usize).min(lag.saturating_sub(1));
        let w = pos - i as f64;
        let a = self.node(i)[comp];
        let b = self.node(i + 1)[comp];
        a + w * (b - a)
    }

    /// Sup-norm over the grid nodes.
    fn sup_norm(&self) -> f64 {
        (0..=self.lag_steps())
            .map(|i| grid::euclid(self.node(i)))
            .fold(0.0, f64::max)
    }

    fn to_segment(&self) -> Segment {
        let mut values = Vec::with_capacity((self.lag_steps() + 1) * self.dim());
        for i in 0..=self.lag_steps() {
            values.extend_from_slice(self.node(i));
        }
        Segment {
            dt: self.dt(),
            lag: self.lag_steps(),
            d: self.dim(),
            values,
        }
    }
}

/// A snapshot of `x in C([-r, 0]; R^d)` on the uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    dt: f64,
    lag: usize,
    d: usize,
    /// Row-major `(lag + 1) x d`, starting at `u = -r`.
    values: Vec<f64>,
}

impl Segment {
    pub fn new(r: f64, dt: f64, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("segment dimension must be positive"));
        }
        if !(r > 0.0) {
            return Err(Error::domain(format!("memory length must be positive, got {r}")));
        }
        let lag = grid::to_steps(r, dt)?;
        if lag == 0 {
            return Err(Error::domain("memory length must span at least one grid step"));
        }
        if values.len() != (lag + 1) * d {
            return Err(Error::Shape(format!(
                "expected {} values for r = {r}, dt = {dt}, d = {d}; got {}",
                (lag + 1) * d,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("segment values must be finite, found {bad}")));
        }
        Ok(Segment { dt, lag, d, values })
    }

    pub fn constant(r: f64, dt: f64, c: &[f64]) -> Result<Self> {
        let lag = grid::to_steps(r, dt)?;
        let values = c.iter().copied().cycle().take((lag + 1) * c.len()).collect();
        Segment::new(r, dt, c.len(), values)
    }

    /// Samples `f(u)` at every grid node.
    pub fn from_fn(r: f64, dt: f64, d: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let lag = grid::to_steps(r, dt)?;
        let mut values = Vec::with_capacity((lag + 1) * d);
        for i in 0..=lag {
            let u = (i as f64 - lag as f64) * dt;
            let v = f(u);
            if v.len() != d {
                return Err(Error::Shape(format!("from_fn returned {} components, expected {d}", v.len())));
            }
            values.extend(v);
        }
        Segment::new(r, dt, d, values)
    }

    /// Piecewise-linear segment through `(u, value)` knots, constant beyond the outer knots.
    pub fn piecewise_linear(r: f64, dt: f64, knots: &[(f64, Vec<f64>)]) -> Result<Self> {
        let d = knots
            .first()
            .map(|k| k.1.len())
            .ok_or_else(|| Error::domain("piecewise-linear segment needs at least one knot"))?;
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::domain("knot times must be strictly increasing"));
        }
        if knots.iter().any(|k| k.1.len() != d) {
            return Err(Error::Shape("knots disagree on dimension".into()));
        }
        Segment::from_fn(r, dt, d, |u| interp_knots(knots, u))
    }

    pub fn r(&self) -> f64 {
        self.memory()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `u in [-r, 0]` by linear interpolation.
    pub fn eval(&self, u: f64) -> Result<Vec<f64>> {
        let r = self.memory();
        if !(u >= -r - 1e-12 * r && u <= 1e-12 * r) {
            return Err(Error::domain(format!("u = {u} outside [-{r}, 0]")));
        }
        Ok((0..self.d).map(|c| self.eval_component(c, u)).collect())
    }

    fn same_shape(&self, other: &Segment) -> bool {
        self.d == other.d && self.lag == other.lag && grid::same_spacing(self.dt, other.dt)
    }
}

impl SegmentLike for Segment {
    fn dim(&self) -> usize {
        self.d
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn lag_steps(&self) -> usize {
        self.lag
    }
    #[inline]
    fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }
}

pub(crate) fn interp_knots(knots: &[(f64, Vec<f64>)], u: f64) -> Vec<f64> {
    let first = &knots[0];
    let last = &knots[knots.len() - 1];
    if u <= first.0 {
        return first.1.clone();
    }
    if u >= last.0 {
        return last.1.clone();
    }
    let k = knots.partition_point(|k| k.0 <= u);
    let (u0, a) = (&knots[k - 1].0, &knots[k - 1].1);
    let (u1, b) = (&knots[k].0, &knots[k].1);
    let w = (u - u0) / (u1 - u0);
    a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
}

/// Sup-distance `max_u |a(u) - b(u)|` over the shared grid.
pub fn sup_dist(a: &Segment, b: &Segment) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "segments differ: (r/dt = {}, dt = {}, d = {}) vs ({}, {}, {})",
            a.lag, a.dt, a.d, b.lag, b.dt, b.d
        )));
    }
    Ok(sup_dist_like(a, b))
}

pub(crate) fn sup_dist_like<A: SegmentLike + ?Sized, B: SegmentLike + ?Sized>(a: &A, b: &B) -> f64 {
    (0..=a.lag_steps())
        .map(|i| euclid_dist(a.node(i), b.node(i)))
        .fold(0.0, f64::max)
}

/// The trajectory `X` on `[-r, t_now]`, append-only.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBuffer {
    dt: f64,
    lag: usize,
    d: usize,
    /// Row-major; row `i` is the value at time `(i - lag) * dt`.
    values: Vec<f64>,
}

impl PathBuffer {
    pub fn from_initial(phi: &Segment) -> Self {
        PathBuffer {
            dt: phi.dt,
            lag: phi.lag,
            d: phi.d,
            values: phi.values.clone(),
        }
    }

    /// Builds a path from raw rows starting at `-r`. Used by the CSV reader and tests.
    pub fn from_rows(r: f64, dt: f64, d: usize, values: Vec<f64>) -> Result<Self> {
        let lag = grid::to_steps(r, dt)?;
        if d == 0 || values.len() % d != 0 || values.len() / d < lag + 1 {
            return Err(Error::Shape(format!(
                "need at least {} rows of dimension {d}, got {} values",
                lag + 1,
                values.len()
            )));
        }
        Ok(PathBuffer { dt, lag, d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn lag_steps(&self) -> usize {
        self.lag
    }
    pub fn memory(&self) -> f64 {
        self.lag as f64 * self.dt
    }

    /// Number of grid steps stored after time 0.
    pub fn steps(&self) -> usize {
        self.values.len() / self.d - 1 - self.lag
    }

    pub fn t_now(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    /// Total number of stored rows, `lag + steps + 1`.
    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    /// Row by absolute index (0 is time `-r`).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// Value at step `k >= 0` after time 0.
    #[inline]
    pub fn at_step(&self, k: usize) -> &[f64] {
        self.row(self.lag + k)
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn time_of_row(&self, i: usize) -> f64 {
        (i as f64 - self.lag as f64) * self.dt
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.d);
        self.values.extend_from_slice(x);
    }

    pub(crate) fn extend_rows(&mut self, rows: &[f64]) {
        debug_assert_eq!(rows.len() % self.d, 0);
        self.values.extend_from_slice(rows);
    }

    /// Value at grid time `t in [-r, t_now]`.
    pub fn value_at(&self, t: f64) -> Result<&[f64]> {
        let shifted = grid::to_steps(t + self.memory(), self.dt)?;
        if shifted >= self.len() {
            return Err(Error::domain(format!("t = {t} beyond t_now = {}", self.t_now())));
        }
        Ok(self.row(shifted))
    }

    /// Borrowed view of `X_s` with the window capped at `cap` (both step indices after 0).
    pub fn frozen_view(&self, s: usize, cap: usize) -> FrozenView<'_> {
        debug_assert!(cap <= s && s <= self.steps());
        FrozenView {
            path: self,
            base: s,
            cap: self.lag + cap,
        }
    }

    pub fn view_at_step(&self, s: usize) -> FrozenView<'_> {
        self.frozen_view(s, s)
    }

    /// `X_t` as an owned segment.
    pub fn segment_at(&self, t: f64) -> Result<Segment> {
        let s = self.check_step(t, "t")?;
        Ok(self.view_at_step(s).to_segment())
    }

    pub fn segment_at_step(&self, s: usize) -> Result<Segment> {
        if s > self.steps() {
            return Err(Error::domain(format!("step {s} beyond stored {}", self.steps())));
        }
        Ok(self.view_at_step(s).to_segment())
    }

    /// The frozen segment `u -> X((s + u) ^ t_cap)`.
    pub fn frozen_segment_at(&self, s: f64, t_cap: f64) -> Result<Segment> {
        let s_k = self.check_step(s, "s")?;
        let cap_k = self.check_step(t_cap, "t_cap")?;
        if cap_k > s_k {
            return Err(Error::domain(format!("t_cap = {t_cap} exceeds s = {s}")));
        }
        Ok(self.frozen_view(s_k, cap_k).to_segment())
    }

    fn check_step(&self, t: f64, name: &str) -> Result<usize> {
        if t < 0.0 {
            return Err(Error::domain(format!("{name} = {t} is negative")));
        }
        let k = grid::to_steps(t, self.dt)?;
        if k > self.steps() {
            return Err(Error::domain(format!("{name} = {t} beyond t_now = {}", self.t_now())));
        }
        Ok(k)
    }
}

/// `u -> X((s + u) ^ cap)` borrowed from a [`PathBuffer`].
#[derive(Debug, Clone, Copy)]
pub struct FrozenView<'a> {
    path: &'a PathBuffer,
    /// Step index of `s`; node `i` sits at absolute row `base + i`.
    base: usize,
    /// Absolute row of the cap.
    cap: usize,
}

impl SegmentLike for FrozenView<'_> {
    fn dim(&self) -> usize {
        self.path.d
    }
    fn dt(&self) -> f64 {
        self.path.dt
    }
    fn lag_steps(&self) -> usize {
        self.path.lag
    }
    #[inline]
    fn node(&self, i: usize) -> &[f64] {
        self.path.row((self.base + i).min(self.cap))
    }
}
