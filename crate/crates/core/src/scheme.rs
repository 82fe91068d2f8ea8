//! Euler–Maruyama stepping with coefficients evaluated on the frozen segment
//! `u -> X((s + u) ^ ⌊ns⌋/n)`.
//!
//! The master grid has spacing `dt = 1 / (n * fine_per_macro)`. On each fine
//! step `[s_j, s_j + dt]` the update is
//! `X(s_j + dt) = X(s_j) + f(X̄_{s_j}) dt + g(X̄_{s_j}) ΔW_j`, with the frozen
//! window capped at the last macro time. `fine_per_macro = 1` is the fully
//! frozen classical variant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::error::{Error, Result};
use crate::grid::{self, euclid, euclid_dist};
use crate::noise::NoiseView;
use crate::segment::{write_rows_csv, PathBuffer, Segment, SegmentLike};

pub const DEFAULT_FINE_PER_MACRO: u32 = 8;
pub const DEFAULT_X_MAX: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Macro resolution: the freeze clock ticks every `1/n`.
    pub n: u32,
    pub fine_per_macro: u32,
    pub horizon: f64,
    /// Overflow cap on `|X(t)|`, the numerical stand-in for explosion.
    pub x_max: f64,
    /// Record per-step diagnostics (coefficient norms and `||p_t||`).
    pub diagnostics: bool,
}

impl SchemeConfig {
    pub fn new(n: u32, horizon: f64) -> Self {
        SchemeConfig {
            n,
            fine_per_macro: DEFAULT_FINE_PER_MACRO,
            horizon,
            x_max: DEFAULT_X_MAX,
            diagnostics: false,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.n as f64 * self.fine_per_macro as f64)
    }

    pub fn macro_step(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.fine_per_macro == 0 {
            return Err(Error::domain("n and fine_per_macro must be positive"));
        }
        if !(self.x_max > 0.0) {
            return Err(Error::domain(format!("x_max must be positive, got {}", self.x_max)));
        }
        grid::to_steps(self.horizon, self.dt()).map(|_| ())
    }
}

/// Decides after each fine step whether to stop; sees the path including the new point.
pub trait StopPredicate {
    fn should_stop(&mut self, path: &PathBuffer) -> bool;
}

impl<F: FnMut(&PathBuffer) -> bool> StopPredicate for F {
    fn should_stop(&mut self, path: &PathBuffer) -> bool {
        self(path)
    }
}

pub struct NeverStop;

impl StopPredicate for NeverStop {
    fn should_stop(&mut self, _: &PathBuffer) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    Predicate,
    Cap,
    Horizon,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopInfo {
    pub reason: StopReason,
    pub time: f64,
    /// Fine steps taken.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub f_norm: f64,
    pub g_norm: f64,
    pub p_norm: f64,
}

/// Per-step diagnostics; empty unless the run had `diagnostics` on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub diagnostics: bool,
    pub fine_per_macro: u32,
    pub rows: Vec<TraceRow>,
}

impl StepTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.rows.first().map_or(0, |r| r.x.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.extend(["f_norm", "g_norm", "p_norm"].map(String::from));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = self.rows.iter().map(|r| {
            let mut v = vec![r.t];
            v.extend(&r.x);
            v.extend([r.f_norm, r.g_norm, r.p_norm]);
            v
        });
        write_rows_csv(&header, rows, out)
    }
}

/// `max ||p_s||` over the fine steps of macro window `window` (steps
/// `window * fine_per_macro ..= (window + 1) * fine_per_macro`, as far as recorded).
pub fn perturbation_sup(trace: &StepTrace, window: usize) -> Result<f64> {
    if !trace.diagnostics {
        return Err(Error::Unavailable("trace was recorded without diagnostics".into()));
    }
    let fine = trace.fine_per_macro as usize;
    let lo = window * fine;
    if lo >= trace.rows.len() {
        return Err(Error::domain(format!("window {window} beyond the recorded trace")));
    }
    let hi = ((window + 1) * fine).min(trace.rows.len() - 1);
    Ok(trace.rows[lo..=hi].iter().map(|r| r.p_norm).fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub path: PathBuffer,
    pub stop: StopInfo,
    pub trace: StepTrace,
}

/// Runs the scheme from `phi` until `stop` fires, `|X| > x_max`, or the horizon.
pub fn run(
    c: &CoefficientPair,
    phi: &Segment,
    cfg: &SchemeConfig,
    noise: &NoiseView<'_>,
    stop: &mut dyn StopPredicate,
) -> Result<SchemeRun> {
    cfg.validate()?;
    let dt = cfg.dt();
    if !grid::same_spacing(phi.dt(), dt) {
        return Err(Error::Shape(format!("initial segment spacing {} differs from scheme dt {dt}", phi.dt())));
    }
    if phi.dim() != c.d() || (phi.memory() - c.memory()).abs() > 1e-9 * c.memory() {
        return Err(Error::Shape("initial segment does not match the coefficients".into()));
    }
    if noise.dim() != c.m() {
        return Err(Error::Shape(format!("noise has m = {}, coefficients expect {}", noise.dim(), c.m())));
    }
    if !grid::same_spacing(noise.dt(), dt) {
        return Err(Error::Shape(format!("noise step {} differs from scheme dt {dt}", noise.dt())));
    }
    let steps = grid::to_steps(cfg.horizon, dt)?;
    if steps > noise.available_steps() {
        return Err(Error::NoiseExhausted(format!(
            "horizon needs {steps} steps, noise supplies {}",
            noise.available_steps()
        )));
    }

    let (d, m) = (c.d(), c.m());
    let fine = cfg.fine_per_macro as usize;
    let mut path = PathBuffer::from_initial(phi);
    let mut trace = StepTrace {
        diagnostics: cfg.diagnostics,
        fine_per_macro: cfg.fine_per_macro,
        rows: Vec::new(),
    };
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d * m];
    let mut dw = vec![0.0; m];
    let mut next = vec![0.0; d];

    for j in 0..steps {
        let cap = (j / fine) * fine;
        {
            let frozen = path.frozen_view(j, cap);
            c.drift_into(&frozen, &mut f)?;
            c.diffusion_into(&frozen, &mut g)?;
        }
        noise.increment_into(j, &mut dw);
        let x = path.at_step(j);
        for i in 0..d {
            let mut v = x[i] + f[i] * dt;
            for k in 0..m {
                v += g[i * m + k] * dw[k];
            }
            next[i] = v;
        }
        if cfg.diagnostics {
            let lag = path.lag_steps();
            let anchor = path.row(lag + cap);
            let p_norm = (lag + cap + 1..=lag + j)
                .map(|row| euclid_dist(path.row(row), anchor))
                .fold(0.0, f64::max);
            trace.rows.push(TraceRow {
                t: j as f64 * dt,
                x: x.to_vec(),
                f_norm: euclid(&f),
                g_norm: euclid(&g),
                p_norm,
            });
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                time: (j + 1) as f64 * dt,
                step: j + 1,
                stage: None,
                trace: Some(Box::new(trace)),
            });
        }
        path.push(&next);
        if euclid(&next) > cfg.x_max {
            return Ok(finish(path, StopReason::Cap, j + 1, dt, trace));
        }
        if stop.should_stop(&path) {
            return Ok(finish(path, StopReason::Predicate, j + 1, dt, trace));
        }
    }
    Ok(finish(path, StopReason::Horizon, steps, dt, trace))
}

fn finish(path: PathBuffer, reason: StopReason, index: usize, dt: f64, trace: StepTrace) -> SchemeRun {
    SchemeRun {
        path,
        stop: StopInfo {
            reason,
            time: index as f64 * dt,
            index,
        },
        trace,
    }
}
