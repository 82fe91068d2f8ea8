use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{replicate, LemmaTestReport};
use crate::error::{Error, Result};
use crate::noise::NoiseGrid;
use crate::segment::holder_norm_of_values;
use crate::stats;
use crate::tolerances::{TAIL_FIT_R2, TAIL_QUANTILES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DereichConfig {
    /// Bound `v` on the integrand.
    pub v: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub level: u32,
    pub replicas: usize,
    pub seed: u64,
    /// Number of quantile levels in the tail fit.
    pub tail_points: usize,
}

impl Default for DereichConfig {
    fn default() -> Self {
        DereichConfig {
            v: 1.0,
            horizon: 1.0,
            alpha: 0.25,
            level: 10,
            replicas: 100_000,
            seed: 0,
            tail_points: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub u: f64,
    /// `P̂(||v W|| >= u)`.
    pub tail_constant: f64,
    /// `P̂(||∫ v sin(W) dW|| >= u)`.
    pub tail_sin: f64,
}

impl TailPoint {
    pub fn write_csv<W: Write>(points: &[TailPoint], mut out: W) -> Result<()> {
        writeln!(out, "u,tail_constant,tail_sin")?;
        for p in points {
            writeln!(out, "{},{},{}", p.u, p.tail_constant, p.tail_sin)?;
        }
        Ok(())
    }
}

/// Per replica, the discrete Hölder-α norms of `vW` and of `∫ v sin(W) dW` on `[0, T]`.
pub(crate) fn integral_norms(cfg: &DereichConfig) -> Result<Vec<(f64, f64)>> {
    replicate(cfg.seed, 0, 0..cfg.replicas, |s| {
        let w = NoiseGrid::generate(1, cfg.horizon, cfg.level, s)?;
        let n = w.cells();
        let dt = w.spacing();
        let mut constant = Vec::with_capacity(n + 1);
        let mut sin = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        constant.push(0.0);
        sin.push(0.0);
        for j in 0..n {
            let (w0, w1) = (w.point(j)[0], w.point(j + 1)[0]);
            acc += cfg.v * w0.sin() * (w1 - w0);
            constant.push(cfg.v * w1);
            sin.push(acc);
        }
        Ok((
            holder_norm_of_values(&constant, 1, dt, cfg.alpha, None),
            holder_norm_of_values(&sin, 1, dt, cfg.alpha, None),
        ))
    })
}

fn tail(sorted: &[f64], u: f64) -> f64 {
    let below = sorted.partition_point(|&x| x < u);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// Gaussian tail shape of the Hölder norm of a stochastic integral with bounded integrand.
pub fn test_dereich_tail(cfg: &DereichConfig) -> Result<LemmaTestReport> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 0.5) {
        return Err(Error::domain(format!("alpha must lie in (0, 1/2), got {}", cfg.alpha)));
    }
    if !(cfg.v >= 0.0) || !(cfg.horizon > 0.0) || cfg.replicas < 2 || cfg.tail_points < 2 || cfg.level > 20 {
        return Err(Error::domain("need v >= 0, T > 0, replicas >= 2, tail_points >= 2, level <= 20"));
    }
    let norms = integral_norms(cfg)?;
    let n = cfg.replicas;
    let constant = stats::sorted(&norms.iter().map(|x| x.0).collect::<Vec<_>>());
    let sin = stats::sorted(&norms.iter().map(|x| x.1).collect::<Vec<_>>());
    let mut rep = LemmaTestReport::new("dereich", cfg.seed, n);
    rep.point("median_norm_constant", stats::quantile_sorted(&constant, 0.5), n);
    rep.point("median_norm_sin", stats::quantile_sorted(&sin, 0.5), n);

    if cfg.v == 0.0 {
        let max = constant[n - 1].max(sin[n - 1]);
        rep.check("norm_identically_zero", max == 0.0, max, 0.0, "max norm == 0", n);
        rep.tail = Some(Vec::new());
        return Ok(rep);
    }

    let (q0, q1) = TAIL_QUANTILES;
    let k = cfg.tail_points;
    let points: Vec<TailPoint> = (0..k)
        .map(|i| {
            let q = q0 + (q1 - q0) * i as f64 / (k - 1) as f64;
            let u = stats::quantile_sorted(&constant, q);
            TailPoint {
                u,
                tail_constant: tail(&constant, u),
                tail_sin: tail(&sin, u),
            }
        })
        .collect();
    let x: Vec<f64> = points.iter().map(|p| p.u * p.u).collect();
    let y: Vec<f64> = points.iter().map(|p| p.tail_constant.ln()).collect();
    let fit = rep.fit("log_tail_vs_u_squared", &x, &y);
    rep.check("tail_slope_negative", fit.slope < 0.0, fit.slope, 0.0, "slope < 0", n);
    rep.check(
        "tail_fit_r_squared",
        fit.r_squared >= TAIL_FIT_R2,
        fit.r_squared,
        TAIL_FIT_R2,
        format!("R^2 >= {TAIL_FIT_R2}"),
        n,
    );
    let worst = points.iter().map(|p| p.tail_sin - p.tail_constant).fold(f64::NEG_INFINITY, f64::max);
    rep.check(
        "bounded_integrand_tail_dominated",
        worst <= 0.0,
        worst,
        0.0,
        "max over u of tail_sin - tail_constant <= 0",
        n,
    );
    rep.tail = Some(points);
    Ok(rep)
}
