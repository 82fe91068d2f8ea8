use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_stage, StageConfig, DEFAULT_ALPHA};
use crate::coefficients::{CoefficientPair, Term};
use crate::error::{Error, Result};
use crate::grid::euclid_dist;
use crate::noise::{derive_seed, NoiseGrid};
use crate::scheme::{SchemeConfig, DEFAULT_X_MAX};
use crate::segment::{holder_norm_of_values, Segment, SegmentLike};
use crate::stats;

/// Resolution ladder on a shared fine grid of spacing `1 / (max(n_list) * fine_top)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeConfig {
    pub n_list: Vec<u32>,
    /// Fine substeps per macro step at the largest `n`.
    pub fine_top: u32,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Stage threshold `R`; infinite disables localization.
    pub threshold_scale: f64,
    pub alpha: f64,
    pub x_max: f64,
}

impl ConvergeConfig {
    pub fn new(n_list: Vec<u32>, horizon: f64, replicas: usize, seed: u64) -> Self {
        ConvergeConfig {
            n_list,
            fine_top: 4,
            horizon,
            replicas,
            seed,
            threshold_scale: f64::INFINITY,
            alpha: DEFAULT_ALPHA,
            x_max: DEFAULT_X_MAX,
        }
    }

    pub fn dt(&self) -> f64 {
        let top = self.n_list.iter().copied().max().unwrap_or(1);
        1.0 / (top as f64 * self.fine_top as f64)
    }

    fn validate(&self, r: f64) -> Result<()> {
        if self.n_list.len() < 2 {
            return Err(Error::domain("n_list needs at least two resolutions"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) || self.n_list[0] == 0 {
            return Err(Error::domain("n_list must be strictly ascending and positive"));
        }
        if self.fine_top == 0 || self.replicas == 0 {
            return Err(Error::domain("fine_top and replicas must be positive"));
        }
        let per_unit = *self.n_list.last().unwrap() as u64 * self.fine_top as u64;
        if let Some(n) = self.n_list.iter().find(|&&n| per_unit % n as u64 != 0) {
            return Err(Error::domain(format!("n = {n} does not divide the master resolution {per_unit}")));
        }
        if !(self.horizon > 0.0) || self.horizon > r * (1.0 + 1e-12) {
            return Err(Error::domain(format!("converge horizon must lie in (0, r = {r}], got {}", self.horizon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub n: u32,
    pub n_fine: u32,
    /// Per replica, `sup |X^n - X^{n'}|` up to the earlier stop.
    pub sup: Vec<f64>,
    /// Per replica, `||X^n - X^{n'}||_{α}` up to the earlier stop.
    pub holder: Vec<f64>,
    pub common_stop: Vec<f64>,
    pub sup_median: f64,
    pub sup_q75: f64,
    pub holder_median: f64,
    pub holder_q75: f64,
}

/// Closed-form Euler gap for `f(x) = a x(0)`, `g = 0`, constant initial value `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormGap {
    pub n: u32,
    pub expected: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<u32>,
    pub dt: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub pairs: Vec<PairSummary>,
    pub sup_median_decreasing: bool,
    pub holder_median_decreasing: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub closed_form: Option<Vec<ClosedFormGap>>,
}

struct Trajectory {
    /// Rows from time 0 to the stop.
    rows: Vec<f64>,
    stop_step: usize,
}

fn run_ladder(c: &CoefficientPair, phi: &Segment, cfg: &ConvergeConfig, replica: usize) -> Result<Vec<Trajectory>> {
    let dt = cfg.dt();
    let per_unit = *cfg.n_list.last().unwrap() * cfg.fine_top;
    let noise = NoiseGrid::for_spacing(c.m(), dt, cfg.horizon, derive_seed(cfg.seed, replica as u64))?;
    let view = noise.view(0.0, dt)?;
    let stage = StageConfig {
        threshold_scale: cfg.threshold_scale,
        horizon: cfg.horizon,
        alpha: cfg.alpha,
    };
    cfg.n_list
        .iter()
        .map(|&n| {
            let sc = SchemeConfig {
                n,
                fine_per_macro: per_unit / n,
                horizon: 0.0,
                x_max: cfg.x_max,
                diagnostics: false,
            };
            let out = solve_stage(c, phi, &stage, &sc, &view)?;
            let d = out.path.dim();
            Ok(Trajectory {
                rows: out.path.raw()[out.path.lag_steps() * d..].to_vec(),
                stop_step: out.stop_step,
            })
        })
        .collect()
}

fn linear_closed_form(c: &CoefficientPair, phi: &Segment) -> Option<(f64, f64)> {
    if c.d() != 1 || !c.is_deterministic() || c.spec().drift.len() != 1 {
        return None;
    }
    let a = match &c.spec().drift[0] {
        Term::Linear { component: 0, lag, coeff } if *lag == 0.0 => *coeff,
        _ => return None,
    };
    let v = phi.values();
    if v.iter().any(|&x| x != v[0]) {
        return None;
    }
    Some((a, v[0]))
}

/// Pairwise distances between adjacent resolutions of `n_list`, all driven by one noise path per replica.
pub fn converge_diag(c: &CoefficientPair, phi: &Segment, cfg: &ConvergeConfig) -> Result<ConvergenceReport> {
    cfg.validate(phi.memory())?;
    let dt = cfg.dt();
    let d = c.d();
    let ladders: Vec<Vec<Trajectory>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| run_ladder(c, phi, cfg, i))
        .collect::<Result<_>>()?;

    let mut pairs = Vec::with_capacity(cfg.n_list.len() - 1);
    for (k, w) in cfg.n_list.windows(2).enumerate() {
        let per: Vec<(f64, f64, f64)> = ladders
            .par_iter()
            .map(|ladder| {
                let (a, b) = (&ladder[k], &ladder[k + 1]);
                let stop = a.stop_step.min(b.stop_step);
                let len = (stop + 1) * d;
                let diff: Vec<f64> = a.rows[..len].iter().zip(&b.rows[..len]).map(|(x, y)| x - y).collect();
                let sup = (0..=stop)
                    .map(|j| euclid_dist(&a.rows[j * d..(j + 1) * d], &b.rows[j * d..(j + 1) * d]))
                    .fold(0.0, f64::max);
                let holder = holder_norm_of_values(&diff, d, dt, cfg.alpha, None);
                (sup, holder, stop as f64 * dt)
            })
            .collect();
        let sup: Vec<f64> = per.iter().map(|p| p.0).collect();
        let holder: Vec<f64> = per.iter().map(|p| p.1).collect();
        let ss = stats::sorted(&sup);
        let hs = stats::sorted(&holder);
        pairs.push(PairSummary {
            n: w[0],
            n_fine: w[1],
            common_stop: per.iter().map(|p| p.2).collect(),
            sup_median: stats::quantile_sorted(&ss, 0.5),
            sup_q75: stats::quantile_sorted(&ss, 0.75),
            holder_median: stats::quantile_sorted(&hs, 0.5),
            holder_q75: stats::quantile_sorted(&hs, 0.75),
            sup,
            holder,
        });
    }

    let closed_form = linear_closed_form(c, phi).and_then(|(a, x0)| {
        let total = ladders[0][0].rows.len() / d - 1;
        if ladders[0].iter().any(|t| t.stop_step != total) {
            return None;
        }
        let euler = |n: u32| x0 * (1.0 + a / n as f64).powf(n as f64 * cfg.horizon);
        Some(
            cfg.n_list
                .windows(2)
                .enumerate()
                .map(|(k, w)| ClosedFormGap {
                    n: w[0],
                    expected: (euler(w[0]) - euler(w[1])).abs(),
                    observed: (ladders[0][k].rows[total] - ladders[0][k + 1].rows[total]).abs(),
                })
                .collect(),
        )
    });

    Ok(ConvergenceReport {
        n_list: cfg.n_list.clone(),
        dt,
        horizon: cfg.horizon,
        replicas: cfg.replicas,
        seed: cfg.seed,
        sup_median_decreasing: pairs.windows(2).all(|w| w[1].sup_median < w[0].sup_median),
        holder_median_decreasing: pairs.windows(2).all(|w| w[1].holder_median < w[0].holder_median),
        pairs,
        closed_form,
    })
}
