//! Localization by Hölder-norm thresholds, stage-wise continuation to the
//! maximal solution, and resolution-ladder convergence diagnostics.
//!
//! A stage runs the scheme from the current segment until
//! `||X(.) - φ(0)||_{α;[0,t]} >= R/2` or its horizon `r_R`. Stage `k` uses
//! `R = R₀ 2^k`, starts from the terminal segment of stage `k - 1`, and is
//! driven by the master noise re-based at the previous stop.

mod converge;

pub use self::converge::{converge_diag, ClosedFormGap, ConvergeConfig, ConvergenceReport, PairSummary};

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::error::{Error, Result};
use crate::grid;
use crate::noise::{NoiseGrid, NoiseView};
use crate::scheme::{self, SchemeConfig, StopPredicate, StopReason};
use crate::segment::{HolderTracker, PathBuffer, Segment, SegmentLike};

pub const DEFAULT_ALPHA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    /// Threshold scale `R`; the stage stops once the Hölder norm reaches `R/2`.
    pub threshold_scale: f64,
    /// Stage horizon `r_R`, at most the memory length.
    pub horizon: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StageStop {
    Threshold,
    Horizon,
    Cap,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    /// Initial segment followed by the stage's steps.
    pub path: PathBuffer,
    pub stop_time: f64,
    pub stop_step: usize,
    pub reason: StageStop,
    /// `||X(.) - φ(0)||_{α;[0, stop]}`; `None` when the threshold was infinite and untracked.
    pub holder_at_stop: Option<f64>,
}

struct ThresholdStop {
    tracker: HolderTracker,
    threshold: f64,
}

impl StopPredicate for ThresholdStop {
    fn should_stop(&mut self, path: &PathBuffer) -> bool {
        self.tracker.update(path) >= self.threshold
    }
}

/// One localized stage from `phi`.
pub fn solve_stage(
    c: &CoefficientPair,
    phi: &Segment,
    stage: &StageConfig,
    scheme_cfg: &SchemeConfig,
    noise: &NoiseView<'_>,
) -> Result<StageOutcome> {
    if !(stage.threshold_scale > 0.0) {
        return Err(Error::domain(format!("threshold scale must be positive, got {}", stage.threshold_scale)));
    }
    if !(stage.horizon > 0.0) || stage.horizon > phi.memory() * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "stage horizon must lie in (0, r = {}], got {}",
            phi.memory(),
            stage.horizon
        )));
    }
    let cfg = SchemeConfig {
        horizon: stage.horizon,
        ..*scheme_cfg
    };
    let threshold = 0.5 * stage.threshold_scale;
    let run = if threshold.is_finite() {
        let start = PathBuffer::from_initial(phi);
        let mut stop = ThresholdStop {
            tracker: HolderTracker::new(stage.alpha, &start, phi.terminal())?,
            threshold,
        };
        let run = scheme::run(c, phi, &cfg, noise, &mut stop)?;
        let norm = stop.tracker.update(&run.path);
        (run, Some(norm))
    } else {
        (scheme::run(c, phi, &cfg, noise, &mut scheme::NeverStop)?, None)
    };
    let (run, holder_at_stop) = run;
    let reason = match run.stop.reason {
        StopReason::Predicate => StageStop::Threshold,
        StopReason::Horizon => StageStop::Horizon,
        StopReason::Cap => StageStop::Cap,
        StopReason::Diverged => StageStop::Diverged,
    };
    Ok(StageOutcome {
        path: run.path,
        stop_time: run.stop.time,
        stop_step: run.stop.index,
        reason,
        holder_at_stop,
    })
}

/// Nonincreasing map `R -> r_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonMap {
    /// `r_R = value`, or the memory length when unset.
    Constant {
        #[serde(default)]
        value: Option<f64>,
    },
    /// First entry with `R <= up_to` wins; the last entry covers everything above.
    Table { entries: Vec<HorizonEntry> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonEntry {
    pub up_to: f64,
    pub horizon: f64,
}

impl Default for HorizonMap {
    fn default() -> Self {
        HorizonMap::Constant { value: None }
    }
}

impl HorizonMap {
    pub fn validate(&self, r: f64) -> Result<()> {
        let check = |h: f64| {
            if h > 0.0 && h <= r * (1.0 + 1e-12) {
                Ok(())
            } else {
                Err(Error::domain(format!("stage horizon {h} outside (0, r = {r}]")))
            }
        };
        match self {
            HorizonMap::Constant { value } => value.map_or(Ok(()), check),
            HorizonMap::Table { entries } => {
                if entries.is_empty() {
                    return Err(Error::domain("horizon table is empty"));
                }
                for w in entries.windows(2) {
                    if !(w[0].up_to < w[1].up_to) || w[1].horizon > w[0].horizon {
                        return Err(Error::domain("horizon table must have increasing R and nonincreasing horizons"));
                    }
                }
                entries.iter().try_for_each(|e| check(e.horizon))
            }
        }
    }

    pub fn horizon_for(&self, big_r: f64, r: f64) -> f64 {
        match self {
            HorizonMap::Constant { value } => value.unwrap_or(r),
            HorizonMap::Table { entries } => entries
                .iter()
                .find(|e| big_r <= e.up_to)
                .unwrap_or(&entries[entries.len() - 1])
                .horizon,
        }
    }
}

/// When a run that never hit the cap still counts as a suspected explosion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplosionRule {
    /// Number of trailing stages inspected.
    pub trailing_stages: usize,
    /// Each of them must be shorter than `duration_factor * dt`.
    pub duration_factor: f64,
}

impl Default for ExplosionRule {
    fn default() -> Self {
        ExplosionRule {
            trailing_stages: 3,
            duration_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// `R₀`; stage `k` uses `R₀ 2^k`.
    pub r0: f64,
    pub horizon_map: HorizonMap,
    pub max_stages: usize,
    pub x_max: f64,
    /// Requested solve horizon `T`.
    pub horizon: f64,
    pub n: u32,
    pub fine_per_macro: u32,
    pub alpha: f64,
    pub explosion: ExplosionRule,
}

impl SolveConfig {
    pub fn new(n: u32, fine_per_macro: u32, horizon: f64) -> Self {
        SolveConfig {
            r0: 1.0,
            horizon_map: HorizonMap::default(),
            max_stages: 64,
            x_max: scheme::DEFAULT_X_MAX,
            horizon,
            n,
            fine_per_macro,
            alpha: DEFAULT_ALPHA,
            explosion: ExplosionRule::default(),
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.n as f64 * self.fine_per_macro as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    HorizonReached,
    ExplosionSuspected,
    Diverged,
    /// Stage budget spent before `T` without the shrinking-duration signature.
    StagesExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub index: usize,
    pub threshold_scale: f64,
    pub start: f64,
    pub stop: f64,
    pub start_step: usize,
    pub stop_step: usize,
    pub reason: StageStop,
    pub holder_at_stop: Option<f64>,
}

impl StageRecord {
    pub fn duration(&self) -> f64 {
        self.stop - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub stages: Vec<StageRecord>,
    /// Estimated lifetime: the stop time of the last stage.
    pub sigma_hat: f64,
    /// `[last stage start, sigma_hat + dt]`.
    pub sigma_bracket: [f64; 2],
    pub verdict: Verdict,
    pub dt: f64,
    pub final_value: Vec<f64>,
    #[serde(skip)]
    pub path: Option<PathBuffer>,
}

impl SolveReport {
    /// Rows of the concatenated path belonging to stage `k`, from its start to its stop.
    pub fn stage_rows(&self, k: usize) -> Option<(usize, usize)> {
        let path = self.path.as_ref()?;
        let s = self.stages.get(k)?;
        Some((path.lag_steps() + s.start_step, path.lag_steps() + s.stop_step + 1))
    }
}

/// Continues localized stages from `phi` until the horizon, the cap, divergence, or the stage budget.
pub fn solve_maximal(c: &CoefficientPair, phi: &Segment, cfg: &SolveConfig, noise: &NoiseGrid) -> Result<SolveReport> {
    if !(cfg.r0 > 0.0) {
        return Err(Error::domain(format!("R0 must be positive, got {}", cfg.r0)));
    }
    if cfg.max_stages == 0 {
        return Err(Error::domain("max_stages must be positive"));
    }
    cfg.horizon_map.validate(phi.memory())?;
    let dt = cfg.dt();
    let total = grid::to_steps(cfg.horizon, dt)?;
    let master = noise.view(0.0, dt)?;
    if master.available_steps() < total {
        return Err(Error::NoiseExhausted(format!(
            "solve horizon needs {total} steps, noise supplies {}",
            master.available_steps()
        )));
    }
    let scheme_cfg = SchemeConfig {
        n: cfg.n,
        fine_per_macro: cfg.fine_per_macro,
        horizon: 0.0,
        x_max: cfg.x_max,
        diagnostics: false,
    };

    let mut path = PathBuffer::from_initial(phi);
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut elapsed = 0usize;
    let mut verdict = None;

    for k in 0..cfg.max_stages {
        let big_r = cfg.r0 * 2f64.powi(k as i32);
        let wanted = grid::floor_steps(cfg.horizon_map.horizon_for(big_r, phi.memory()), dt);
        if wanted == 0 {
            return Err(Error::domain(format!("stage horizon for R = {big_r} is shorter than dt")));
        }
        let h = wanted.min(total - elapsed);
        let stage = StageConfig {
            threshold_scale: big_r,
            horizon: h as f64 * dt,
            alpha: cfg.alpha,
        };
        let start_seg = path.segment_at_step(elapsed)?;
        let view = master.shifted(elapsed)?;
        match solve_stage(c, &start_seg, &stage, &scheme_cfg, &view) {
            Ok(out) => {
                let d = path.dim();
                let first_new = out.path.lag_steps() + 1;
                path.extend_rows(&out.path.raw()[first_new * d..]);
                stages.push(StageRecord {
                    index: k,
                    threshold_scale: big_r,
                    start: elapsed as f64 * dt,
                    stop: (elapsed + out.stop_step) as f64 * dt,
                    start_step: elapsed,
                    stop_step: elapsed + out.stop_step,
                    reason: out.reason,
                    holder_at_stop: out.holder_at_stop,
                });
                elapsed += out.stop_step;
                if out.reason == StageStop::Cap {
                    verdict = Some(Verdict::ExplosionSuspected);
                    break;
                }
                if elapsed == total {
                    verdict = Some(Verdict::HorizonReached);
                    break;
                }
            }
            Err(e) if e.is_divergence() => {
                let failed_at = match &e {
                    Error::Diverged { step, .. } => elapsed + step,
                    _ => elapsed,
                };
                stages.push(StageRecord {
                    index: k,
                    threshold_scale: big_r,
                    start: elapsed as f64 * dt,
                    stop: failed_at as f64 * dt,
                    start_step: elapsed,
                    stop_step: elapsed,
                    reason: StageStop::Diverged,
                    holder_at_stop: None,
                });
                verdict = Some(Verdict::Diverged);
                break;
            }
            Err(Error::Diverged { time, step, trace, .. }) => {
                return Err(Error::Diverged {
                    time,
                    step,
                    stage: Some(k),
                    trace,
                })
            }
            Err(e) => return Err(e),
        }
    }

    let verdict = verdict.unwrap_or_else(|| {
        let rule = cfg.explosion;
        let n = rule.trailing_stages.max(1);
        let shrinking = stages.len() >= n
            && stages[stages.len() - n..]
                .iter()
                .all(|s| s.duration() < rule.duration_factor * dt && s.reason == StageStop::Threshold);
        if shrinking {
            Verdict::ExplosionSuspected
        } else {
            Verdict::StagesExhausted
        }
    });
    let last = stages.last().expect("at least one stage ran");
    let sigma_hat = last.stop;
    Ok(SolveReport {
        sigma_bracket: [last.start, sigma_hat + dt],
        sigma_hat,
        verdict,
        dt,
        final_value: path.last().to_vec(),
        stages,
        path: Some(path),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientSpec, Profile, Term};
    use crate::segment::holder_norm_of_values;

    fn ramp() -> CoefficientPair {
        CoefficientPair::scalar(Term::Constant { value: 1.0 }, Term::Zero, 1.0).unwrap()
    }

    #[test]
    fn zero_coefficients_run_to_stage_horizon() {
        let c = CoefficientPair::new(CoefficientSpec::zero(1, 1), 1.0).unwrap();
        let sc = SchemeConfig { fine_per_macro: 4, ..SchemeConfig::new(16, 0.0) };
        let phi = Segment::constant(1.0, sc.dt(), &[2.0]).unwrap();
        let noise = NoiseGrid::for_spacing(1, sc.dt(), 1.0, 1).unwrap();
        let stage = StageConfig {
            threshold_scale: 1.0,
            horizon: 1.0,
            alpha: 0.25,
        };
        let out = solve_stage(&c, &phi, &stage, &sc, &noise.view(0.0, sc.dt()).unwrap()).unwrap();
        assert_eq!(out.reason, StageStop::Horizon);
        assert_eq!(out.stop_time, 1.0);
        assert_eq!(out.holder_at_stop, Some(0.0));
    }

    #[test]
    fn ramp_stops_at_bisection_time() {
        let sc = SchemeConfig { fine_per_macro: 8, ..SchemeConfig::new(128, 0.0) };
        let dt = sc.dt();
        let phi = Segment::constant(1.0, dt, &[0.0]).unwrap();
        let noise = NoiseGrid::for_spacing(1, dt, 1.0, 1).unwrap();
        let stage = StageConfig {
            threshold_scale: 3.0,
            horizon: 1.0,
            alpha: 0.25,
        };
        let out = solve_stage(&ramp(), &phi, &stage, &sc, &noise.view(0.0, dt).unwrap()).unwrap();
        assert_eq!(out.reason, StageStop::Threshold);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.powf(0.75) + mid >= 1.5 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((out.stop_time - hi).abs() <= dt, "{} vs {hi}", out.stop_time);
        assert!(out.holder_at_stop.unwrap() >= 1.5);
    }

    #[test]
    fn huge_threshold_reaches_horizon() {
        let c = CoefficientPair::scalar(Term::terminal(Profile::NegSignSqrt), Term::Constant { value: 1.0 }, 1.0).unwrap();
        let sc = SchemeConfig { fine_per_macro: 2, ..SchemeConfig::new(32, 0.0) };
        let phi = Segment::constant(1.0, sc.dt(), &[0.3]).unwrap();
        let noise = NoiseGrid::for_spacing(1, sc.dt(), 1.0, 5).unwrap();
        let stage = StageConfig {
            threshold_scale: 1e12,
            horizon: 0.5,
            alpha: 0.25,
        };
        let out = solve_stage(&c, &phi, &stage, &sc, &noise.view(0.0, sc.dt()).unwrap()).unwrap();
        assert_eq!(out.reason, StageStop::Horizon);
        assert_eq!(out.stop_time, 0.5);
        assert!(solve_stage(
            &c,
            &phi,
            &StageConfig { horizon: 1.5, ..stage },
            &sc,
            &noise.view(0.0, sc.dt()).unwrap()
        )
        .is_err());
    }

    #[test]
    fn maximal_zero_solution_reaches_horizon() {
        let c = CoefficientPair::new(CoefficientSpec::zero(1, 1), 1.0).unwrap();
        let cfg = SolveConfig::new(16, 2, 3.0);
        let phi = Segment::constant(1.0, cfg.dt(), &[1.5]).unwrap();
        let noise = NoiseGrid::for_spacing(1, cfg.dt(), 3.0, 0).unwrap();
        let rep = solve_maximal(&c, &phi, &cfg, &noise).unwrap();
        assert_eq!(rep.verdict, Verdict::HorizonReached);
        assert_eq!(rep.sigma_hat, 3.0);
        assert_eq!(rep.stages.len(), 3);
        let path = rep.path.unwrap();
        assert!(path.raw().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn stages_concatenate_continuously_with_shifted_noise() {
        let c = CoefficientPair::scalar(
            Term::sum(vec![Term::terminal(Profile::NegSignSqrt), Term::linear(-1.0, 1.0)]),
            Term::Constant { value: 1.0 },
            1.0,
        )
        .unwrap();
        let mut cfg = SolveConfig::new(16, 4, 4.0);
        cfg.r0 = 0.25;
        let dt = cfg.dt();
        let phi = Segment::constant(1.0, dt, &[0.0]).unwrap();
        let noise = NoiseGrid::for_spacing(1, dt, 4.0, 21).unwrap();
        let rep = solve_maximal(&c, &phi, &cfg, &noise).unwrap();
        assert_eq!(rep.verdict, Verdict::HorizonReached);
        assert!(rep.stages.len() >= 3);
        let path = rep.path.as_ref().unwrap();
        let master = noise.view(0.0, dt).unwrap();
        for w in rep.stages.windows(2) {
            assert_eq!(w[0].stop_step, w[1].start_step);
            assert!(w[0].stop <= w[1].stop);
        }
        for s in &rep.stages {
            // re-run the stage from the concatenated path and compare bit-for-bit
            let seg = path.segment_at_step(s.start_step).unwrap();
            let view = master.shifted(s.start_step).unwrap();
            let mut inc = [0.0];
            let mut inc_master = [0.0];
            for j in 0..(s.stop_step - s.start_step) {
                view.increment_into(j, &mut inc);
                master.increment_into(s.start_step + j, &mut inc_master);
                assert_eq!(inc, inc_master);
            }
            let stage = StageConfig {
                threshold_scale: s.threshold_scale,
                horizon: (s.stop_step - s.start_step).max(1) as f64 * dt,
                alpha: 0.25,
            };
            let sc = SchemeConfig {
                n: 16,
                fine_per_macro: 4,
                horizon: 0.0,
                x_max: cfg.x_max,
                diagnostics: false,
            };
            let out = solve_stage(&c, &seg, &stage, &sc, &view).unwrap();
            let lag = path.lag_steps();
            for j in 0..=out.stop_step {
                assert_eq!(out.path.at_step(j), path.row(lag + s.start_step + j));
            }
            if s.reason == StageStop::Threshold && s.stop < s.start + 1.0 {
                assert!(s.holder_at_stop.unwrap() >= 0.5 * s.threshold_scale);
                let base = seg.terminal().to_vec();
                let rows = &path.raw()[lag + s.start_step..=lag + s.stop_step];
                let scratch = holder_norm_of_values(rows, 1, dt, 0.25, Some(&base));
                assert!((scratch - s.holder_at_stop.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_blow_up_is_flagged() {
        let c = CoefficientPair::scalar(Term::point(0.0, Profile::Square), Term::Zero, 1.0).unwrap();
        let mut cfg = SolveConfig::new(512, 4, 2.0);
        cfg.x_max = 1e6;
        let phi = Segment::constant(1.0, cfg.dt(), &[1.0]).unwrap();
        let noise = NoiseGrid::for_spacing(1, cfg.dt(), 2.0, 0).unwrap();
        let rep = solve_maximal(&c, &phi, &cfg, &noise).unwrap();
        assert_eq!(rep.verdict, Verdict::ExplosionSuspected);
        assert!((rep.sigma_hat - 1.0).abs() < 0.05, "{}", rep.sigma_hat);
        assert_eq!(rep.stages.last().unwrap().reason, StageStop::Cap);
    }

    #[test]
    fn stage_budget_without_shrinkage() {
        let c = CoefficientPair::new(CoefficientSpec::zero(1, 1), 1.0).unwrap();
        let mut cfg = SolveConfig::new(8, 1, 5.0);
        cfg.max_stages = 2;
        let phi = Segment::constant(1.0, cfg.dt(), &[0.0]).unwrap();
        let noise = NoiseGrid::for_spacing(1, cfg.dt(), 5.0, 0).unwrap();
        let rep = solve_maximal(&c, &phi, &cfg, &noise).unwrap();
        assert_eq!(rep.verdict, Verdict::StagesExhausted);
        assert_eq!(rep.sigma_hat, 2.0);
    }

    #[test]
    fn horizon_table_lookup() {
        let map = HorizonMap::Table {
            entries: vec![
                HorizonEntry { up_to: 2.0, horizon: 1.0 },
                HorizonEntry { up_to: 8.0, horizon: 0.5 },
            ],
        };
        map.validate(1.0).unwrap();
        assert_eq!(map.horizon_for(1.0, 1.0), 1.0);
        assert_eq!(map.horizon_for(4.0, 1.0), 0.5);
        assert_eq!(map.horizon_for(100.0, 1.0), 0.5);
        let bad = HorizonMap::Table {
            entries: vec![
                HorizonEntry { up_to: 2.0, horizon: 0.5 },
                HorizonEntry { up_to: 8.0, horizon: 1.0 },
            ],
        };
        assert!(bad.validate(1.0).is_err());
    }
}
