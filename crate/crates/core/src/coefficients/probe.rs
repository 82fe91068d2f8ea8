//! Sampling probes for the one-sided Lipschitz bound
//! `2<f(x)-f(y), x(0)-y(0)> + |||g(x)-g(y)|||² <= K ||x-y||²` (for pairs that
//! agree on `[-r, -r_C]`) and for the growth bound
//! `2<f(x), x(0)> + |||g(x)|||² <= ρ(||x||²)`.
//!
//! Sampling can only exhibit violations or lower estimates; nothing here
//! certifies either bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CoefficientPair, RhoFunction};
use crate::error::{Error, Result};
use crate::grid;
use crate::noise::derive_seed;
use crate::segment::{interp_knots, sup_dist, Segment, SegmentLike};

/// Draws random piecewise-linear segments and pairs `(x, x + δ)` with `δ = 0` on `[-r, -r_C]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPairSampler {
    pub r: f64,
    pub dt: f64,
    pub d: usize,
    /// Node values of `x` are uniform in `[-bound, bound]`; bump amplitudes in `(0, bound]`.
    pub bound: f64,
    pub r_c: f64,
    /// Number of linear pieces of `x` across `[-r, 0]`.
    pub knots: usize,
    /// Number of linear pieces of the bump across `[-r_C, 0]`.
    pub bump_knots: usize,
}

impl SegmentPairSampler {
    pub fn new(r: f64, dt: f64, d: usize, r_c: f64) -> Result<Self> {
        if !(r_c > 0.0 && r_c <= r * (1.0 + 1e-12)) {
            return Err(Error::domain(format!("r_C must lie in (0, r], got {r_c}")));
        }
        grid::to_steps(r, dt)?;
        Ok(SegmentPairSampler {
            r,
            dt,
            d,
            bound: 2.0,
            r_c,
            knots: 8,
            bump_knots: 4,
        })
    }

    pub fn sample_segment<R: Rng>(&self, rng: &mut R) -> Segment {
        let b = self.bound;
        let knots: Vec<(f64, Vec<f64>)> = (0..=self.knots)
            .map(|i| {
                let u = -self.r + self.r * i as f64 / self.knots as f64;
                (u, (0..self.d).map(|_| rng.random_range(-b..=b)).collect())
            })
            .collect();
        Segment::piecewise_linear(self.r, self.dt, &knots).expect("sampler grid validated at construction")
    }

    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> (Segment, Segment) {
        let x = self.sample_segment(rng);
        let amp = self.bound * (1.0 - rng.random::<f64>()); // (0, bound]
        let lag = x.lag_steps();
        // δ vanishes up to the first grid node at or after -r_C, so the
        // interpolants of x and y agree on all of [-r, -r_C].
        let pinned = lag - grid::floor_steps(self.r_c, self.dt).min(lag);
        let start = -((lag - pinned) as f64) * self.dt;
        let mut knots: Vec<(f64, Vec<f64>)> = vec![(start, vec![0.0; self.d])];
        for i in 1..=self.bump_knots {
            let u = start - start * i as f64 / self.bump_knots as f64;
            knots.push((u, (0..self.d).map(|_| rng.random_range(-amp..=amp)).collect()));
        }
        let mut values = x.values().to_vec();
        if -start > 0.0 {
            for i in pinned + 1..=lag {
                let u = (i as f64 - lag as f64) * self.dt;
                let bump = interp_knots(&knots, u);
                for c in 0..self.d {
                    values[i * self.d + c] += bump[c];
                }
            }
        }
        let y = Segment::new(self.r, self.dt, self.d, values).expect("finite by construction");
        (x, y)
    }
}

/// `2<f(x) - f(y), x(0) - y(0)> + |||g(x) - g(y)|||²`.
pub fn monotonicity_gap(c: &CoefficientPair, x: &Segment, y: &Segment) -> Result<f64> {
    let fx = c.eval_drift(x)?;
    let fy = c.eval_drift(y)?;
    let gx = c.eval_diffusion(x)?;
    let gy = c.eval_diffusion(y)?;
    let inner: f64 = fx
        .iter()
        .zip(&fy)
        .zip(x.terminal().iter().zip(y.terminal()))
        .map(|((a, b), (p, q))| (a - b) * (p - q))
        .sum();
    let frob: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(2.0 * inner + frob)
}

/// `2<f(x), x(0)> + |||g(x)|||² - ρ(||x||²)`; nonpositive when the sample satisfies the bound.
pub fn coercivity_gap(c: &CoefficientPair, x: &Segment, rho: &RhoFunction) -> Result<f64> {
    let fx = c.eval_drift(x)?;
    let gx = c.eval_diffusion(x)?;
    let inner: f64 = fx.iter().zip(x.terminal()).map(|(a, b)| a * b).sum();
    let frob: f64 = gx.iter().map(|a| a * a).sum();
    let norm = x.sup_norm();
    Ok(2.0 * inner + frob - rho.eval(norm * norm))
}

/// A sample singled out by a probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentWitness {
    pub index: usize,
    pub value: f64,
    pub x: Segment,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    /// `max D(x, y) / ||x - y||²` over the samples; a lower estimate of the constant.
    pub estimate: f64,
    pub samples: usize,
    pub skipped: usize,
    pub witness: Option<SegmentWitness>,
}

fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64))
}

/// Index of the largest value, ties to the lowest index.
fn argmax(values: &[Option<f64>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best
}

/// Empirical lower estimate of the one-sided Lipschitz constant over sampled pairs.
pub fn estimate_k(c: &CoefficientPair, sampler: &SegmentPairSampler, n_samples: usize, seed: u64) -> Result<KEstimate> {
    let ratios = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let (x, y) = sampler.sample_pair(&mut sample_rng(seed, i));
            let dist = sup_dist(&x, &y)?;
            if dist == 0.0 {
                return Ok(None);
            }
            Ok(Some(monotonicity_gap(c, &x, &y)? / (dist * dist)))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let best = argmax(&ratios);
    let witness = best.map(|(index, value)| {
        let (x, y) = sampler.sample_pair(&mut sample_rng(seed, index));
        SegmentWitness {
            index,
            value,
            x,
            y: Some(y),
        }
    });
    Ok(KEstimate {
        estimate: best.map_or(0.0, |b| b.1),
        samples: n_samples,
        skipped,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub samples: usize,
    pub max_gap: f64,
    pub violations: usize,
    /// The sample with the largest gap.
    pub worst: Option<SegmentWitness>,
}

/// Evaluates [`coercivity_gap`] on `n_samples` random segments.
pub fn coercivity_sweep(
    c: &CoefficientPair,
    sampler: &SegmentPairSampler,
    rho: &RhoFunction,
    n_samples: usize,
    seed: u64,
) -> Result<CoercivityReport> {
    let gaps = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let x = sampler.sample_segment(&mut sample_rng(seed, i));
            coercivity_gap(c, &x, rho).map(Some)
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    let violations = gaps.iter().filter(|g| g.is_some_and(|v| v > 0.0)).count();
    let best = argmax(&gaps);
    let worst = best.map(|(index, value)| SegmentWitness {
        index,
        value,
        x: sampler.sample_segment(&mut sample_rng(seed, index)),
        y: None,
    });
    Ok(CoercivityReport {
        samples: n_samples,
        max_gap: best.map_or(f64::NEG_INFINITY, |b| b.1),
        violations,
        worst,
    })
}
