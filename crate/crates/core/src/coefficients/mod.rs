//! Functional coefficients `f: C -> R^d`, `g: C -> R^{d x m}` built from the
//! term catalog, plus samplers that probe the monotonicity and coercivity bounds.

mod catalog;
mod probe;
mod rho;

pub use self::catalog::{Kernel, Profile, Term};
pub use self::probe::{
    coercivity_gap, coercivity_sweep, estimate_k, monotonicity_gap, CoercivityReport, KEstimate,
    SegmentPairSampler, SegmentWitness,
};
pub use self::rho::RhoFunction;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::SegmentLike;

/// Serializable description of a coefficient pair: one drift term per
/// component and a `d x m` table of diffusion terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub drift: Vec<Term>,
    pub diffusion: Vec<Vec<Term>>,
}

impl CoefficientSpec {
    /// `d = m = 1` with the given drift and diffusion terms.
    pub fn scalar(drift: Term, diffusion: Term) -> Self {
        CoefficientSpec {
            drift: vec![drift],
            diffusion: vec![vec![diffusion]],
        }
    }

    pub fn zero(d: usize, m: usize) -> Self {
        CoefficientSpec {
            drift: vec![Term::Zero; d],
            diffusion: vec![vec![Term::Zero; m]; d],
        }
    }
}

/// Validated coefficient pair on a memory window of length `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    d: usize,
    m: usize,
    r: f64,
    spec: CoefficientSpec,
}

impl CoefficientPair {
    pub fn new(spec: CoefficientSpec, r: f64) -> Result<Self> {
        let d = spec.drift.len();
        if d == 0 {
            return Err(Error::domain("drift needs at least one component"));
        }
        if spec.diffusion.len() != d {
            return Err(Error::Shape(format!("diffusion has {} rows, drift has {d}", spec.diffusion.len())));
        }
        let m = spec.diffusion[0].len();
        if m == 0 || spec.diffusion.iter().any(|row| row.len() != m) {
            return Err(Error::Shape("diffusion rows must share a positive length m".into()));
        }
        for t in spec.drift.iter().chain(spec.diffusion.iter().flatten()) {
            t.validate(r, d)?;
        }
        Ok(CoefficientPair { d, m, r, spec })
    }

    pub fn scalar(drift: Term, diffusion: Term, r: f64) -> Result<Self> {
        CoefficientPair::new(CoefficientSpec::scalar(drift, diffusion), r)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn memory(&self) -> f64 {
        self.r
    }
    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    fn check_dims<S: SegmentLike + ?Sized>(&self, x: &S) -> Result<()> {
        if x.dim() != self.d {
            return Err(Error::Shape(format!("segment has d = {}, coefficients expect {}", x.dim(), self.d)));
        }
        if (x.memory() - self.r).abs() > 1e-9 * self.r {
            return Err(Error::Shape(format!("segment memory {} differs from r = {}", x.memory(), self.r)));
        }
        Ok(())
    }

    /// Writes `f(x)` into `out` (length `d`) without allocating.
    pub fn drift_into<S: SegmentLike + ?Sized>(&self, x: &S, out: &mut [f64]) -> Result<()> {
        for (o, t) in out.iter_mut().zip(&self.spec.drift) {
            *o = t.eval(x);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Coefficient {
                what: "drift".into(),
                segment: Box::new(x.to_segment()),
            });
        }
        Ok(())
    }

    /// Writes `g(x)` row-major (`d x m`) into `out`.
    pub fn diffusion_into<S: SegmentLike + ?Sized>(&self, x: &S, out: &mut [f64]) -> Result<()> {
        for (o, t) in out.iter_mut().zip(self.spec.diffusion.iter().flatten()) {
            *o = t.eval(x);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Coefficient {
                what: "diffusion".into(),
                segment: Box::new(x.to_segment()),
            });
        }
        Ok(())
    }

    pub fn eval_drift<S: SegmentLike + ?Sized>(&self, x: &S) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let mut out = vec![0.0; self.d];
        self.drift_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_diffusion<S: SegmentLike + ?Sized>(&self, x: &S) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let mut out = vec![0.0; self.d * self.m];
        self.diffusion_into(x, &mut out)?;
        Ok(out)
    }

    /// Whether every diffusion entry is identically zero by construction.
    pub fn is_deterministic(&self) -> bool {
        self.spec.diffusion.iter().flatten().all(|t| matches!(t, Term::Zero))
            || self
                .spec
                .diffusion
                .iter()
                .flatten()
                .all(|t| matches!(t, Term::Constant { value } if *value == 0.0))
    }
}
