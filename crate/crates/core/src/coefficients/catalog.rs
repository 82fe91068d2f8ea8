//! Built-in scalar functionals on segments and the profiles they apply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::SegmentLike;

/// Scalar profile `φ: R -> R` applied inside catalog terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Identity,
    /// `-sign(s) sqrt(|s|)`, with `sign(0) = 0`.
    NegSignSqrt,
    Square,
    Cube,
    NegCube,
    Sin,
    Tanh,
    Affine { slope: f64, intercept: f64 },
    Constant { value: f64 },
}

impl Profile {
    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            Profile::Identity => s,
            Profile::NegSignSqrt => {
                if s > 0.0 {
                    -s.sqrt()
                } else if s < 0.0 {
                    (-s).sqrt()
                } else {
                    0.0
                }
            }
            Profile::Square => s * s,
            Profile::Cube => s * s * s,
            Profile::NegCube => -(s * s * s),
            Profile::Sin => s.sin(),
            Profile::Tanh => s.tanh(),
            Profile::Affine { slope, intercept } => slope * s + intercept,
            Profile::Constant { value } => *value,
        }
    }

    /// Known analytically; `false` means "not guaranteed".
    pub fn is_non_increasing(&self) -> bool {
        match self {
            Profile::NegSignSqrt | Profile::NegCube | Profile::Constant { .. } => true,
            Profile::Affine { slope, .. } => *slope <= 0.0,
            _ => false,
        }
    }
}

/// Weight function `k` of a kernel integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    Constant { value: f64 },
    /// Linear interpolation through `[s, k(s)]` points, constant beyond the ends.
    Table { points: Vec<[f64; 2]> },
}

impl Kernel {
    fn at(&self, s: f64) -> f64 {
        match self {
            Kernel::Constant { value } => *value,
            Kernel::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if s <= first[0] {
                    return first[1];
                }
                if s >= last[0] {
                    return last[1];
                }
                let k = points.partition_point(|p| p[0] <= s);
                let (a, b) = (points[k - 1], points[k]);
                a[1] + (s - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Kernel::Table { points } = self {
            if points.is_empty() {
                return Err(Error::domain("kernel table is empty"));
            }
            if points.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                return Err(Error::domain("kernel table abscissae must increase strictly"));
            }
        }
        Ok(())
    }
}

fn zero() -> usize {
    0
}

/// A scalar functional `C([-r,0]; R^d) -> R`. Lags are times in `[-r, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Term {
    Zero,
    Constant {
        value: f64,
    },
    /// `coeff * x_component(lag)`.
    Linear {
        #[serde(default = "zero")]
        component: usize,
        #[serde(default)]
        lag: f64,
        coeff: f64,
    },
    /// `φ(Σ w_i x_component(t_i))` with `w_i >= 0`.
    PointEval {
        #[serde(default = "zero")]
        component: usize,
        weights: Vec<f64>,
        lags: Vec<f64>,
        profile: Profile,
    },
    /// `∫_{-r}^{-r0} ψ(x_component(s)) k(s) ds`, trapezoidal on the segment grid.
    KernelIntegral {
        #[serde(default = "zero")]
        component: usize,
        r0: f64,
        psi: Profile,
        kernel: Kernel,
    },
    /// `φ(x_component(0))` with `φ` non-increasing.
    TerminalMonotone {
        #[serde(default = "zero")]
        component: usize,
        profile: Profile,
    },
    Sum {
        terms: Vec<Term>,
    },
    Scaled {
        factor: f64,
        term: Box<Term>,
    },
}

impl Term {
    pub fn linear(lag: f64, coeff: f64) -> Term {
        Term::Linear { component: 0, lag, coeff }
    }

    pub fn point(lag: f64, profile: Profile) -> Term {
        Term::PointEval {
            component: 0,
            weights: vec![1.0],
            lags: vec![lag],
            profile,
        }
    }

    pub fn terminal(profile: Profile) -> Term {
        Term::TerminalMonotone { component: 0, profile }
    }

    pub fn sum(terms: Vec<Term>) -> Term {
        Term::Sum { terms }
    }

    pub fn scaled(factor: f64, term: Term) -> Term {
        Term::Scaled {
            factor,
            term: Box::new(term),
        }
    }

    pub fn validate(&self, r: f64, d: usize) -> Result<()> {
        let lag_ok = |t: f64| t <= 1e-12 && t >= -r * (1.0 + 1e-12);
        let comp_ok = |c: usize| {
            if c < d {
                Ok(())
            } else {
                Err(Error::domain(format!("component {c} out of range for d = {d}")))
            }
        };
        match self {
            Term::Zero | Term::Constant { .. } => Ok(()),
            Term::Linear { component, lag, .. } => {
                comp_ok(*component)?;
                if !lag_ok(*lag) {
                    return Err(Error::domain(format!("lag {lag} outside [-{r}, 0]")));
                }
                Ok(())
            }
            Term::PointEval {
                component,
                weights,
                lags,
                ..
            } => {
                comp_ok(*component)?;
                if weights.len() != lags.len() || weights.is_empty() {
                    return Err(Error::domain("point_eval needs matching non-empty weights and lags"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::domain("point_eval weights must be nonnegative"));
                }
                if let Some(t) = lags.iter().find(|t| !lag_ok(**t)) {
                    return Err(Error::domain(format!("lag {t} outside [-{r}, 0]")));
                }
                Ok(())
            }
            Term::KernelIntegral {
                component, r0, kernel, ..
            } => {
                comp_ok(*component)?;
                if !(*r0 > 0.0 && *r0 < r) {
                    return Err(Error::domain(format!("kernel_integral needs 0 < r0 < r, got r0 = {r0}")));
                }
                kernel.validate()
            }
            Term::TerminalMonotone { component, profile } => {
                comp_ok(*component)?;
                if !profile.is_non_increasing() {
                    return Err(Error::domain(format!("terminal_monotone profile {profile:?} is not non-increasing")));
                }
                Ok(())
            }
            Term::Sum { terms } => terms.iter().try_for_each(|t| t.validate(r, d)),
            Term::Scaled { term, .. } => term.validate(r, d),
        }
    }

    /// Lags this term reads, `None` for terms that read an interval (kernel integrals).
    pub fn support_lags(&self) -> Option<Vec<f64>> {
        match self {
            Term::Zero | Term::Constant { .. } => Some(vec![]),
            Term::Linear { lag, .. } => Some(vec![*lag]),
            Term::PointEval { lags, .. } => Some(lags.clone()),
            Term::TerminalMonotone { .. } => Some(vec![0.0]),
            Term::KernelIntegral { .. } => None,
            Term::Sum { terms } => terms.iter().try_fold(Vec::new(), |mut acc, t| {
                acc.extend(t.support_lags()?);
                Some(acc)
            }),
            Term::Scaled { term, .. } => term.support_lags(),
        }
    }

    pub fn eval<S: SegmentLike + ?Sized>(&self, x: &S) -> f64 {
        match self {
            Term::Zero => 0.0,
            Term::Constant { value } => *value,
            Term::Linear { component, lag, coeff } => coeff * x.eval_component(*component, *lag),
            Term::PointEval {
                component,
                weights,
                lags,
                profile,
            } => {
                let s: f64 = weights
                    .iter()
                    .zip(lags)
                    .map(|(w, t)| w * x.eval_component(*component, *t))
                    .sum();
                profile.apply(s)
            }
            Term::KernelIntegral {
                component,
                r0,
                psi,
                kernel,
            } => kernel_integral(x, *component, *r0, psi, kernel),
            Term::TerminalMonotone { component, profile } => profile.apply(x.terminal()[*component]),
            Term::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            Term::Scaled { factor, term } => factor * term.eval(x),
        }
    }
}

fn kernel_integral<S: SegmentLike + ?Sized>(x: &S, comp: usize, r0: f64, psi: &Profile, kernel: &Kernel) -> f64 {
    let dt = x.dt();
    let lag = x.lag_steps();
    let r = lag as f64 * dt;
    let upper = -r0;
    let integrand = |i: usize| {
        let s = (i as f64 - lag as f64) * dt;
        psi.apply(x.node(i)[comp]) * kernel.at(s)
    };
    let span = (r - r0) / dt;
    let full = {
        let k = span.round();
        if (span - k).abs() <= 1e-9 * k.max(1.0) {
            k as usize
        } else {
            span.floor() as usize
        }
    };
    let mut acc = 0.0;
    let mut prev = integrand(0);
    for i in 1..=full {
        let cur = integrand(i);
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    let s_end = -r + full as f64 * dt;
    let rest = upper - s_end;
    if rest > 1e-12 * dt {
        let tail = psi.apply(x.eval_component(comp, upper)) * kernel.at(upper);
        acc += 0.5 * rest * (prev + tail);
    }
    acc
}
