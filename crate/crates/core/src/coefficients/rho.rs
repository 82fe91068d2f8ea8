use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growth bound `ρ: [0, ∞) -> (0, ∞)` for the coercivity check and the
/// non-explosion comparison dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoFunction {
    /// `a + b u`
    Affine { a: f64, b: f64 },
    /// `a (1 + u)^beta`
    Power { a: f64, beta: f64 },
    /// `a (1 + u) ln(e + u)`
    Logarithmic { a: f64 },
}

impl RhoFunction {
    pub fn new_checked(self) -> Result<Self> {
        let ok = match self {
            RhoFunction::Affine { a, b } => a >= 0.0 && b >= 0.0 && a + b > 0.0,
            RhoFunction::Power { a, beta } => a > 0.0 && beta >= 0.0,
            RhoFunction::Logarithmic { a } => a > 0.0,
        };
        if !ok {
            return Err(Error::domain(format!("{self:?} is not positive and nondecreasing")));
        }
        // spot check on a log-spaced grid; ρ(0) = 0 is tolerated for the
        // coercivity probe, where it only makes the bound stricter
        let mut prev = self.eval(0.0);
        for k in 0..=60 {
            let u = 10f64.powf(-3.0 + 0.15 * k as f64);
            let v = self.eval(u);
            if !(v > 0.0) || v < prev {
                return Err(Error::domain(format!("{self:?} fails positivity/monotonicity at u = {u}")));
            }
            prev = v;
        }
        Ok(self)
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            RhoFunction::Affine { a, b } => a + b * u,
            RhoFunction::Power { a, beta } => a * (1.0 + u).powf(beta),
            RhoFunction::Logarithmic { a } => a * (1.0 + u) * (std::f64::consts::E + u).ln(),
        }
    }

    /// Whether `∫_0^∞ 1/ρ(u) du = ∞`, decided analytically per family.
    pub fn integral_diverges(&self) -> bool {
        match *self {
            RhoFunction::Affine { .. } | RhoFunction::Logarithmic { .. } => true,
            RhoFunction::Power { beta, .. } => beta <= 1.0,
        }
    }
}
