//! Simulation and diagnostics for stochastic functional differential equations
//! with bounded memory, `dX(t) = f(X_t) dt + g(X_t) dW(t)`, `X_0 = φ`.
//!
//! * [`segment`]: segments of `C([-r, 0]; R^d)`, path buffers, discrete Hölder norms.
//! * [`coefficients`]: the coefficient catalog and monotonicity/coercivity probes.
//! * [`noise`]: dyadic Brownian grids with bridge refinement.
//! * [`scheme`]: the drift-frozen Euler–Maruyama stepper.
//! * [`solver`]: Hölder-threshold localization, continuation to the maximal
//!   solution, and resolution-ladder convergence diagnostics.
//! * [`lemmalab`]: Monte Carlo checks of stochastic Gronwall and Hölder-tail bounds.

pub mod coefficients;
pub mod error;
pub mod grid;
pub mod lemmalab;
pub mod noise;
pub mod scheme;
pub mod segment;
pub mod solver;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
