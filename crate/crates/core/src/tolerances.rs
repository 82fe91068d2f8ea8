//! Frozen statistical tolerances. Calibrated on pilot runs, then fixed, so a
//! failure is reproducible from its seed.

/// Relative tolerance for moment-ratio (homogeneity) checks at 10⁴ replicas.
pub const HOMOGENEITY_REL: f64 = 0.10;
/// Relative change allowed when the replica count is doubled.
pub const STABILITY_REL: f64 = 0.10;
/// Relative tolerance for the GBM terminal moment against its closed form.
pub const GBM_CLOSED_FORM_REL: f64 = 0.25;
/// Significance level for Kolmogorov–Smirnov normality checks.
pub const KS_SIGNIFICANCE: f64 = 0.001;
/// Largest allowed max/min ratio of the Lemma 6 normalized moment across `h`.
pub const H_SWEEP_SPREAD: f64 = 3.0;
/// Minimum R² of the log-tail fit against `u²`.
pub const TAIL_FIT_R2: f64 = 0.9;
/// Quantile range used for the tail fit.
pub const TAIL_QUANTILES: (f64, f64) = (0.50, 0.99);
/// Relative error allowed for pathwise (exact up to rounding) homogeneity.
pub const PATHWISE_REL: f64 = 1e-9;
/// Relative gap between a blow-up estimate and its reference.
pub const BLOW_UP_REL: f64 = 0.05;
/// Lower-bound slack for `E Y(1) >= e` in the Brownian Gronwall example.
pub const GRONWALL_MEAN_SLACK: f64 = 0.05;
/// Bootstrap resamples and confidence level for reported estimates.
pub const BOOTSTRAP_RESAMPLES: usize = 400;
pub const BOOTSTRAP_LEVEL: f64 = 0.95;
