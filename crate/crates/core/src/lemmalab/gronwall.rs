use serde::{Deserialize, Serialize};

use super::{replicate, LemmaTestReport};
use crate::error::{Error, Result};
use crate::noise::{derive_seed, NoiseGrid};
use crate::stats;
use crate::tolerances::{H_SWEEP_SPREAD, HOMOGENEITY_REL, PATHWISE_REL, STABILITY_REL};

/// Martingale part `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Martingale {
    Zero,
    /// `M = v W`.
    Brownian { v: f64 },
    /// `M = ∫ v sin(W) dW` (Itô sums).
    SinIntegrand { v: f64 },
}

impl Martingale {
    fn scaled(self, xi: f64) -> Self {
        match self {
            Martingale::Zero => Martingale::Zero,
            Martingale::Brownian { v } => Martingale::Brownian { v: xi * v },
            Martingale::SinIntegrand { v } => Martingale::SinIntegrand { v: xi * v },
        }
    }
}

/// Adapted nonnegative process `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HProcess {
    Zero,
    /// `H(t) = h t`.
    Linear { h: f64 },
    /// `H(t) = h sup_{s<=t} |W'(s)|` for a Brownian motion `W'` independent of `W`.
    SupIndependent { h: f64 },
}

impl HProcess {
    fn scaled(self, xi: f64) -> Self {
        match self {
            HProcess::Zero => HProcess::Zero,
            HProcess::Linear { h } => HProcess::Linear { h: xi * h },
            HProcess::SupIndependent { h } => HProcess::SupIndependent { h: xi * h },
        }
    }

    fn with_h(self, h: f64) -> Result<Self> {
        match self {
            HProcess::Zero => Err(Error::domain("an h-sweep needs a nonzero H process")),
            HProcess::Linear { .. } => Ok(HProcess::Linear { h }),
            HProcess::SupIndependent { .. } => Ok(HProcess::SupIndependent { h }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GronwallProcessSpec {
    /// Drift gain `K`.
    pub k: f64,
    /// Additive constant `C >= 0`.
    pub c: f64,
    pub martingale: Martingale,
    pub h_process: HProcess,
    pub horizon: f64,
    /// Moment order in `(0, 1)`.
    pub p: f64,
    /// Moment order of `H` (Lemma 6 only).
    pub alpha: Option<f64>,
    /// Dyadic level of the time grid on `[0, horizon]`.
    pub level: u32,
    pub cap: f64,
}

impl Default for GronwallProcessSpec {
    fn default() -> Self {
        GronwallProcessSpec {
            k: 1.0,
            c: 1.0,
            martingale: Martingale::Brownian { v: 1.0 },
            h_process: HProcess::Zero,
            horizon: 1.0,
            p: 0.5,
            alpha: None,
            level: 10,
            cap: 1e12,
        }
    }
}

impl GronwallProcessSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.k >= 0.0) || !(self.c >= 0.0) {
            return Err(Error::domain("K and C must be nonnegative"));
        }
        if !(self.horizon > 0.0) || !(self.cap > 0.0) {
            return Err(Error::domain("horizon and cap must be positive"));
        }
        if self.level > 24 {
            return Err(Error::domain(format!("level {} is too fine", self.level)));
        }
        let h_ok = match self.h_process {
            HProcess::Zero => true,
            HProcess::Linear { h } | HProcess::SupIndependent { h } => h >= 0.0,
        };
        if !h_ok {
            return Err(Error::domain("H must be nonnegative"));
        }
        Ok(())
    }

    /// Brownian coordinates needed: `W`, plus `W'` for [`HProcess::SupIndependent`].
    pub fn noise_dim(&self) -> usize {
        match self.h_process {
            HProcess::SupIndependent { .. } => 2,
            _ => 1,
        }
    }

    fn noise(&self, seed: u64) -> Result<NoiseGrid> {
        NoiseGrid::generate(self.noise_dim(), self.horizon, self.level, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallPath {
    pub dt: f64,
    pub y: Vec<f64>,
    /// Running maximum of `y`.
    pub y_star: Vec<f64>,
    /// `sup H` over the simulated range.
    pub h_star: f64,
    /// Grid index at which `|Y|` first exceeded the cap.
    pub capped_at: Option<usize>,
}

impl GronwallPath {
    pub fn y_star_final(&self) -> f64 {
        *self.y_star.last().unwrap()
    }
}

/// Euler scheme for `Y(t) = K ∫₀ᵗ Y*(u) du + M(t) + H(t) + C`.
pub fn simulate_gronwall_equality(spec: &GronwallProcessSpec, noise: &NoiseGrid) -> Result<GronwallPath> {
    spec.validate()?;
    if noise.dim() < spec.noise_dim() {
        return Err(Error::Shape(format!("noise has {} coordinates, need {}", noise.dim(), spec.noise_dim())));
    }
    if (noise.horizon() - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::Shape(format!("noise horizon {} differs from {}", noise.horizon(), spec.horizon)));
    }
    let n = noise.cells();
    let dt = noise.spacing();
    let mut y = Vec::with_capacity(n + 1);
    let mut y_star = Vec::with_capacity(n + 1);
    y.push(spec.c);
    y_star.push(spec.c);
    let (mut integral, mut ito, mut wsup, mut h_star) = (0.0, 0.0, 0.0f64, 0.0f64);
    let mut capped_at = None;
    for j in 0..n {
        integral += spec.k * y_star[j] * dt;
        let w0 = noise.point(j)[0];
        let w1 = noise.point(j + 1)[0];
        let m = match spec.martingale {
            Martingale::Zero => 0.0,
            Martingale::Brownian { v } => v * w1,
            Martingale::SinIntegrand { v } => {
                ito += v * w0.sin() * (w1 - w0);
                ito
            }
        };
        let h = match spec.h_process {
            HProcess::Zero => 0.0,
            HProcess::Linear { h } => h * (j + 1) as f64 * dt,
            HProcess::SupIndependent { h } => {
                wsup = wsup.max(noise.point(j + 1)[1].abs());
                h * wsup
            }
        };
        h_star = h_star.max(h);
        let next = integral + m + h + spec.c;
        y.push(next);
        y_star.push(y_star[j].max(next));
        if !next.is_finite() || next.abs() > spec.cap {
            capped_at = Some(j + 1);
            break;
        }
    }
    Ok(GronwallPath {
        dt,
        y,
        y_star,
        h_star,
        capped_at,
    })
}

/// Per-replica `(Y*(T), H*(T), capped)`.
fn terminal_sups(spec: &GronwallProcessSpec, seed: u64, stream: u64, n: usize) -> Result<Vec<(f64, f64, bool)>> {
    replicate(seed, stream, 0..n, |s| {
        let path = simulate_gronwall_equality(spec, &spec.noise(s)?)?;
        Ok((path.y_star_final(), path.h_star, path.capped_at.is_some()))
    })
}

fn powers(sups: &[(f64, f64, bool)], p: f64) -> Vec<f64> {
    sups.iter().map(|s| s.0.max(0.0).powf(p)).collect()
}

/// Largest `|a / (ξ^p b) - 1|` over paired replicas on shared noise.
fn pathwise_gap(base: &[(f64, f64, bool)], scaled: &[(f64, f64, bool)], xi: f64, p: f64) -> f64 {
    let f = xi.powf(p);
    base.iter()
        .zip(scaled)
        .map(|(b, s)| {
            let (a, b) = (s.0.max(0.0).powf(p), f * b.0.max(0.0).powf(p));
            if a == b {
                0.0
            } else {
                (a / b - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma5Config {
    pub replicas: usize,
    pub seed: u64,
    pub xi: f64,
    pub k_list: Vec<f64>,
    /// Replicas used for the exact pathwise homogeneity check.
    pub pathwise_replicas: usize,
}

impl Default for Lemma5Config {
    fn default() -> Self {
        Lemma5Config {
            replicas: 10_000,
            seed: 0,
            xi: 4.0,
            k_list: vec![0.5, 1.0, 2.0, 4.0],
            pathwise_replicas: 500,
        }
    }
}

const STREAM_BASE: u64 = 0;
const STREAM_SCALED: u64 = 1;

/// Finiteness, `(C, v)`-homogeneity and at-most-exponential growth in `K` of `E(Y*(T))^p`.
pub fn test_lemma5_scaling(spec: &GronwallProcessSpec, cfg: &Lemma5Config) -> Result<LemmaTestReport> {
    spec.validate()?;
    if cfg.replicas < 2 || !(cfg.xi > 0.0) {
        return Err(Error::domain("need at least two replicas and xi > 0"));
    }
    let n = cfg.replicas;
    let p = spec.p;
    let mut rep = LemmaTestReport::new("lemma5", cfg.seed, n);

    let doubled = terminal_sups(spec, cfg.seed, STREAM_BASE, 2 * n)?;
    let caps = doubled.iter().filter(|s| s.2).count();
    rep.check("no_cap_hits", caps == 0, caps as f64, 0.0, "cap hits == 0", 2 * n);
    let pw = powers(&doubled, p);
    let est = rep.mean_with_ci("moment", &pw[..n], derive_seed(cfg.seed, 100));
    let est2 = rep.mean_with_ci("moment_doubled", &pw, derive_seed(cfg.seed, 101));
    let change = (est2 / est - 1.0).abs();
    rep.check(
        "stable_under_doubling",
        est.is_finite() && change < STABILITY_REL,
        change,
        STABILITY_REL,
        format!("|E_2N / E_N - 1| < {STABILITY_REL}"),
        2 * n,
    );

    let scaled_spec = GronwallProcessSpec {
        c: cfg.xi * spec.c,
        martingale: spec.martingale.scaled(cfg.xi),
        ..*spec
    };
    let scaled = terminal_sups(&scaled_spec, cfg.seed, STREAM_SCALED, n)?;
    let est_scaled = rep.mean_with_ci("moment_scaled", &powers(&scaled, p), derive_seed(cfg.seed, 102));
    let target = cfg.xi.powf(p);
    rep.point("homogeneity_ratio", est_scaled / est, n);
    rep.check_rel("homogeneity_ratio", est_scaled / est, target, HOMOGENEITY_REL, n);

    let m = cfg.pathwise_replicas.min(n);
    let shared = terminal_sups(&scaled_spec, cfg.seed, STREAM_BASE, m)?;
    let gap = pathwise_gap(&doubled[..m], &shared, cfg.xi, p);
    rep.check("homogeneity_pathwise", gap <= PATHWISE_REL, gap, PATHWISE_REL, "max relative gap", m);

    if !cfg.k_list.is_empty() {
        let mut kt = Vec::new();
        let mut logs = Vec::new();
        for &k in &cfg.k_list {
            let s = GronwallProcessSpec { k, ..*spec };
            let sups = terminal_sups(&s, cfg.seed, STREAM_BASE, n)?;
            let e = stats::mean(&powers(&sups, p));
            rep.point(format!("moment_k_{k}"), e, n);
            kt.push(k * spec.horizon);
            logs.push(e.ln());
        }
        let worst_drop = logs.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
        rep.check(
            "log_moment_nondecreasing_in_k",
            worst_drop <= 0.0,
            worst_drop,
            0.0,
            "max decrease of log E(Y*)^p between consecutive K",
            n,
        );
        if kt.len() >= 2 {
            let fit = rep.fit("log_moment_vs_kt", &kt, &logs);
            let offset = kt
                .iter()
                .zip(&logs)
                .map(|(x, y)| y - (fit.intercept + fit.slope * x))
                .fold(0.0, f64::max);
            rep.point("dominating_line_offset", offset, n);
            rep.check(
                "exponential_growth_slope_finite",
                fit.slope.is_finite() && offset.is_finite(),
                fit.slope,
                0.0,
                "fitted slope and dominating offset finite",
                n,
            );
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma6Config {
    pub replicas: usize,
    pub seed: u64,
    pub xi: f64,
    pub h_list: Vec<f64>,
    pub pathwise_replicas: usize,
}

impl Default for Lemma6Config {
    fn default() -> Self {
        Lemma6Config {
            replicas: 10_000,
            seed: 0,
            xi: 9.0,
            h_list: vec![0.5, 1.0, 2.0, 4.0],
            pathwise_replicas: 500,
        }
    }
}

/// `(M, H)`-homogeneity and boundedness of `E(Z*)^p / (E H*^α)^{p/α}` across `h`.
pub fn test_lemma6_homogeneity(spec: &GronwallProcessSpec, cfg: &Lemma6Config) -> Result<LemmaTestReport> {
    spec.validate()?;
    let p = spec.p;
    let alpha = spec.alpha.ok_or_else(|| Error::domain("Lemma 6 needs the H moment order alpha"))?;
    let lower = (1.0 + p) / (1.0 - p);
    if !(alpha > lower) {
        return Err(Error::domain(format!("alpha must exceed (1+p)/(1-p) = {lower}, got {alpha}")));
    }
    if spec.c != 0.0 {
        return Err(Error::domain("Lemma 6 dynamics have no constant term; set c = 0"));
    }
    if cfg.replicas < 2 || !(cfg.xi > 0.0) {
        return Err(Error::domain("need at least two replicas and xi > 0"));
    }
    let n = cfg.replicas;
    let mut rep = LemmaTestReport::new("lemma6", cfg.seed, n);

    let base = terminal_sups(spec, cfg.seed, STREAM_BASE, n)?;
    let est = rep.mean_with_ci("moment", &powers(&base, p), derive_seed(cfg.seed, 100));
    let scaled_spec = GronwallProcessSpec {
        martingale: spec.martingale.scaled(cfg.xi),
        h_process: spec.h_process.scaled(cfg.xi),
        ..*spec
    };
    let scaled = terminal_sups(&scaled_spec, cfg.seed, STREAM_SCALED, n)?;
    let est_scaled = rep.mean_with_ci("moment_scaled", &powers(&scaled, p), derive_seed(cfg.seed, 102));
    if est == 0.0 && est_scaled == 0.0 {
        rep.check("homogeneity_ratio", true, 0.0, HOMOGENEITY_REL, "both moments vanish", n);
    } else {
        rep.point("homogeneity_ratio", est_scaled / est, n);
        rep.check_rel("homogeneity_ratio", est_scaled / est, cfg.xi.powf(p), HOMOGENEITY_REL, n);
    }
    let m = cfg.pathwise_replicas.min(n);
    let shared = terminal_sups(&scaled_spec, cfg.seed, STREAM_BASE, m)?;
    let gap = pathwise_gap(&base[..m], &shared, cfg.xi, p);
    rep.check("homogeneity_pathwise", gap <= PATHWISE_REL, gap, PATHWISE_REL, "max relative gap", m);

    if !cfg.h_list.is_empty() {
        let mut ratios = Vec::new();
        for &h in &cfg.h_list {
            let s = GronwallProcessSpec {
                h_process: spec.h_process.with_h(h)?,
                ..*spec
            };
            let sups = terminal_sups(&s, cfg.seed, STREAM_BASE, n)?;
            let num = stats::mean(&powers(&sups, p));
            let h_alpha: Vec<f64> = sups.iter().map(|s| s.1.powf(alpha)).collect();
            let den = stats::mean(&h_alpha).powf(p / alpha);
            rep.point(format!("normalized_moment_h_{h}"), num / den, n);
            ratios.push(num / den);
        }
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = max / min;
        rep.check(
            "h_sweep_spread",
            spread.is_finite() && spread <= H_SWEEP_SPREAD,
            spread,
            H_SWEEP_SPREAD,
            format!("max/min over h <= {H_SWEEP_SPREAD}"),
            n,
        );
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GronwallProcessSpec {
        GronwallProcessSpec {
            level: 8,
            ..Default::default()
        }
    }

    #[test]
    fn trivial_dynamics_stay_constant() {
        let s = GronwallProcessSpec {
            k: 0.0,
            c: 2.5,
            martingale: Martingale::Zero,
            ..spec()
        };
        let path = simulate_gronwall_equality(&s, &s.noise(1).unwrap()).unwrap();
        assert!(path.y.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn deterministic_growth_is_exponential() {
        let s = GronwallProcessSpec {
            martingale: Martingale::Zero,
            level: 12,
            ..spec()
        };
        let path = simulate_gronwall_equality(&s, &s.noise(1).unwrap()).unwrap();
        let dt = path.dt;
        let euler = (1.0 + dt).powi(4096);
        assert!((path.y.last().unwrap() - euler).abs() < 1e-12 * euler);
        // classical Euler error e T dt / 2
        assert!((path.y.last().unwrap() - std::f64::consts::E).abs() < std::f64::consts::E * dt);
    }

    #[test]
    fn running_max_matches_stored_values() {
        let s = GronwallProcessSpec {
            k: 0.3,
            martingale: Martingale::SinIntegrand { v: 2.0 },
            h_process: HProcess::SupIndependent { h: 0.5 },
            ..spec()
        };
        for seed in 0..20 {
            let path = simulate_gronwall_equality(&s, &s.noise(seed).unwrap()).unwrap();
            for j in 0..path.y.len() {
                let oracle = path.y[..=j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(path.y_star[j], oracle);
            }
        }
    }

    #[test]
    fn nonnegative_without_martingale() {
        let s = GronwallProcessSpec {
            martingale: Martingale::Zero,
            h_process: HProcess::SupIndependent { h: 1.0 },
            c: 0.0,
            ..spec()
        };
        for seed in 0..10 {
            let path = simulate_gronwall_equality(&s, &s.noise(seed).unwrap()).unwrap();
            assert!(path.y.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn scaling_is_pathwise_exact() {
        let s = GronwallProcessSpec {
            martingale: Martingale::Brownian { v: 0.7 },
            h_process: HProcess::Linear { h: 0.3 },
            c: 0.4,
            ..spec()
        };
        let xi = 3.0;
        let t = GronwallProcessSpec {
            c: xi * s.c,
            martingale: s.martingale.scaled(xi),
            h_process: s.h_process.scaled(xi),
            ..s
        };
        let noise = s.noise(4).unwrap();
        let a = simulate_gronwall_equality(&s, &noise).unwrap();
        let b = simulate_gronwall_equality(&t, &noise).unwrap();
        for (x, y) in a.y.iter().zip(&b.y) {
            assert!((xi * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn brownian_mean_respects_lower_bound() {
        let s = spec();
        let ys = replicate(3, 0, 0..10_000, |seed| {
            Ok(*simulate_gronwall_equality(&s, &s.noise(seed)?)?.y.last().unwrap())
        })
        .unwrap();
        let m = stats::mean(&ys);
        let e = std::f64::consts::E;
        assert!(m >= e * (1.0 - crate::tolerances::GRONWALL_MEAN_SLACK), "{m}");
    }

    #[test]
    fn cap_is_flagged() {
        let s = GronwallProcessSpec {
            k: 50.0,
            cap: 1e3,
            martingale: Martingale::Zero,
            ..spec()
        };
        let path = simulate_gronwall_equality(&s, &s.noise(0).unwrap()).unwrap();
        let j = path.capped_at.unwrap();
        assert_eq!(path.y.len(), j + 1);
        assert!(path.y[j] > 1e3);
    }

    #[test]
    fn lemma5_assertions_hold() {
        let cfg = Lemma5Config {
            replicas: 2000,
            seed: 11,
            xi: 4.0,
            ..Default::default()
        };
        let rep = test_lemma5_scaling(&spec(), &cfg).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        assert_eq!(rep.assertions.len(), 6);
    }

    #[test]
    fn lemma5_trivial_moment_is_exact() {
        let s = GronwallProcessSpec {
            k: 0.0,
            c: 9.0,
            martingale: Martingale::Zero,
            ..spec()
        };
        let cfg = Lemma5Config {
            replicas: 50,
            k_list: vec![],
            ..Default::default()
        };
        let rep = test_lemma5_scaling(&s, &cfg).unwrap();
        assert_eq!(rep.estimate("moment").unwrap().value, 3.0);
        assert!(rep.passed());
    }

    #[test]
    fn lemma6_checks() {
        let s = GronwallProcessSpec {
            c: 0.0,
            p: 0.25,
            alpha: Some(3.0),
            h_process: HProcess::SupIndependent { h: 1.0 },
            ..spec()
        };
        let cfg = Lemma6Config {
            replicas: 2000,
            seed: 5,
            ..Default::default()
        };
        let rep = test_lemma6_homogeneity(&s, &cfg).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        assert!(test_lemma6_homogeneity(&GronwallProcessSpec { alpha: Some(1.5), ..s }, &cfg).is_err());
        assert!(test_lemma6_homogeneity(&GronwallProcessSpec { c: 1.0, ..s }, &cfg).is_err());
    }

    #[test]
    fn lemma6_zero_inputs_vanish() {
        let s = GronwallProcessSpec {
            c: 0.0,
            p: 1.0 / 3.0,
            alpha: Some(3.0),
            martingale: Martingale::Zero,
            h_process: HProcess::Zero,
            ..spec()
        };
        let cfg = Lemma6Config {
            replicas: 10,
            h_list: vec![],
            ..Default::default()
        };
        let rep = test_lemma6_homogeneity(&s, &cfg).unwrap();
        assert_eq!(rep.estimate("moment").unwrap().value, 0.0);
        assert!(rep.passed());
    }
}
