use serde::{Deserialize, Serialize};

use super::{replicate, LemmaTestReport};
use crate::error::{Error, Result};
use crate::noise::{derive_seed, NoiseGrid};
use crate::tolerances::GBM_CLOSED_FORM_REL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbmConfig {
    pub p: f64,
    pub c: f64,
    pub sigma_list: Vec<f64>,
    pub replicas: usize,
    pub level: u32,
    pub seed: u64,
    /// Largest σ whose terminal moment is checked against the closed form;
    /// above it the estimator's variance `exp(σ²p(2p-1))` swamps the tolerance.
    pub closed_form_max_sigma: f64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            p: 1.5,
            c: 1.0,
            sigma_list: vec![0.5, 1.0, 2.0],
            replicas: 10_000,
            level: 10,
            seed: 0,
            closed_form_max_sigma: 1.0,
        }
    }
}

/// Geometric Brownian motion on `[0, 1]`: `E(Z*(1))^p` grows without bound in σ when `p > 1`.
pub fn test_p_greater_one_counterexample(cfg: &GbmConfig) -> Result<LemmaTestReport> {
    if !(cfg.p > 1.0) {
        return Err(Error::domain(format!("the counterexample needs p > 1, got {}", cfg.p)));
    }
    if !(cfg.c > 0.0) || cfg.replicas == 0 || cfg.sigma_list.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::domain("need C > 0, replicas > 0 and nonnegative volatilities"));
    }
    let p = cfg.p;
    let sigmas = &cfg.sigma_list;
    // per replica: (Z*(1)^p, Z(1)^p) for every σ, on one shared path
    let samples: Vec<Vec<(f64, f64)>> = replicate(cfg.seed, 0, 0..cfg.replicas, |s| {
        let w = NoiseGrid::generate(1, 1.0, cfg.level, s)?;
        let dt = w.spacing();
        Ok(sigmas
            .iter()
            .map(|&sigma| {
                let mut sup = cfg.c;
                let mut z = cfg.c;
                for j in 1..=w.cells() {
                    z = cfg.c * (sigma * w.point(j)[0] - 0.5 * sigma * sigma * j as f64 * dt).exp();
                    sup = sup.max(z);
                }
                (sup.powf(p), z.powf(p))
            })
            .collect())
    })?;

    let mut rep = LemmaTestReport::new("gbm", cfg.seed, cfg.replicas);
    let mut sup_moments = Vec::new();
    for (i, &sigma) in sigmas.iter().enumerate() {
        let sup: Vec<f64> = samples.iter().map(|r| r[i].0).collect();
        let term: Vec<f64> = samples.iter().map(|r| r[i].1).collect();
        sup_moments.push(rep.mean_with_ci(format!("sup_moment_sigma_{sigma}"), &sup, derive_seed(cfg.seed, 2 * i as u64)));
        let t = rep.mean_with_ci(format!("terminal_moment_sigma_{sigma}"), &term, derive_seed(cfg.seed, 2 * i as u64 + 1));
        let exact = cfg.c.powf(p) * (0.5 * sigma * sigma * p * (p - 1.0)).exp();
        rep.point(format!("closed_form_sigma_{sigma}"), exact, 0);
        if sigma <= cfg.closed_form_max_sigma {
            rep.check_rel(format!("terminal_closed_form_sigma_{sigma}"), t, exact, GBM_CLOSED_FORM_REL, cfg.replicas);
        }
    }
    let increasing = sigmas.windows(2).all(|w| w[0] < w[1]);
    if increasing && sigmas.len() >= 2 {
        let worst = sup_moments.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
        rep.check(
            "sup_moment_strictly_increasing",
            worst > 1.0,
            worst,
            1.0,
            "min ratio of consecutive E(Z*)^p > 1",
            cfg.replicas,
        );
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volatility_is_exact() {
        let cfg = GbmConfig {
            c: 4.0,
            sigma_list: vec![0.0],
            replicas: 20,
            level: 4,
            ..Default::default()
        };
        let rep = test_p_greater_one_counterexample(&cfg).unwrap();
        assert_eq!(rep.estimate("sup_moment_sigma_0").unwrap().value, 8.0);
        assert_eq!(rep.estimate("terminal_moment_sigma_0").unwrap().value, 8.0);
        assert!(rep.passed());
    }

    #[test]
    fn moments_increase_in_volatility() {
        let cfg = GbmConfig {
            replicas: 4000,
            level: 8,
            seed: 2,
            ..Default::default()
        };
        let rep = test_p_greater_one_counterexample(&cfg).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        let exact = rep.estimate("closed_form_sigma_1").unwrap().value;
        assert!((exact - 0.375f64.exp()).abs() < 1e-15);
        assert!(test_p_greater_one_counterexample(&GbmConfig { p: 0.5, ..cfg }).is_err());
    }
}
