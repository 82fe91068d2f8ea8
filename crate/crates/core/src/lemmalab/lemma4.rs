use serde::{Deserialize, Serialize};

use super::{replicate, LemmaTestReport};
use crate::coefficients::RhoFunction;
use crate::error::{Error, Result};
use crate::noise::NoiseGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma4Config {
    pub replicas: usize,
    pub horizon: f64,
    pub cap: f64,
    pub level: u32,
    pub z0: f64,
    /// Diffusion coefficient of the comparison process; 0 switches the noise off.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for Lemma4Config {
    fn default() -> Self {
        Lemma4Config {
            replicas: 200,
            horizon: 5.0,
            cap: 1e6,
            level: 12,
            z0: 0.0,
            noise_scale: 2.0,
            seed: 0,
        }
    }
}

/// Time at which `z' = ρ(z)`, `z(0) = z0`, passes `cap` (classical RK4 with step `dt`), if before `horizon`.
pub fn reference_cap_time(rho: &RhoFunction, z0: f64, cap: f64, horizon: f64, dt: f64) -> Option<f64> {
    let f = |z: f64| rho.eval(z.max(0.0));
    let mut z = z0;
    let mut t = 0.0;
    let steps = (horizon / dt).ceil() as usize;
    for j in 0..steps {
        let k1 = f(z);
        let k2 = f(z + 0.5 * dt * k1);
        let k3 = f(z + 0.5 * dt * k2);
        let k4 = f(z + dt * k3);
        z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = (j + 1) as f64 * dt;
        if !z.is_finite() || z > cap {
            return Some(t);
        }
    }
    debug_assert!(t <= horizon + dt);
    None
}

/// First cap-hit time of `Z_{j+1} = |Z_j + ρ(Z*_j) dt + s ΔW_j|`.
fn cap_hit(rho: &RhoFunction, cfg: &Lemma4Config, noise: Option<&NoiseGrid>) -> Option<f64> {
    let n = 1usize << cfg.level;
    let dt = cfg.horizon / n as f64;
    let mut z = cfg.z0;
    let mut sup = z;
    for j in 0..n {
        let dw = noise.map_or(0.0, |w| w.point(j + 1)[0] - w.point(j)[0]);
        z = (z + rho.eval(sup) * dt + cfg.noise_scale * dw).abs();
        sup = sup.max(z);
        if !z.is_finite() || z > cfg.cap {
            return Some((j + 1) as f64 * dt);
        }
    }
    None
}

/// Comparison dynamics driven by `ρ(Z*)`: no explosion when `∫ 1/ρ = ∞`.
pub fn test_lemma4_nonexplosion(rho: &RhoFunction, cfg: &Lemma4Config) -> Result<LemmaTestReport> {
    let rho = rho.new_checked()?;
    if cfg.replicas == 0 || !(cfg.horizon > 0.0) || !(cfg.cap > cfg.z0) || !(cfg.z0 >= 0.0) || cfg.level > 24 {
        return Err(Error::domain("need replicas > 0, horizon > 0, 0 <= z0 < cap and level <= 24"));
    }
    if !(cfg.noise_scale >= 0.0) {
        return Err(Error::domain("noise scale must be nonnegative"));
    }
    let noisy = cfg.noise_scale > 0.0;
    let hits: Vec<Option<f64>> = replicate(cfg.seed, 0, 0..cfg.replicas, |s| {
        if noisy {
            let w = NoiseGrid::generate(1, cfg.horizon, cfg.level, s)?;
            Ok(cap_hit(&rho, cfg, Some(&w)))
        } else {
            Ok(cap_hit(&rho, cfg, None))
        }
    })?;
    let n_hits = hits.iter().filter(|h| h.is_some()).count();
    let mut rep = LemmaTestReport::new("lemma4", cfg.seed, cfg.replicas);
    rep.point("cap_hit_fraction", n_hits as f64 / cfg.replicas as f64, cfg.replicas);
    if let Some(first) = hits.iter().flatten().copied().reduce(f64::min) {
        rep.point("earliest_cap_hit", first, cfg.replicas);
    }
    if rho.integral_diverges() {
        rep.check("no_cap_hits", n_hits == 0, n_hits as f64, 0.0, "cap hits == 0", cfg.replicas);
    } else if !noisy {
        let dt = cfg.horizon / (1u64 << cfg.level) as f64;
        let reference = reference_cap_time(&rho, cfg.z0, cfg.cap, cfg.horizon, dt / 64.0);
        if let Some(t) = reference {
            rep.point("reference_cap_time", t, 0);
        }
        let simulated = hits[0];
        rep.check(
            "contrast_matches_reference",
            reference.is_some() == simulated.is_some(),
            simulated.is_some() as u8 as f64,
            reference.is_some() as u8 as f64,
            "scheme hits the cap before T (1) exactly when the reference ODE does",
            1,
        );
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_is_a_ramp() {
        let rho = RhoFunction::Affine { a: 1.0, b: 0.0 };
        let cfg = Lemma4Config {
            noise_scale: 0.0,
            level: 8,
            z0: 0.5,
            replicas: 1,
            ..Default::default()
        };
        assert_eq!(cap_hit(&rho, &cfg, None), None);
        let rep = test_lemma4_nonexplosion(&rho, &cfg).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.estimate("cap_hit_fraction").unwrap().value, 0.0);
    }

    #[test]
    fn linear_growth_never_hits_cap() {
        let rho = RhoFunction::Affine { a: 2.0, b: 2.0 };
        let cfg = Lemma4Config {
            level: 10,
            seed: 7,
            ..Default::default()
        };
        let rep = test_lemma4_nonexplosion(&rho, &cfg).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn superlinear_contrast_blows_up_like_the_ode() {
        let rho = RhoFunction::Power { a: 1.0, beta: 1.5 };
        // (1+z)^{-1/2} = 2^{-1/2} - t/2 gives the exact cap time
        let exact = 2.0 * (0.5f64.sqrt() - (1.0 + 1e6f64).powf(-0.5));
        let r = reference_cap_time(&rho, 1.0, 1e6, 5.0, 1e-5).unwrap();
        assert!((r - exact).abs() < 1e-4, "{r} vs {exact}");
        let cfg = Lemma4Config {
            noise_scale: 0.0,
            z0: 1.0,
            replicas: 1,
            ..Default::default()
        };
        let rep = test_lemma4_nonexplosion(&rho, &cfg).unwrap();
        assert!(rep.passed());
        let hit = rep.estimate("earliest_cap_hit").unwrap().value;
        assert!(hit < 5.0 && hit >= r - 1e-9, "{hit}");
    }
}
