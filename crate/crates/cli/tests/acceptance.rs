//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p sfde-lab --test acceptance` (add `--release` for
//! representative timings).

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfde_core::coefficients::{
    coercivity_sweep, estimate_k, CoefficientPair, Profile, RhoFunction, SegmentPairSampler, Term,
};
use sfde_core::lemmalab::{
    test_dereich_tail, test_lemma4_nonexplosion, test_lemma5_scaling, test_p_greater_one_counterexample, DereichConfig,
    GbmConfig, GronwallProcessSpec, Lemma4Config, Lemma5Config, LemmaTestReport,
};
use sfde_core::noise::{derive_seed, NoiseGrid};
use sfde_core::scheme::{self, NeverStop, SchemeConfig, StopReason};
use sfde_core::segment::Segment;
use sfde_core::solver::{
    converge_diag, solve_maximal, solve_stage, ConvergeConfig, SolveConfig, StageConfig, StageStop, Verdict,
};
use sfde_core::tolerances::BLOW_UP_REL;

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome, String>;

fn outcome(passed: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { passed, detail })
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn scalar(drift: Term, diffusion: Term) -> CoefficientPair {
    CoefficientPair::scalar(drift, diffusion, 1.0).expect("valid coefficients")
}

fn paper_class() -> CoefficientPair {
    scalar(
        Term::sum(vec![Term::terminal(Profile::NegSignSqrt), Term::linear(-1.0, 1.0)]),
        Term::Constant { value: 1.0 },
    )
}

fn lemma_summary(rep: &LemmaTestReport) -> String {
    rep.assertions
        .iter()
        .map(|a| format!("{}={:.4}{}", a.name, a.value, if a.passed { "" } else { "(FAIL)" }))
        .collect::<Vec<_>>()
        .join(" ")
}

fn c01_delay_diffusion() -> Result<Outcome, String> {
    let c = scalar(Term::Zero, Term::linear(-1.0, 1.0));
    let cfg = SchemeConfig {
        fine_per_macro: 8,
        ..SchemeConfig::new(512, 1.0)
    };
    let noise = NoiseGrid::generate(1, 1.0, 12, 12).map_err(e)?;
    let phi = Segment::constant(1.0, cfg.dt(), &[1.0]).map_err(e)?;
    let run = scheme::run(&c, &phi, &cfg, &noise.view(0.0, cfg.dt()).map_err(e)?, &mut NeverStop).map_err(e)?;
    let mut worst = 0.0f64;
    for j in 0..=noise.cells() {
        worst = worst.max((run.path.at_step(j)[0] - 1.0 - noise.point(j)[0]).abs());
    }
    outcome(worst <= 1e-12, format!("max |X - (1 + W)| = {worst:.3e} over {} points", noise.cells() + 1))
}

fn c02_euler_exactness() -> Result<Outcome, String> {
    let c = scalar(Term::linear(0.0, 1.0), Term::Zero);
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [16u32, 256] {
        let cfg = SchemeConfig {
            fine_per_macro: 1,
            ..SchemeConfig::new(n, 1.0)
        };
        let noise = NoiseGrid::for_spacing(1, cfg.dt(), 1.0, 0).map_err(e)?;
        let phi = Segment::constant(1.0, cfg.dt(), &[1.0]).map_err(e)?;
        let run = scheme::run(&c, &phi, &cfg, &noise.view(0.0, cfg.dt()).map_err(e)?, &mut NeverStop).map_err(e)?;
        let x = run.path.last()[0];
        let exact = (1.0 + 1.0 / n as f64).powi(n as i32);
        let err = (x - exact).abs();
        let to_e = (x - std::f64::consts::E).abs();
        let bound = 2.0 * std::f64::consts::E / n as f64;
        ok &= err <= 1e-12 && to_e <= bound;
        detail.push(format!("n={n}: |X-(1+1/n)^n|={err:.1e}, |X-e|={to_e:.2e}<={bound:.2e}"));
    }
    outcome(ok, detail.join("; "))
}

fn c03_blow_up() -> Result<Outcome, String> {
    let c = scalar(Term::point(0.0, Profile::Square), Term::Zero);
    let mut cfg = SolveConfig::new(2048, 8, 2.0);
    cfg.x_max = 1e8;
    let dt = cfg.dt();
    let noise = NoiseGrid::for_spacing(1, dt, 2.0, 0).map_err(e)?;
    let phi = Segment::constant(1.0, dt, &[1.0]).map_err(e)?;
    let rep = solve_maximal(&c, &phi, &cfg, &noise).map_err(e)?;

    let fine = SchemeConfig {
        n: 2048,
        fine_per_macro: 8 * 16,
        horizon: 2.0,
        x_max: 1e8,
        diagnostics: false,
    };
    let ref_noise = NoiseGrid::for_spacing(1, fine.dt(), 2.0, 0).map_err(e)?;
    let ref_phi = Segment::constant(1.0, fine.dt(), &[1.0]).map_err(e)?;
    let reference = scheme::run(&c, &ref_phi, &fine, &ref_noise.view(0.0, fine.dt()).map_err(e)?, &mut NeverStop)
        .map_err(e)?;
    if reference.stop.reason != StopReason::Cap {
        return outcome(false, "reference run never hit the cap".into());
    }
    let t_ref = reference.stop.time;
    let rel = (rep.sigma_hat - t_ref).abs() / t_ref;
    outcome(
        rep.verdict == Verdict::ExplosionSuspected && rel <= BLOW_UP_REL && dt <= 1e-4,
        format!(
            "verdict {:?}, sigma_hat = {:.5}, reference = {t_ref:.5}, rel = {rel:.4}, dt = {dt:.2e}, stages = {}",
            rep.verdict,
            rep.sigma_hat,
            rep.stages.len()
        ),
    )
}

fn c04_global_existence() -> Result<Outcome, String> {
    let c = scalar(Term::terminal(Profile::NegCube), Term::linear(0.0, 1.0));
    let mut cfg = SolveConfig::new(64, 8, 10.0);
    cfg.x_max = 1e6;
    let dt = cfg.dt();
    let phi = Segment::constant(1.0, dt, &[1.0]).map_err(e)?;
    let mut reached = 0;
    for i in 0..100u64 {
        let noise = NoiseGrid::for_spacing(1, dt, 10.0, derive_seed(4, i)).map_err(e)?;
        let rep = solve_maximal(&c, &phi, &cfg, &noise).map_err(e)?;
        reached += (rep.verdict == Verdict::HorizonReached) as usize;
    }
    let sampler = SegmentPairSampler::new(1.0, dt, 1, 1.0).map_err(e)?;
    let rho = RhoFunction::Affine { a: 0.0, b: 1.0 };
    let sweep = coercivity_sweep(&c, &sampler, &rho, 10_000, 4).map_err(e)?;
    outcome(
        reached >= 99 && sweep.violations == 0 && sweep.max_gap <= 0.0,
        format!(
            "{reached}/100 HORIZON_REACHED; coercivity max gap {:.3e}, violations {} of {}",
            sweep.max_gap, sweep.violations, sweep.samples
        ),
    )
}

fn c05_cauchy_diagnostic() -> Result<Outcome, String> {
    let cfg = ConvergeConfig::new(vec![16, 32, 64, 128, 256, 512], 1.0, 100, 2024);
    let phi = Segment::constant(1.0, cfg.dt(), &[0.5]).map_err(e)?;
    let rep = converge_diag(&paper_class(), &phi, &cfg).map_err(e)?;
    let sup: Vec<String> = rep.pairs.iter().map(|p| format!("{:.2e}", p.sup_median)).collect();
    let hol: Vec<String> = rep.pairs.iter().map(|p| format!("{:.2e}", p.holder_median)).collect();
    outcome(
        rep.sup_median_decreasing && rep.holder_median_decreasing,
        format!("sup medians [{}]; Hölder medians [{}]", sup.join(", "), hol.join(", ")),
    )
}

fn c06_localization() -> Result<Outcome, String> {
    let ramp = scalar(Term::Constant { value: 1.0 }, Term::Zero);
    let sc = SchemeConfig {
        fine_per_macro: 8,
        ..SchemeConfig::new(128, 0.0)
    };
    let dt = sc.dt();
    let noise = NoiseGrid::for_spacing(1, dt, 1.0, 0).map_err(e)?;
    let phi = Segment::constant(1.0, dt, &[0.0]).map_err(e)?;
    let stage = StageConfig {
        threshold_scale: 3.0,
        horizon: 1.0,
        alpha: 0.25,
    };
    let out = solve_stage(&ramp, &phi, &stage, &sc, &noise.view(0.0, dt).map_err(e)?).map_err(e)?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid.powf(0.75) + mid >= 1.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let ramp_ok = out.reason == StageStop::Threshold && (out.stop_time - hi).abs() <= dt;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sc = SchemeConfig {
        fine_per_macro: 4,
        ..SchemeConfig::new(32, 0.0)
    };
    let (mut thresholds, mut bad) = (0, 0);
    for i in 0..1000u64 {
        let sigma = rng.random_range(0.2..2.0);
        let c = scalar(
            Term::sum(vec![Term::terminal(Profile::NegSignSqrt), Term::linear(-1.0, 1.0)]),
            Term::Constant { value: sigma },
        );
        let big_r = rng.random_range(0.5..4.0);
        let x0 = rng.random_range(-2.0..2.0);
        let noise = NoiseGrid::for_spacing(1, sc.dt(), 1.0, derive_seed(6, i)).map_err(e)?;
        let phi = Segment::constant(1.0, sc.dt(), &[x0]).map_err(e)?;
        let stage = StageConfig {
            threshold_scale: big_r,
            horizon: 1.0,
            alpha: 0.25,
        };
        let out = solve_stage(&c, &phi, &stage, &sc, &noise.view(0.0, sc.dt()).map_err(e)?).map_err(e)?;
        if out.reason == StageStop::Threshold {
            thresholds += 1;
            if !(out.holder_at_stop.unwrap_or(0.0) >= 0.5 * big_r) {
                bad += 1;
            }
        }
    }
    outcome(
        ramp_ok && bad == 0 && thresholds > 0,
        format!(
            "ramp stop {:.6} vs oracle {hi:.6} (dt {dt:.2e}); {thresholds}/1000 THRESHOLD stops, {bad} below R/2",
            out.stop_time
        ),
    )
}

fn timed_k(c: &CoefficientPair, s: &SegmentPairSampler, seed: u64) -> Result<(f64, Duration), String> {
    let t = Instant::now();
    let k = estimate_k(c, s, 10_000, seed).map_err(e)?;
    Ok((k.estimate, t.elapsed()))
}

fn c07_probers() -> Result<Outcome, String> {
    let s = SegmentPairSampler::new(1.0, 1.0 / 64.0, 1, 0.5).map_err(e)?;
    let lag_only = scalar(
        Term::PointEval {
            component: 0,
            weights: vec![1.0, 0.5],
            lags: vec![-1.0, -0.75],
            profile: Profile::NegSignSqrt,
        },
        Term::point(-0.5, Profile::Sin),
    );
    let linear = scalar(Term::linear(0.0, 1.0), Term::Zero);
    let (k0, t0) = timed_k(&lag_only, &s, 1)?;
    let (k1, t1) = timed_k(&linear, &s, 2)?;
    let limit = Duration::from_secs(10);
    outcome(
        k0 <= 1e-12 && (1.8..=2.0).contains(&k1) && t0 < limit && t1 < limit,
        format!("lag-only K = {k0:.3e} ({t0:.2?}); linear K = {k1:.4} ({t1:.2?})"),
    )
}

fn c08_lemma5_and_gbm() -> Result<Outcome, String> {
    let spec = GronwallProcessSpec::default();
    let l5 = test_lemma5_scaling(&spec, &Lemma5Config::default()).map_err(e)?;
    let gbm = test_p_greater_one_counterexample(&GbmConfig::default()).map_err(e)?;
    outcome(
        l5.passed() && gbm.passed(),
        format!("lemma5: {}; gbm: {}", lemma_summary(&l5), lemma_summary(&gbm)),
    )
}

fn c09_lemma4() -> Result<Outcome, String> {
    let linear = test_lemma4_nonexplosion(&RhoFunction::Affine { a: 2.0, b: 2.0 }, &Lemma4Config::default()).map_err(e)?;
    let contrast_cfg = Lemma4Config {
        noise_scale: 0.0,
        z0: 1.0,
        replicas: 1,
        ..Lemma4Config::default()
    };
    let contrast = test_lemma4_nonexplosion(&RhoFunction::Power { a: 1.0, beta: 1.5 }, &contrast_cfg).map_err(e)?;
    let hit = contrast.estimate("earliest_cap_hit").map(|x| x.value);
    let reference = contrast.estimate("reference_cap_time").map(|x| x.value);
    let hits_before_t = hit.is_some_and(|t| t < 5.0) && reference.is_some_and(|t| t < 5.0);
    outcome(
        linear.passed() && contrast.passed() && hits_before_t,
        format!(
            "linear rho cap-hit fraction {}; contrast cap hit at {:?} (reference ODE {:?})",
            linear.estimate("cap_hit_fraction").map_or(f64::NAN, |x| x.value),
            hit,
            reference
        ),
    )
}

fn c10_dereich() -> Result<Outcome, String> {
    let rep = test_dereich_tail(&DereichConfig::default()).map_err(e)?;
    outcome(rep.passed(), lemma_summary(&rep))
}

fn run_cli(args: &[&str], outdir: &Path) -> Result<i32, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_sfde-lab"))
        .args(args)
        .arg("--outdir")
        .arg(outdir)
        .env_remove("SFDE_LAB_OUTDIR")
        .status()
        .map_err(e)?;
    status.code().ok_or_else(|| "terminated by signal".to_string())
}

fn read_tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(e)? {
            let p = entry.map_err(e)?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).map_err(e)?.display().to_string();
                out.push((rel, std::fs::read(&p).map_err(e)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn c11_determinism() -> Result<Outcome, String> {
    let root = env!("CARGO_MANIFEST_DIR");
    let scen = |name: &str| format!("{root}/../../scenarios/{name}.toml");
    let runs: Vec<Vec<String>> = vec![
        vec!["solve".into(), "--config".into(), scen("zero")],
        vec!["solve".into(), "--config".into(), scen("blowup")],
        vec!["converge".into(), "--config".into(), scen("linear_converge")],
        vec!["converge".into(), "--config".into(), scen("paper_class"), "--replicas".into(), "8".into()],
        vec!["probe".into(), "--config".into(), scen("probe_quadratic")],
        vec!["lemma".into(), "gronwall5".into(), "--replicas".into(), "400".into()],
        vec!["lemma".into(), "gbm".into(), "--replicas".into(), "400".into()],
        vec!["lemma".into(), "lemma4".into(), "--replicas".into(), "20".into()],
        vec!["lemma".into(), "lemma6".into(), "--replicas".into(), "400".into()],
        vec!["lemma".into(), "dereich".into(), "--replicas".into(), "400".into()],
    ];
    let tmp = tempfile::tempdir().map_err(e)?;
    let mut failures = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (a, b, c) = (tmp.path().join(format!("{i}a")), tmp.path().join(format!("{i}b")), tmp.path().join(format!("{i}c")));
        let ca = run_cli(&args, &a)?;
        let cb = run_cli(&args, &b)?;
        let mut replay: Vec<&str> = args.iter().take_while(|s| !s.starts_with("--")).copied().collect();
        let embedded = a.join("report.json").display().to_string();
        replay.extend(["--config", embedded.as_str()]);
        let cc = run_cli(&replay, &c)?;
        let (ta, tb, tc) = (read_tree(&a)?, read_tree(&b)?, read_tree(&c)?);
        if ca != cb || ca != cc || ta != tb || ta != tc || ta.is_empty() {
            failures.push(format!("{} (exit {ca}/{cb}/{cc})", args.join(" ")));
        }
    }
    let n = runs.len();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{n} commands byte-identical on rerun and on embedded-config replay")
        } else {
            format!("mismatch: {}", failures.join("; "))
        },
    )
}

fn main() {
    let criteria: [(&str, Criterion, Duration); 11] = [
        ("exact delay diffusion", c01_delay_diffusion, Duration::from_secs(1)),
        ("deterministic Euler exactness", c02_euler_exactness, Duration::from_secs(60)),
        ("blow-up recovery", c03_blow_up, Duration::from_secs(10)),
        ("global existence under coercivity", c04_global_existence, Duration::from_secs(60)),
        ("Cauchy-in-probability diagnostic", c05_cauchy_diagnostic, Duration::from_secs(300)),
        ("localization semantics", c06_localization, Duration::from_secs(60)),
        ("condition probers", c07_probers, Duration::from_secs(20)),
        ("Gronwall homogeneity and GBM counterexample", c08_lemma5_and_gbm, Duration::from_secs(120)),
        ("comparison non-explosion", c09_lemma4, Duration::from_secs(60)),
        ("Hölder tail shape", c10_dereich, Duration::from_secs(180)),
        ("determinism and round-trip", c11_determinism, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && elapsed < *limit, o.detail),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name} [{elapsed:.2?} / limit {limit:?}] {detail}",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
