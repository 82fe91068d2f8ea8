use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use sfde_core::coefficients::{coercivity_sweep, estimate_k, CoercivityReport, KEstimate, SegmentPairSampler};
use sfde_core::lemmalab::{self, LemmaTestReport, Martingale, TailPoint};
use sfde_core::noise::NoiseGrid;
use sfde_core::segment::write_path_rows;
use sfde_core::solver::{converge_diag, solve_maximal, ConvergeConfig, SolveConfig, Verdict};

use crate::config::{self, Envelope, LemmaSection, ScenarioConfig, SCHEMA_VERSION};
use crate::{exit, CliError, Common, LemmaArgs, LemmaName};

/// Seed for lemma runs without a config or `--seed`.
pub const DEFAULT_LEMMA_SEED: u64 = 20_240_229;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| io_err(path, e))
}

fn write_report<R: Serialize>(outdir: &Path, command: &str, config: ScenarioConfig, report: R) -> Result<(), CliError> {
    let path = outdir.join("report.json");
    let mut w = create(&path)?;
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        config,
        report,
    };
    serde_json::to_writer_pretty(&mut w, &env).map_err(|e| io_err(&path, e))?;
    writeln!(w).map_err(|e| io_err(&path, e))?;
    finish(w, &path)
}

/// Loads `--config` (required unless `fallback` is given) and applies the shared flag overrides.
fn resolve(common: &Common, command: &str, fallback: Option<ScenarioConfig>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match (&common.config, fallback) {
        (Some(path), _) => {
            let (cfg, embedded) = config::load(path)?;
            if let Some(c) = embedded {
                if c != command {
                    return Err(CliError::Config(format!(
                        "{} holds a `{c}` report, not `{command}`",
                        path.display()
                    )));
                }
            }
            cfg
        }
        (None, Some(cfg)) => cfg,
        (None, None) => return Err(CliError::Config("--config is required for this command".into())),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(n) = common.replicas {
        cfg.run.replicas = n;
    }
    cfg.run.outdir = None;
    Ok(cfg)
}

fn scheme_dt(cfg: &ScenarioConfig) -> Result<f64, CliError> {
    let s = &cfg.scheme;
    if s.n == 0 || s.fine_per_macro == 0 {
        return Err(CliError::Config("[scheme] n and fine_per_macro must be positive".into()));
    }
    Ok(1.0 / (s.n as f64 * s.fine_per_macro as f64))
}

pub fn solve(common: &Common) -> Result<u8, CliError> {
    let mut cfg = resolve(common, "solve", None)?;
    cfg.probe = None;
    cfg.lemma = None;
    let seed = cfg.seed()?;
    let pair = cfg.coefficient_pair()?;
    let dt = scheme_dt(&cfg)?;
    let phi = cfg.initial_segment(dt)?;
    let s = &cfg.solver;
    let solve_cfg = SolveConfig {
        r0: s.r0,
        horizon_map: s.horizon_map.clone(),
        max_stages: s.max_stages,
        x_max: s.x_max,
        horizon: s.horizon,
        n: cfg.scheme.n,
        fine_per_macro: cfg.scheme.fine_per_macro,
        alpha: s.alpha,
        explosion: s.explosion,
    };
    let noise = NoiseGrid::for_spacing(pair.m(), dt, s.horizon, seed)?;
    let report = solve_maximal(&pair, &phi, &solve_cfg, &noise)?;

    let outdir = &common.outdir;
    if cfg.run.write_paths {
        let path = report.path.as_ref().expect("solve_maximal keeps the path");
        for (k, _) in report.stages.iter().enumerate() {
            let (from, to) = report.stage_rows(k).expect("stage exists");
            let file = outdir.join("paths").join(format!("stage_{k}.csv"));
            let mut w = create(&file)?;
            write_path_rows(path, "x", from, to, &mut w)?;
            finish(w, &file)?;
        }
    }
    if cfg.run.write_noise {
        let file = outdir.join("noise.csv");
        let mut w = create(&file)?;
        noise.write_csv(&mut w)?;
        finish(w, &file)?;
    }
    let code = match report.verdict {
        Verdict::HorizonReached => exit::OK,
        Verdict::ExplosionSuspected => exit::EXPLOSION,
        Verdict::StagesExhausted => exit::STAGES_EXHAUSTED,
        Verdict::Diverged => exit::DIVERGED,
    };
    write_report(outdir, "solve", cfg, &report)?;
    Ok(code)
}

pub fn converge(common: &Common) -> Result<u8, CliError> {
    let mut cfg = resolve(common, "converge", None)?;
    cfg.probe = None;
    cfg.lemma = None;
    let seed = cfg.seed()?;
    let pair = cfg.coefficient_pair()?;
    let s = &cfg.solver;
    let cc = ConvergeConfig {
        n_list: cfg.scheme.n_list.clone(),
        fine_top: cfg.scheme.fine_top,
        horizon: s.horizon,
        replicas: cfg.run.replicas,
        seed,
        threshold_scale: s.converge_threshold.unwrap_or(f64::INFINITY),
        alpha: s.alpha,
        x_max: s.x_max,
    };
    if cc.n_list.is_empty() || cc.fine_top == 0 {
        return Err(CliError::Config("[scheme] n_list must be non-empty and fine_top positive".into()));
    }
    let phi = cfg.initial_segment(cc.dt())?;
    let report = converge_diag(&pair, &phi, &cc)?;
    let ok = report.sup_median_decreasing && report.holder_median_decreasing;
    write_report(&common.outdir, "converge", cfg, &report)?;
    Ok(if common.assert && !ok { exit::ASSERTION_FAILED } else { exit::OK })
}

#[derive(Debug, Serialize)]
struct ProbeReport {
    dt: f64,
    sampler: SegmentPairSampler,
    k: KEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_max_exceeded: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coercivity: Option<CoercivityReport>,
}

pub fn probe(common: &Common) -> Result<u8, CliError> {
    let mut cfg = resolve(common, "probe", None)?;
    cfg.lemma = None;
    let probe = cfg.probe.get_or_insert_with(Default::default).clone();
    let seed = cfg.seed()?;
    let pair = cfg.coefficient_pair()?;
    let dt = scheme_dt(&cfg)?;
    let r = cfg.dimensions.memory;
    let mut sampler = SegmentPairSampler::new(r, dt, pair.d(), probe.r_c.unwrap_or(r))?;
    sampler.bound = probe.bound;
    sampler.knots = probe.knots;
    sampler.bump_knots = probe.bump_knots;
    let k = estimate_k(&pair, &sampler, probe.samples, seed)?;
    let k_max_exceeded = probe.k_max.map(|m| k.estimate > m);
    let coercivity = match &probe.rho {
        Some(rho) => Some(coercivity_sweep(&pair, &sampler, &rho.new_checked()?, probe.samples, seed)?),
        None => None,
    };
    let violated = k_max_exceeded == Some(true) || coercivity.as_ref().is_some_and(|c| c.violations > 0);
    let report = ProbeReport {
        dt,
        sampler,
        k,
        k_max_exceeded,
        coercivity,
    };
    write_report(&common.outdir, "probe", cfg, &report)?;
    Ok(if violated { exit::PROBE_VIOLATION } else { exit::OK })
}

fn inapplicable(name: LemmaName, flag: &str) -> CliError {
    CliError::Config(format!("--{flag} does not apply to `lemma {}`", name.as_str()))
}

fn with_v(m: Martingale, v: f64) -> Martingale {
    match m {
        Martingale::SinIntegrand { .. } => Martingale::SinIntegrand { v },
        _ => Martingale::Brownian { v },
    }
}

pub fn lemma(args: &LemmaArgs, common: &Common) -> Result<u8, CliError> {
    let fallback = ScenarioConfig {
        run: config::RunSection {
            seed: Some(DEFAULT_LEMMA_SEED),
            ..Default::default()
        },
        ..Default::default()
    };
    let command = format!("lemma {}", args.name.as_str());
    let replicas_flag = common.replicas;
    let mut cfg = resolve(common, &command, Some(fallback))?;
    let seed = cfg.run.seed.unwrap_or(DEFAULT_LEMMA_SEED);
    cfg.run.seed = Some(seed);
    let given = cfg.lemma.take().unwrap_or_default();
    let name = args.name;
    let mut section = LemmaSection::default();
    let report: LemmaTestReport = match name {
        LemmaName::Gronwall5 => {
            let mut s = given.gronwall5.unwrap_or_default();
            s.test.seed = seed;
            if let Some(n) = replicas_flag {
                s.test.replicas = n;
            }
            if let Some(xi) = args.xi {
                s.test.xi = xi;
            }
            if let Some(p) = args.p {
                s.process.p = p;
            }
            if let Some(v) = args.v {
                s.process.martingale = with_v(s.process.martingale, v);
            }
            let r = lemmalab::test_lemma5_scaling(&s.process, &s.test)?;
            section.gronwall5 = Some(s);
            r
        }
        LemmaName::Lemma6 => {
            let mut s = given.lemma6.unwrap_or_default();
            s.test.seed = seed;
            if let Some(n) = replicas_flag {
                s.test.replicas = n;
            }
            if let Some(xi) = args.xi {
                s.test.xi = xi;
            }
            if let Some(p) = args.p {
                s.process.p = p;
            }
            if let Some(v) = args.v {
                s.process.martingale = with_v(s.process.martingale, v);
            }
            let r = lemmalab::test_lemma6_homogeneity(&s.process, &s.test)?;
            section.lemma6 = Some(s);
            r
        }
        LemmaName::Gbm => {
            if args.xi.is_some() {
                return Err(inapplicable(name, "xi"));
            }
            if args.v.is_some() {
                return Err(inapplicable(name, "v"));
            }
            let mut g = given.gbm.unwrap_or_default();
            g.seed = seed;
            if let Some(n) = replicas_flag {
                g.replicas = n;
            }
            if let Some(p) = args.p {
                g.p = p;
            }
            let r = lemmalab::test_p_greater_one_counterexample(&g)?;
            section.gbm = Some(g);
            r
        }
        LemmaName::Lemma4 => {
            for (flag, set) in [("xi", args.xi.is_some()), ("p", args.p.is_some()), ("v", args.v.is_some())] {
                if set {
                    return Err(inapplicable(name, flag));
                }
            }
            let mut s = given.lemma4.unwrap_or_default();
            s.test.seed = seed;
            if let Some(n) = replicas_flag {
                s.test.replicas = n;
            }
            let r = lemmalab::test_lemma4_nonexplosion(&s.rho, &s.test)?;
            section.lemma4 = Some(s);
            r
        }
        LemmaName::Dereich => {
            if args.xi.is_some() {
                return Err(inapplicable(name, "xi"));
            }
            if args.p.is_some() {
                return Err(inapplicable(name, "p"));
            }
            let mut d = given.dereich.unwrap_or_default();
            d.seed = seed;
            if let Some(n) = replicas_flag {
                d.replicas = n;
            }
            if let Some(v) = args.v {
                d.v = v;
            }
            let r = lemmalab::test_dereich_tail(&d)?;
            section.dereich = Some(d);
            r
        }
    };
    cfg.lemma = Some(section);
    if let Some(tail) = &report.tail {
        let file = common.outdir.join("tail.csv");
        let mut w = create(&file)?;
        TailPoint::write_csv(tail, &mut w)?;
        finish(w, &file)?;
    }
    let code = if report.passed() { exit::OK } else { exit::ASSERTION_FAILED };
    write_report(&common.outdir, &command, cfg, &report)?;
    Ok(code)
}
