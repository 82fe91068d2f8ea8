//! Scenario files: TOML with `[dimensions]`, `[initial]`, `[coefficients]`,
//! `[solver]`, `[scheme]`, `[run]`, `[probe]` and `[lemma.*]` sections.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sfde_core::coefficients::{CoefficientPair, CoefficientSpec, RhoFunction, SegmentPairSampler};
use sfde_core::lemmalab::{DereichConfig, GbmConfig, GronwallProcessSpec, Lemma4Config, Lemma5Config, Lemma6Config};
use sfde_core::segment::{read_path_csv, Segment, SegmentLike};
use sfde_core::solver::{ExplosionRule, HorizonMap};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub d: usize,
    pub m: usize,
    pub memory: f64,
}

impl Default for Dimensions {
    fn default() -> Self {
        Dimensions { d: 1, m: 1, memory: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: Vec<f64>,
    },
    /// Knots `[u, x_1, .., x_d]` with `u` ascending from `-r` to `0`.
    Table {
        knots: Vec<Vec<f64>>,
    },
    /// One draw from the prober's random piecewise-linear family.
    Sampled {
        seed: u64,
        #[serde(default = "default_bound")]
        bound: f64,
        #[serde(default = "default_knots")]
        knots: usize,
    },
    /// A path CSV (`t,x_1,..`) whose last `r` time units form the segment.
    Csv {
        path: PathBuf,
    },
}

fn default_bound() -> f64 {
    2.0
}

fn default_knots() -> usize {
    8
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Constant { value: vec![1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub r0: f64,
    pub horizon: f64,
    pub max_stages: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub horizon_map: HorizonMap,
    pub explosion: ExplosionRule,
    /// Threshold `R` for `converge` runs; absent means no localization.
    pub converge_threshold: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            r0: 1.0,
            horizon: 1.0,
            max_stages: 64,
            x_max: sfde_core::scheme::DEFAULT_X_MAX,
            alpha: sfde_core::solver::DEFAULT_ALPHA,
            horizon_map: HorizonMap::default(),
            explosion: ExplosionRule::default(),
            converge_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub n: u32,
    pub fine_per_macro: u32,
    pub n_list: Vec<u32>,
    /// Fine substeps per macro step at the largest `n` of `n_list`.
    pub fine_top: u32,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection {
            n: 64,
            fine_per_macro: sfde_core::scheme::DEFAULT_FINE_PER_MACRO,
            n_list: vec![16, 32, 64, 128, 256],
            fine_top: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_true")]
    pub write_paths: bool,
    #[serde(default)]
    pub write_noise: bool,
    #[serde(default, skip_serializing)]
    pub outdir: Option<PathBuf>,
}

fn default_replicas() -> usize {
    100
}

fn default_true() -> bool {
    true
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: None,
            replicas: default_replicas(),
            write_paths: true,
            write_noise: false,
            outdir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// Pairs agree on `[-r, -r_c]`; defaults to the memory length.
    pub r_c: Option<f64>,
    pub samples: usize,
    pub bound: f64,
    pub knots: usize,
    pub bump_knots: usize,
    pub rho: Option<RhoFunction>,
    /// Fail (exit 11) when the K estimate exceeds this.
    pub k_max: Option<f64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            r_c: None,
            samples: 10_000,
            bound: 2.0,
            knots: 8,
            bump_knots: 4,
            rho: None,
            k_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gronwall5Section {
    #[serde(default)]
    pub process: GronwallProcessSpec,
    #[serde(default)]
    pub test: Lemma5Config,
}

impl Default for Gronwall5Section {
    fn default() -> Self {
        Gronwall5Section {
            process: GronwallProcessSpec::default(),
            test: Lemma5Config::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma6Section {
    #[serde(default = "lemma6_process")]
    pub process: GronwallProcessSpec,
    #[serde(default)]
    pub test: Lemma6Config,
}

pub fn lemma6_process() -> GronwallProcessSpec {
    GronwallProcessSpec {
        c: 0.0,
        p: 0.25,
        alpha: Some(3.0),
        h_process: sfde_core::lemmalab::HProcess::SupIndependent { h: 1.0 },
        ..GronwallProcessSpec::default()
    }
}

impl Default for Lemma6Section {
    fn default() -> Self {
        Lemma6Section {
            process: lemma6_process(),
            test: Lemma6Config::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma4Section {
    #[serde(default = "lemma4_rho")]
    pub rho: RhoFunction,
    #[serde(default)]
    pub test: Lemma4Config,
}

fn lemma4_rho() -> RhoFunction {
    RhoFunction::Affine { a: 2.0, b: 2.0 }
}

impl Default for Lemma4Section {
    fn default() -> Self {
        Lemma4Section {
            rho: lemma4_rho(),
            test: Lemma4Config::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gronwall5: Option<Gronwall5Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gbm: Option<GbmConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma4: Option<Lemma4Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma6: Option<Lemma6Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dereich: Option<DereichConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub dimensions: Dimensions,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientSpec>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaSection>,
}

/// A written report; `--config` accepts one and re-runs its embedded config.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<R> {
    pub schema_version: u32,
    pub command: String,
    pub config: ScenarioConfig,
    pub report: R,
}

/// Loads a scenario TOML file or the config embedded in a `report.json`.
pub fn load(path: &Path) -> Result<(ScenarioConfig, Option<String>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let env: Envelope<serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if env.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{}: unsupported schema_version {}",
                path.display(),
                env.schema_version
            )));
        }
        return Ok((env.config, Some(env.command)));
    }
    let cfg = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, None))
}

impl ScenarioConfig {
    pub fn seed(&self) -> Result<u64, CliError> {
        self.run
            .seed
            .ok_or_else(|| CliError::Config("[run] seed is required (or pass --seed)".into()))
    }

    pub fn coefficient_pair(&self) -> Result<CoefficientPair, CliError> {
        let spec = self
            .coefficients
            .clone()
            .ok_or_else(|| CliError::Config("missing [coefficients] section".into()))?;
        let pair = CoefficientPair::new(spec, self.dimensions.memory).map_err(|e| CliError::Config(e.to_string()))?;
        if pair.d() != self.dimensions.d || pair.m() != self.dimensions.m {
            return Err(CliError::Config(format!(
                "coefficients are {}x{}, [dimensions] says d = {}, m = {}",
                pair.d(),
                pair.m(),
                self.dimensions.d,
                self.dimensions.m
            )));
        }
        Ok(pair)
    }

    pub fn initial_segment(&self, dt: f64) -> Result<Segment, CliError> {
        let Dimensions { d, memory: r, .. } = self.dimensions;
        let bad = |e: sfde_core::Error| CliError::Config(format!("[initial]: {e}"));
        let seg = match &self.initial {
            InitialSpec::Constant { value } => Segment::constant(r, dt, value).map_err(bad)?,
            InitialSpec::Table { knots } => {
                let knots: Vec<(f64, Vec<f64>)> = knots
                    .iter()
                    .map(|k| match k.split_first() {
                        Some((u, x)) => Ok((*u, x.to_vec())),
                        None => Err(CliError::Config("[initial] empty knot".into())),
                    })
                    .collect::<Result<_, _>>()?;
                Segment::piecewise_linear(r, dt, &knots).map_err(bad)?
            }
            InitialSpec::Sampled { seed, bound, knots } => {
                let mut sampler = SegmentPairSampler::new(r, dt, d, r).map_err(bad)?;
                sampler.bound = *bound;
                sampler.knots = *knots;
                sampler.sample_segment(&mut ChaCha8Rng::seed_from_u64(*seed))
            }
            InitialSpec::Csv { path } => {
                let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let buf = read_path_csv(std::io::BufReader::new(file)).map_err(bad)?;
                let seg = buf.segment_at_step(buf.steps()).map_err(bad)?;
                if (seg.dt() - dt).abs() > 1e-12 * dt || (seg.memory() - r).abs() > 1e-9 * r {
                    return Err(CliError::Config(format!(
                        "[initial] csv has dt = {}, r = {}; scenario needs dt = {dt}, r = {r}",
                        seg.dt(),
                        seg.memory()
                    )));
                }
                seg
            }
        };
        if seg.dim() != d {
            return Err(CliError::Config(format!("[initial] has dimension {}, expected {d}", seg.dim())));
        }
        Ok(seg)
    }
}
