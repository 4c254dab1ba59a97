//! JSON run configuration. Unknown keys are rejected everywhere.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ijt_core::baselines::BaselineConfig;
use ijt_core::experiments::Algo;
use ijt_core::io;
use ijt_core::probgen::{gen_instance, InstanceSpec};
use ijt_core::{Init, LossKind, PenaltySpec, Problem, SolverConfig, StepSize};
use serde::{Deserialize, Deserializer};
use serde_json::Value;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: Option<InstanceSource>,
    #[serde(default = "default_penalty")]
    pub penalty: PenaltySpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default = "default_algo")]
    pub algo: Algo,
    pub output: Option<PathBuf>,
    pub emit: Option<BTreeSet<Emit>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            instance: None,
            penalty: default_penalty(),
            solver: SolverSection::default(),
            baseline: BaselineConfig::default(),
            algo: default_algo(),
            output: None,
            emit: None,
        }
    }
}

fn default_penalty() -> PenaltySpec {
    PenaltySpec::power(0.5).expect("q = 1/2 is valid")
}

fn default_algo() -> Algo {
    Algo::Ijt
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Svg,
}

/// Either an inline generator spec or a set of instance files.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Generated(InstanceSpec),
    Files(InstanceFiles),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFiles {
    #[serde(rename = "A")]
    pub a: PathBuf,
    pub y: PathBuf,
    pub x_true: Option<PathBuf>,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
}

fn default_loss() -> LossKind {
    LossKind::LeastSquares
}

impl<'de> Deserialize<'de> for InstanceSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let v = Value::deserialize(d)?;
        let obj = v
            .as_object()
            .ok_or_else(|| D::Error::custom("instance must be an object"))?;
        let has_files = obj.contains_key("A") || obj.contains_key("y");
        let has_spec = ["N", "M", "k"].iter().any(|k| obj.contains_key(*k));
        match (has_files, has_spec) {
            (true, false) => serde_json::from_value(v)
                .map(InstanceSource::Files)
                .map_err(D::Error::custom),
            (false, true) => serde_json::from_value(v)
                .map(InstanceSource::Generated)
                .map_err(D::Error::custom),
            (true, true) => Err(D::Error::custom(
                "instance: give either generator fields (N, M, k, ...) or files (A, y), not both",
            )),
            (false, false) => Err(D::Error::custom(
                "instance: expected generator fields (N, M, k, ...) or files (A, y)",
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lambda: f64,
    pub mu: Option<f64>,
    pub mu_frac: Option<f64>,
    pub init: InitSpec,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            lambda: 0.001,
            mu: None,
            mu_frac: None,
            init: InitSpec::Zero,
            tol: 1e-10,
            max_iters: 100_000,
        }
    }
}

/// `"zero"`, `"l1"` or `{"file": "<vector file>"}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitSpec {
    #[default]
    Zero,
    L1,
    File(PathBuf),
}

impl<'de> Deserialize<'de> for InitSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct FileInit {
            file: PathBuf,
        }
        match Value::deserialize(d)? {
            Value::String(s) => InitSpec::parse(&s).map_err(D::Error::custom),
            v @ Value::Object(_) => serde_json::from_value::<FileInit>(v)
                .map(|f| InitSpec::File(f.file))
                .map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("invalid init {other}"))),
        }
    }
}

impl InitSpec {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(InitSpec::Zero),
            "l1" => Ok(InitSpec::L1),
            other => match other.strip_prefix("file:") {
                Some(path) => Ok(InitSpec::File(path.into())),
                None => Err(format!(
                    "unknown init `{other}` (expected zero, l1 or file:<path>)"
                )),
            },
        }
    }

    pub fn resolve(&self) -> Result<Init> {
        Ok(match self {
            InitSpec::Zero => Init::Zero,
            InitSpec::L1 => Init::L1Solution,
            InitSpec::File(p) => Init::Vector(io::read_vector(p)?),
        })
    }
}

impl SolverSection {
    pub fn step(&self) -> Result<StepSize> {
        match (self.mu, self.mu_frac) {
            (Some(_), Some(_)) => bail!("solver: give mu or mu_frac, not both"),
            (Some(mu), None) => Ok(StepSize::Absolute(mu)),
            (None, Some(f)) => Ok(StepSize::FractionOfInverseLipschitz(f)),
            (None, None) => Ok(StepSize::FractionOfInverseLipschitz(0.99)),
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig::new(self.lambda, self.step()?)
            .with_init(self.init.resolve()?)
            .with_tol(self.tol)
            .with_max_iters(self.max_iters))
    }
}

/// A loaded problem and, when known, its ground truth.
pub struct LoadedInstance {
    pub problem: Problem,
    pub x_true: Option<Vec<f64>>,
}

impl InstanceSource {
    pub fn load(&self) -> Result<LoadedInstance> {
        match self {
            InstanceSource::Generated(spec) => {
                let inst = gen_instance(spec)?;
                Ok(LoadedInstance {
                    problem: Problem::least_squares(inst.a, inst.y)?,
                    x_true: Some(inst.x_true),
                })
            }
            InstanceSource::Files(f) => {
                let a = io::read_matrix(&f.a)?;
                let y = io::read_vector(&f.y)?;
                let x_true = f.x_true.as_deref().map(io::read_vector).transpose()?;
                if let Some(x) = &x_true {
                    if x.len() != a.cols() {
                        bail!("x_true has {} entries, A has {} columns", x.len(), a.cols());
                    }
                }
                Ok(LoadedInstance {
                    problem: Problem::new(f.loss, a, y)?,
                    x_true,
                })
            }
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.baseline.validate()?;
        Ok(cfg)
    }
}
