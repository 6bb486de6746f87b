//! Versioned experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use steepfield::fractal::SetKind;
use steepfield::sampler::{ScaleSchedule, ScheduleSpec};
use steepfield::steep::{Criterion, CriterionKind};
use steepfield::testfn::builtins::{constant, g_eps, g_oscil, g_thick, inverse_sqrt_g, oscillating_constant};
use steepfield::testfn::{check_sequence, RadiusSequence, SequenceKind, TestFunction};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    #[default]
    Hierarchical,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceSpec {
    Neglog(Vec<f64>),
    Radii(Vec<f64>),
    FactorialSquared { len: usize, deepest: f64 },
}

impl SequenceSpec {
    fn build(&self) -> Result<RadiusSequence> {
        Ok(match self {
            SequenceSpec::Neglog(v) => RadiusSequence::from_neglog(v.clone())?,
            SequenceSpec::Radii(v) => RadiusSequence::from_radii(v)?,
            SequenceSpec::FactorialSquared { len, deepest } => RadiusSequence::factorial_squared(*len, *deepest)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case")]
pub enum BuiltinSpec {
    Constant { gamma: f64 },
    InverseSqrtG { c: f64 },
    OscillatingConstant { gamma: f64, sequence: SequenceSpec },
    GThick { gamma: f64, sequence: SequenceSpec },
    GOscil { gamma: f64, sequence: SequenceSpec },
    GEps { gamma_prime: f64, eps: f64, sequence: SequenceSpec },
}

/// A builtin by name and parameters, or a full test function description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Builtin(BuiltinSpec),
    Custom { custom: TestFunction },
}

impl FunctionSpec {
    pub fn build(&self, nu: u32) -> Result<TestFunction> {
        let f = match self {
            FunctionSpec::Builtin(b) => match b {
                BuiltinSpec::Constant { gamma } => constant(*gamma)?,
                BuiltinSpec::InverseSqrtG { c } => inverse_sqrt_g(nu, *c)?,
                BuiltinSpec::OscillatingConstant { gamma, sequence } => oscillating_constant(*gamma, &sequence.build()?)?,
                BuiltinSpec::GThick { gamma, sequence } => g_thick(nu, *gamma, &sequence.build()?)?,
                BuiltinSpec::GOscil { gamma, sequence } => g_oscil(nu, *gamma, &sequence.build()?)?,
                BuiltinSpec::GEps { gamma_prime, eps, sequence } => g_eps(nu, *gamma_prime, *eps, &sequence.build()?)?,
            },
            FunctionSpec::Custom { custom } => custom.clone(),
        };
        if f.nu() != nu {
            bail!("test function is defined for nu = {} but the config has nu = {nu}", f.nu());
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub nu: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub backend: BackendChoice,
    /// Truncates the schedule to this many levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<CriterionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            nu: 2,
            function: None,
            schedule: ScheduleSpec::Geometric { base: 2.0, depth: 6 },
            backend: BackendChoice::Hierarchical,
            depth: None,
            replicas: None,
            band: None,
            criterion: None,
            window: None,
            seed: 0,
            output: None,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str::<ExperimentConfig>(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if cfg.version != CONFIG_VERSION {
            bail!("config version {} is not supported; expected {CONFIG_VERSION}", cfg.version);
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if overrides.replicas.is_some() {
            cfg.replicas = overrides.replicas;
        }
        if let Some(o) = &overrides.out {
            cfg.output = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        steepfield::specfun::check_nu(self.nu)?;
        if self.replicas == Some(0) {
            bail!("replicas must be at least 1");
        }
        self.schedule()?;
        if let Some(a) = self.band {
            if !(a > 0.0 && a < 1.0) {
                bail!("band a = {a} outside (0, 1)");
            }
        }
        if let Some(f) = &self.function {
            f.build(self.nu)?;
        }
        if let Some(c) = self.criterion()? {
            c.validate(self.nu)?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<ScaleSchedule> {
        let s = ScaleSchedule::try_from(self.schedule.clone())?;
        Ok(match self.depth {
            Some(d) => s.truncated(d)?,
            None => s,
        })
    }

    pub fn function(&self) -> Result<TestFunction> {
        match &self.function {
            Some(f) => f.build(self.nu),
            None => bail!("the config has no test function"),
        }
    }

    pub fn criterion(&self) -> Result<Option<Criterion>> {
        let Some(kind) = &self.criterion else { return Ok(None) };
        let Some(band) = self.band else { bail!("a criterion needs a band") };
        let mut c = Criterion::new(kind.clone(), band);
        c.window = self.window;
        Ok(Some(c))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Exceptional set the criterion approximates, for the dimension prediction.
    pub fn set_kind(&self) -> Result<Option<SetKind>> {
        let Some(kind) = &self.criterion else { return Ok(None) };
        Ok(Some(match kind {
            CriterionKind::Steep => SetKind::Steep,
            CriterionKind::SubSteep => SetKind::SubSteep,
            CriterionKind::SuperSteep => SetKind::SuperSteep,
            CriterionKind::Sequential { radii } => {
                let f = self.function()?;
                let report = check_sequence(SequenceKind::Ratio, radii, Some(&f))?;
                SetKind::Sequential { ratio_condition: report.holds() }
            }
            CriterionKind::Thick2d { gamma }
            | CriterionKind::ThickPoly { gamma }
            | CriterionKind::SeqThick { gamma, .. } => SetKind::Thick { gamma: *gamma },
            CriterionKind::Oscillatory { gamma1, gamma2 } => SetKind::Oscillatory { gamma1: *gamma1, gamma2: *gamma2 },
            CriterionKind::Lasting { gamma, .. } => SetKind::Lasting { gamma: *gamma },
        }))
    }

    /// SHA-256 of the resolved config as JSON, output location excluded.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(&ExperimentConfig { output: None, ..self.clone() })?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}
