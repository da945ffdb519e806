//! Experiment configuration.
//!
//! The native format is flat `key = value` lines with dotted section
//! prefixes, which is a subset of TOML:
//!
//! ```text
//! problem.kind = "linreg_ar"
//! problem.d = 10
//! schedule.eta_scale = 0.31622776601683794
//! schedule.alpha = 0.505
//! run.steps = 10000
//! run.warmup = 500
//! run.reps = 200
//! inference.m = [2, "inf"]
//! ```
//!
//! The same schema is accepted as JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Functional, IntegralRule};
use crate::sa::StepSchedule;

/// Functionals with a published critical value.
pub const SUPPORTED_FUNCTIONALS: [Functional; 6] = crate::critical_values::TABLE_FUNCTIONALS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LinregAr,
    LogisticAr,
    Qlearning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Parameter dimension for the regression problems.
    #[serde(default = "defaults::dim")]
    pub d: usize,
    /// AR(1) coefficient of the linear-regression noise.
    #[serde(default = "defaults::rho_eps")]
    pub rho_eps: f64,
    #[serde(default = "defaults::states")]
    pub states: usize,
    #[serde(default = "defaults::actions")]
    pub actions: usize,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Total SA steps, warm-up included.
    pub steps: usize,
    /// Leading steps excluded from averaging and inference.
    #[serde(default)]
    pub warmup: usize,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Total step counts at which intervals are evaluated. Defaults to
    /// `[steps]`.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RandomScaling,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    #[serde(default = "defaults::method")]
    pub method: Method,
    #[serde(default = "defaults::m")]
    pub m: Vec<Functional>,
    /// Two-sided tail probability; intervals have nominal coverage `1 − α`.
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    /// Integral rules for the random-scaling denominator. Each rule is
    /// reported as its own method.
    #[serde(default = "defaults::rules")]
    pub rules: Vec<IntegralRule>,
    #[serde(default = "defaults::chains")]
    pub bootstrap_chains: usize,
    /// Critical values CSV written by `critvals`; the built-in table if absent.
    #[serde(default)]
    pub critical_values: Option<PathBuf>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            method: defaults::method(),
            m: defaults::m(),
            alpha: defaults::alpha(),
            rules: defaults::rules(),
            bootstrap_chains: defaults::chains(),
            critical_values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub schedule: StepSchedule,
    pub run: RunConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

mod defaults {
    use super::*;

    pub fn dim() -> usize {
        10
    }
    pub fn rho_eps() -> f64 {
        0.9
    }
    pub fn states() -> usize {
        5
    }
    pub fn actions() -> usize {
        5
    }
    pub fn gamma() -> f64 {
        0.6
    }
    pub fn method() -> Method {
        Method::RandomScaling
    }
    pub fn m() -> Vec<Functional> {
        vec![Functional::Power(2)]
    }
    pub fn alpha() -> f64 {
        0.05
    }
    pub fn rules() -> Vec<IntegralRule> {
        vec![IntegralRule::Rectangle]
    }
    pub fn chains() -> usize {
        200
    }
}

fn bad(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {reason}"))
}

impl ExperimentConfig {
    /// Parses JSON when the text starts with `{`, the key-value format
    /// otherwise. The result is validated.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Evaluation points, sorted and deduplicated.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c = if self.run.checkpoints.is_empty() {
            vec![self.run.steps]
        } else {
            self.run.checkpoints.clone()
        };
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Checks every constraint, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        match p.kind {
            ProblemKind::LinregAr | ProblemKind::LogisticAr => {
                if p.d == 0 {
                    return Err(bad("problem.d", "must be at least 1"));
                }
                if !(p.rho_eps.abs() < 1.0) {
                    return Err(bad("problem.rho_eps", format!("{} not in (-1, 1)", p.rho_eps)));
                }
            }
            ProblemKind::Qlearning => {
                if p.states == 0 {
                    return Err(bad("problem.states", "must be at least 1"));
                }
                if p.actions < 2 {
                    return Err(bad("problem.actions", "need at least 2 actions for a unique optimal policy"));
                }
                if !(0.0..1.0).contains(&p.gamma) {
                    return Err(bad("problem.gamma", format!("{} not in [0, 1)", p.gamma)));
                }
            }
        }
        self.schedule
            .validate()
            .map_err(|e| bad("schedule", e))?;
        let r = &self.run;
        if r.reps == 0 {
            return Err(bad("run.reps", "must be at least 1"));
        }
        if r.warmup >= r.steps {
            return Err(bad(
                "run.warmup",
                format!("{} must be below run.steps = {}", r.warmup, r.steps),
            ));
        }
        for &c in &r.checkpoints {
            if c <= r.warmup || c > r.steps {
                return Err(bad(
                    "run.checkpoints",
                    format!("{c} not in ({}, {}]", r.warmup, r.steps),
                ));
            }
        }
        let inf = &self.inference;
        if !(inf.alpha > 0.0 && inf.alpha < 1.0) {
            return Err(bad("inference.alpha", format!("{} not in (0, 1)", inf.alpha)));
        }
        match inf.method {
            Method::RandomScaling => {
                if inf.m.is_empty() {
                    return Err(bad("inference.m", "empty"));
                }
                if let Some(f) = inf.m.iter().find(|f| !SUPPORTED_FUNCTIONALS.contains(f)) {
                    return Err(bad("inference.m", format!("{f} not in {{1, 2, 3, 4, 6, inf}}")));
                }
                if inf.rules.is_empty() {
                    return Err(bad("inference.rules", "empty"));
                }
            }
            Method::Bootstrap => {
                if inf.bootstrap_chains < crate::bootstrap::MIN_CHAINS {
                    return Err(bad(
                        "inference.bootstrap_chains",
                        format!("{} below the minimum {}", inf.bootstrap_chains, crate::bootstrap::MIN_CHAINS),
                    ));
                }
            }
        }
        Ok(())
    }
}
