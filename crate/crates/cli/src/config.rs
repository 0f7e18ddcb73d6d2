//! Experiment configuration files (TOML, `version = 1`).

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sldp_core::ldpverify::{Event, SampleOptions};
use sldp_core::{MamOptions, ModelParams, ModelSpec, PullbackOptions};

use crate::CliError;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Overridden by `--seed`.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullback: Option<PullbackConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<SkeletonConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mam: Option<MamConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qpot: Option<QpotConfig>,
    #[serde(
        rename = "verify-ldp",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub verify_ldp: Option<VerifyLdpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: ModelParams,
}

/// Euler–Maruyama from `x0` over `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub eps: f64,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    /// The model's equilibrium when absent.
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackConfig {
    pub eps: f64,
    pub view: [f64; 2],
    pub dt: Option<f64>,
    #[serde(default)]
    pub options: PullbackOptions,
}

/// Controlled skeleton run. With `pullback = true` the run is pulled back onto `view`
/// instead of starting from `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonConfig {
    pub view: [f64; 2],
    pub dt: Option<f64>,
    pub x0: Option<Vec<f64>>,
    /// CSV written by an `action` run; zero control when absent.
    pub control: Option<String>,
    #[serde(default)]
    pub pullback: bool,
    #[serde(default)]
    pub options: PullbackOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    /// Path CSV with columns `t,x0,x1,...`.
    pub path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    Linear,
    ReversedFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MamConfig {
    pub target: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub options: MamOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpotConfig {
    pub target: Vec<f64>,
    /// `{5, 10, 20, 40}/(λC₁)` when absent.
    pub schedule: Option<Vec<f64>>,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: f64,
    #[serde(default = "default_qpot_tol")]
    pub tol: f64,
    #[serde(default)]
    pub options: MamOptions,
}

fn default_steps_per_unit() -> f64 {
    20.0
}

fn default_qpot_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyLdpConfig {
    pub eps: Vec<f64>,
    pub event: Event,
    pub samples: usize,
    /// `inf_{x ∈ event} V(x)`; the slope fit is skipped without it.
    pub reference: Option<f64>,
    #[serde(default)]
    pub sampling: SampleOptions,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn window(name: &str, w: [f64; 2]) -> Result<(), CliError> {
    if w[0].is_finite() && w[1].is_finite() && w[1] > w[0] {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{name} must be an increasing pair, got {w:?}"
        )))
    }
}

impl ExperimentConfig {
    pub fn load(path: &FsPath) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| CliError::Validation(one_line(&e.to_string())))?;
        if cfg.version != VERSION {
            return Err(CliError::Validation(format!(
                "unsupported config version {} (expected {VERSION})",
                cfg.version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build_model(&self) -> Result<ModelSpec, CliError> {
        Ok(ModelSpec::by_name(&self.model.name, &self.model.params)?)
    }

    fn validate(&self) -> Result<(), CliError> {
        let opt_dt = |dt: Option<f64>| dt.map_or(Ok(()), |d| positive("dt", d));
        if let Some(s) = &self.simulate {
            positive("simulate.eps", s.eps)?;
            window("simulate [t_start, t_end]", [s.t_start, s.t_end])?;
            opt_dt(s.dt)?;
        }
        if let Some(p) = &self.pullback {
            positive("pullback.eps", p.eps)?;
            window("pullback.view", p.view)?;
            opt_dt(p.dt)?;
            positive("pullback.options.tol", p.options.tol)?;
        }
        if let Some(s) = &self.skeleton {
            window("skeleton.view", s.view)?;
            opt_dt(s.dt)?;
        }
        if let Some(m) = &self.mam {
            positive("mam.horizon", m.horizon)?;
            if m.steps < 2 {
                return Err(CliError::Validation("mam.steps must be at least 2".into()));
            }
        }
        if let Some(q) = &self.qpot {
            positive("qpot.steps_per_unit", q.steps_per_unit)?;
            positive("qpot.tol", q.tol)?;
            if let Some(s) = &q.schedule {
                for h in s {
                    positive("qpot.schedule", *h)?;
                }
            }
        }
        if let Some(v) = &self.verify_ldp {
            if v.eps.is_empty() {
                return Err(CliError::Validation(
                    "verify-ldp.eps must not be empty".into(),
                ));
            }
            for e in &v.eps {
                positive("verify-ldp.eps", *e)?;
            }
            if v.samples == 0 {
                return Err(CliError::Validation(
                    "verify-ldp.samples must be positive".into(),
                ));
            }
            if let Some(r) = v.reference {
                positive("verify-ldp.reference", r)?;
            }
            opt_dt(v.sampling.dt)?;
        }
        Ok(())
    }
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
