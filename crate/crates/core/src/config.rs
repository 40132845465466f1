//! Run configuration.
//!
//! A configuration is a sectioned key-value file (TOML syntax):
//!
//! ```toml
//! [kernel]
//! theta.form = "power"
//! theta.a = 1.0
//! theta.p = 1.0
//! kappa.form = "zero"
//!
//! [init]
//! family = "monodisperse"
//! a = 1.0
//!
//! [run]
//! n = 64
//! T = 1.0
//! ```
//!
//! Every section and key is optional except where noted in the README; unknown
//! keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convergence::{SweepConfig, Thresholds};
use crate::diagnostics::BoundId;
use crate::integrator::{IntegratorConfig, Method};
use crate::kernel::{DeclaredClass, KappaModel, KernelSpec, ThetaSequence};
use crate::system::InitialData;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThetaForm {
    #[default]
    Power,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaSection {
    pub form: ThetaForm,
    pub a: f64,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for ThetaSection {
    fn default() -> Self {
        ThetaSection { form: ThetaForm::Power, a: 1.0, p: 1.0, values: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KappaForm {
    #[default]
    Zero,
    ScaledProduct,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct KappaSection {
    pub form: KappaForm,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub theta: ThetaSection,
    pub kappa: KappaSection,
    pub declared_class: DeclaredClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Monodisperse,
    Geometric,
    PowerTail,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub family: Family,
    pub a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection { family: Family::Monodisperse, a: 1.0, r: None, q: None, values: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n: usize,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub samples: usize,
    pub tail_cutoffs: Vec<usize>,
    pub eta: f64,
    pub delta: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { n: 64, t_end: 1.0, samples: 101, tail_cutoffs: vec![1, 2, 4, 8], eta: 0.5, delta: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_list: Vec<usize>,
    pub delta: f64,
    pub gel_time_rel_change: f64,
    pub loss_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_h: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let th = Thresholds::default();
        SweepSection {
            n_list: vec![64, 128, 256, 512],
            delta: 0.1,
            gel_time_rel_change: th.gel_time_rel_change,
            loss_ratio: th.loss_ratio,
            oracle_h: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Adaptive,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: MethodName,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step of the fixed-step method.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_tol: Option<f64>,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        IntegratorSection {
            method: MethodName::Adaptive,
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            h: None,
            h_init: d.h_init,
            h_min: d.h_min,
            h_max: d.h_max,
            clamp_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSection {
    pub bounds: Vec<BoundId>,
    pub kappa0: f64,
    /// Override for `C` in `Λ ≥ C (ij)^{κ₀/2}`.
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// Override for the uniform lower bound `Λ ≥ C`.
    #[serde(rename = "C_uniform", skip_serializing_if = "Option::is_none")]
    pub c_uniform: Option<f64>,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection { bounds: BoundId::ALL.to_vec(), kappa0: 1.5, c: None, zeta: None, c_uniform: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub csv: String,
    pub report: String,
    pub sweep: String,
    pub head_size: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            csv: "trajectory.csv".into(),
            report: "bounds.json".into(),
            sweep: "sweep.json".into(),
            head_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSection,
    pub init: InitSection,
    pub run: RunSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    pub integrator: IntegratorSection,
    pub checks: ChecksSection,
    pub output: OutputSection,
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn nonneg(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be nonnegative, got {v}")))
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, ConfigError> {
        let k = &self.kernel;
        let theta = match k.theta.form {
            ThetaForm::Power => {
                positive("kernel.theta.a", k.theta.a)?;
                nonneg("kernel.theta.p", k.theta.p)?;
                ThetaSequence::power(k.theta.a, k.theta.p)
            }
            ThetaForm::Table => {
                let values = k
                    .theta
                    .values
                    .clone()
                    .ok_or_else(|| invalid("kernel.theta.values", "required for the table form"))?;
                for v in &values {
                    nonneg("kernel.theta.values", *v)?;
                }
                ThetaSequence::Table(values)
            }
        };
        let kappa = match k.kappa.form {
            KappaForm::Zero => KappaModel::Zero,
            KappaForm::ScaledProduct => {
                nonneg("kernel.kappa.c", k.kappa.c)?;
                KappaModel::ScaledProduct { c: k.kappa.c }
            }
            KappaForm::Table => {
                let rows = k
                    .kappa
                    .values
                    .clone()
                    .ok_or_else(|| invalid("kernel.kappa.values", "required for the table form"))?;
                KappaModel::table(rows).map_err(|e| invalid("kernel.kappa.values", e.to_string()))?
            }
        };
        Ok(KernelSpec { theta, kappa, declared_class: k.declared_class })
    }

    pub fn initial_data(&self) -> Result<InitialData, ConfigError> {
        let i = &self.init;
        nonneg("init.a", i.a)?;
        let data = match i.family {
            Family::Monodisperse => InitialData::Monodisperse { a: i.a },
            Family::Geometric => {
                let r = i.r.ok_or_else(|| invalid("init.r", "required for the geometric family"))?;
                if !(r > 0.0 && r < 1.0) {
                    return Err(invalid("init.r", format!("must lie in (0, 1), got {r}")));
                }
                InitialData::Geometric { a: i.a, r }
            }
            Family::PowerTail => {
                let q = i.q.ok_or_else(|| invalid("init.q", "required for the power_tail family"))?;
                if !(q.is_finite() && q > 1.0) {
                    return Err(invalid("init.q", format!("must exceed 1, got {q}")));
                }
                InitialData::PowerTail { a: i.a, q }
            }
            Family::Table => {
                let values =
                    i.values.clone().ok_or_else(|| invalid("init.values", "required for the table family"))?;
                for v in &values {
                    nonneg("init.values", *v)?;
                }
                InitialData::Table(values)
            }
        };
        Ok(data)
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, ConfigError> {
        let s = &self.integrator;
        positive("integrator.rel_tol", s.rel_tol)?;
        positive("integrator.abs_tol", s.abs_tol)?;
        positive("integrator.h_init", s.h_init)?;
        positive("integrator.h_min", s.h_min)?;
        positive("integrator.h_max", s.h_max)?;
        if s.h_min > s.h_init {
            return Err(invalid("integrator.h_min", "must not exceed integrator.h_init"));
        }
        if s.h_init > s.h_max {
            return Err(invalid("integrator.h_init", "must not exceed integrator.h_max"));
        }
        if let Some(c) = s.clamp_tol {
            positive("integrator.clamp_tol", c)?;
        }
        let method = match s.method {
            MethodName::Adaptive => Method::AdaptiveEmbedded45,
            MethodName::Rk4 => {
                let h = s.h.ok_or_else(|| invalid("integrator.h", "required for method = \"rk4\""))?;
                positive("integrator.h", h)?;
                Method::FixedRk4 { h }
            }
        };
        Ok(IntegratorConfig {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            h_init: s.h_init,
            h_min: s.h_min,
            h_max: s.h_max,
            clamp_tol: s.clamp_tol,
            method,
        })
    }

    pub fn sweep_config(&self) -> Result<Option<SweepConfig>, ConfigError> {
        let Some(s) = &self.sweep else { return Ok(None) };
        if s.n_list.len() < 3 {
            return Err(invalid("sweep.n_list", "needs at least 3 entries"));
        }
        if s.n_list[0] == 0 || s.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sweep.n_list", "must be strictly ascending positive integers"));
        }
        if !(s.delta > 0.0 && s.delta < 1.0) {
            return Err(invalid("sweep.delta", format!("must lie in (0, 1), got {}", s.delta)));
        }
        positive("sweep.gel_time_rel_change", s.gel_time_rel_change)?;
        positive("sweep.loss_ratio", s.loss_ratio)?;
        if let Some(h) = s.oracle_h {
            positive("sweep.oracle_h", h)?;
        }
        Ok(Some(SweepConfig {
            n_list: s.n_list.clone(),
            t_end: self.run.t_end,
            samples: self.run.samples,
            delta: s.delta,
            thresholds: Thresholds {
                gel_time_rel_change: s.gel_time_rel_change,
                loss_ratio: s.loss_ratio,
                ..Thresholds::default()
            },
            oracle_h: s.oracle_h,
        }))
    }

    /// Checks every numeric parameter against its documented range.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.kernel_spec()?
            .validate()
            .map_err(|e| invalid("kernel", e.to_string()))?;
        self.initial_data()?;
        let r = &self.run;
        if r.n == 0 {
            return Err(invalid("run.n", "must be at least 1"));
        }
        positive("run.T", r.t_end)?;
        if r.samples < 2 {
            return Err(invalid("run.samples", format!("must be at least 2, got {}", r.samples)));
        }
        if r.tail_cutoffs.contains(&0) {
            return Err(invalid("run.tail_cutoffs", "cutoffs must be at least 1"));
        }
        if !(r.eta > 0.0 && r.eta < 1.0) {
            return Err(invalid("run.eta", format!("must lie in (0, 1), got {}", r.eta)));
        }
        if !(r.delta > 0.0 && r.delta < 1.0) {
            return Err(invalid("run.delta", format!("must lie in (0, 1), got {}", r.delta)));
        }
        self.integrator_config()?;
        self.sweep_config()?;
        let c = &self.checks;
        if !(c.kappa0 > 1.0 && c.kappa0 < 2.0) {
            return Err(invalid("checks.kappa0", format!("must lie in (1, 2), got {}", c.kappa0)));
        }
        for (key, v) in [("checks.C", c.c), ("checks.zeta", c.zeta), ("checks.C_uniform", c.c_uniform)] {
            if let Some(v) = v {
                positive(key, v)?;
            }
        }
        if self.output.head_size == 0 {
            return Err(invalid("output.head_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// Parses and validates a configuration document, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}
