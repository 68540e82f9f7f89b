//! TOML run configuration.
//!
//! ```toml
//! [model]
//! name = "by_constant_vol"
//! mu_c = 0.0015
//! rho = 0.979
//! sigma = 0.0078
//!
//! [preferences]
//! beta = 0.998
//! gamma = 10.0
//! psi = 1.5
//! ```
//!
//! Optional sections: `[estimation]`, `[grid]`, `[solve]`, `[sweep]`.
//! Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::lambda::McSettings;
use crate::model::{ByConstantVol, ByStochVol, FiniteChain, MehraPrescott, ModelSpec, Ssy};
use crate::operator::{DiscreteOperator, OperatorOptions};
use crate::prefs::PreferenceSpec;
use crate::solver::{SolveSettings, StateFunction};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid override `{spec}`: {reason}")]
    Override { spec: String, reason: String },
    #[error("[{section}] {source}")]
    Invalid {
        section: &'static str,
        #[source]
        source: Error,
    },
}

fn invalid(section: &'static str) -> impl FnOnce(Error) -> ConfigError {
    move |source| ConfigError::Invalid { section, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelConfig {
    ByConstantVol(ByConstantVol),
    ByStochVol(ByStochVol),
    MehraPrescott(MehraPrescott),
    Ssy(Ssy),
    FiniteChain(FiniteChainConfig),
    /// One-state chain with scalar kernel value `kernel`.
    Singleton(SingletonConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteChainConfig {
    pub transition: Vec<Vec<f64>>,
    pub growth: Vec<Vec<f64>>,
    #[serde(default)]
    pub stationary: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingletonConfig {
    pub kernel: f64,
}

impl ModelConfig {
    /// Scalar parameters that a sweep may vary.
    pub fn sweepable(&self) -> &'static [&'static str] {
        match self {
            ModelConfig::ByConstantVol(_) => &["mu_c", "rho", "sigma"],
            ModelConfig::ByStochVol(_) => &[
                "mu_c",
                "rho",
                "phi_e",
                "nu",
                "d_const",
                "phi_sigma",
                "m_bound",
                "eps_floor",
                "shock_support",
            ],
            ModelConfig::MehraPrescott(_) => &["g_rate", "a"],
            ModelConfig::Ssy(_) => &[
                "mu_c",
                "rho",
                "phi_c",
                "phi_z",
                "sigma_bar",
                "rho_hc",
                "rho_hz",
                "sigma_hc",
                "sigma_hz",
                "m_bound",
                "shock_support",
            ],
            ModelConfig::FiniteChain(_) => &[],
            ModelConfig::Singleton(_) => &["kernel"],
        }
    }

    /// The singleton kernel needs `1 - gamma` to recover the growth rate.
    pub fn build(&self, prefs: &PreferenceSpec) -> crate::Result<ModelSpec> {
        let model: ModelSpec = match self {
            ModelConfig::ByConstantVol(m) => (*m).into(),
            ModelConfig::ByStochVol(m) => (*m).into(),
            ModelConfig::MehraPrescott(m) => (*m).into(),
            ModelConfig::Ssy(m) => (*m).into(),
            ModelConfig::FiniteChain(c) => match &c.stationary {
                Some(pi) => FiniteChain::with_stationary(c.transition.clone(), c.growth.clone(), pi.clone())?,
                None => FiniteChain::new(c.transition.clone(), c.growth.clone())?,
            }
            .into(),
            ModelConfig::Singleton(s) => FiniteChain::singleton(s.kernel, prefs.one_minus_gamma())?.into(),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nodes: usize,
    pub span: f64,
    pub normalize_rows: bool,
    pub occupation_steps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let ops = OperatorOptions::default();
        Self {
            nodes: 101,
            span: 6.0,
            normalize_rows: ops.normalize_rows,
            occupation_steps: ops.occupation_steps,
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// Time-preference shocks.
    #[default]
    A,
    /// Narrow framing.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub operator: OperatorKind,
    pub tol: f64,
    pub max_iter: usize,
    pub lambda_fn: StateFunction,
    pub b_fn: StateFunction,
    /// Constant starting value `g_0`.
    pub initial: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let s = SolveSettings::default();
        Self {
            operator: OperatorKind::A,
            tol: s.tol,
            max_iter: s.max_iter,
            lambda_fn: StateFunction::default(),
            b_fn: StateFunction::Constant { value: 0.3 },
            initial: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SweepAxis {
    /// Evenly spaced values from `lo` to `hi` inclusive.
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => vec![],
            1 => vec![self.lo],
            n => (0..n)
                .map(|k| {
                    if k == n - 1 {
                        self.hi
                    } else {
                        self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub a: SweepAxis,
    pub b: SweepAxis,
    /// Reuse the global seed in every cell instead of a per-cell seed.
    #[serde(default)]
    pub common_random_numbers: bool,
    /// Half-width of the classification band; defaults to two standard errors.
    #[serde(default)]
    pub band: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub preferences: PreferenceSpec,
    #[serde(default)]
    pub estimation: McSettings,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

const PREFERENCE_KEYS: [&str; 3] = ["beta", "gamma", "psi"];

/// Parses `key.path=value`, reading the value as a TOML literal and falling
/// back to a bare string.
fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let err = |reason: &str| ConfigError::Override {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let (key, raw) = spec.split_once('=').ok_or_else(|| err("expected key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(err("empty key segment"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), String> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for seg in parents {
        cur = cur
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("`{seg}` is not a table"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Raw configuration tree, kept so sweeps can rewrite single parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigTree {
    table: toml::Table,
}

impl ConfigTree {
    /// Parses TOML text; type and unknown-key errors carry line context.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str::<RunConfig>(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let table = toml::from_str::<toml::Table>(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(Self { table })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (path, value) = parse_override(spec)?;
        set_path(&mut self.table, &path, value).map_err(|reason| ConfigError::Override {
            spec: spec.to_string(),
            reason,
        })?;
        self.resolve().map_err(|e| match e {
            ConfigError::Parse(reason) => ConfigError::Override {
                spec: spec.to_string(),
                reason,
            },
            other => other,
        })?;
        Ok(())
    }

    /// Sets a swept parameter, looked up in `[preferences]` then `[model]`.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let section = if PREFERENCE_KEYS.contains(&name) {
            "preferences"
        } else {
            "model"
        };
        set_path(
            &mut self.table,
            &[section.to_string(), name.to_string()],
            toml::Value::Float(value),
        )
        .map_err(ConfigError::Parse)
    }

    /// Typed view of the tree, before numeric validation.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        RunConfig::deserialize(toml::Value::Table(self.table.clone())).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Typed and fully validated configuration.
    pub fn validated(&self) -> Result<RunConfig, ConfigError> {
        let cfg = self.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        ConfigTree::parse(text)?.validated()
    }

    pub fn preferences(&self) -> &PreferenceSpec {
        &self.preferences
    }

    pub fn build_model(&self) -> Result<ModelSpec, ConfigError> {
        self.model.build(&self.preferences).map_err(invalid("model"))
    }

    pub fn build_operator(&self) -> crate::Result<DiscreteOperator> {
        let model = self.model.build(&self.preferences)?;
        let grid = crate::grid::Grid::for_model(&model, self.grid.nodes, self.grid.span)?;
        let options = OperatorOptions {
            normalize_rows: self.grid.normalize_rows,
            occupation_steps: self.grid.occupation_steps,
        };
        DiscreteOperator::new(&model, &self.preferences, grid, options)
    }

    /// Checks every numeric range without running any estimator.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build_model()?;
        self.estimation.validate().map_err(invalid("estimation"))?;
        let grid_err = |msg: String| ConfigError::Invalid {
            section: "grid",
            source: Error::Domain(msg),
        };
        if self.grid.nodes < 3 {
            return Err(grid_err(format!("nodes must be at least 3, got {}", self.grid.nodes)));
        }
        if !(self.grid.span > 0.0 && self.grid.span.is_finite()) || !(self.grid.tol > 0.0) {
            return Err(grid_err("span and tol must be positive".into()));
        }
        let s = &self.solve;
        s.lambda_fn.validate().map_err(invalid("solve"))?;
        s.b_fn.validate().map_err(invalid("solve"))?;
        if !(s.tol > 0.0) || !(s.initial > 0.0 && s.initial.is_finite()) || s.max_iter == 0 {
            return Err(ConfigError::Invalid {
                section: "solve",
                source: Error::Domain("tol, initial and max_iter must be positive".into()),
            });
        }
        if let Some(sweep) = &self.sweep {
            for axis in [&sweep.a, &sweep.b] {
                let known = PREFERENCE_KEYS.contains(&axis.name.as_str())
                    || self.model.sweepable().contains(&axis.name.as_str());
                if !known {
                    return Err(ConfigError::Invalid {
                        section: "sweep",
                        source: Error::Domain(format!(
                            "`{}` is not a sweepable parameter of {}",
                            axis.name,
                            self.model_name()
                        )),
                    });
                }
                if !(axis.lo.is_finite() && axis.hi.is_finite()) {
                    return Err(ConfigError::Invalid {
                        section: "sweep",
                        source: Error::Domain(format!("`{}` range must be finite", axis.name)),
                    });
                }
            }
            if sweep.a.name == sweep.b.name {
                return Err(ConfigError::Invalid {
                    section: "sweep",
                    source: Error::Domain("the two swept parameters must differ".into()),
                });
            }
            if let Some(band) = sweep.band {
                if !(band >= 0.0) {
                    return Err(ConfigError::Invalid {
                        section: "sweep",
                        source: Error::Domain("band must be nonnegative".into()),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn model_name(&self) -> &'static str {
        match self.model {
            ModelConfig::ByConstantVol(_) => "by_constant_vol",
            ModelConfig::ByStochVol(_) => "by_stoch_vol",
            ModelConfig::MehraPrescott(_) => "mehra_prescott",
            ModelConfig::Ssy(_) => "ssy",
            ModelConfig::FiniteChain(_) => "finite_chain",
            ModelConfig::Singleton(_) => "singleton",
        }
    }
}
