//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, and `epsilon` may be repeated
//! to build a list. Unknown and duplicated keys are errors. Values are checked
//! when the file is parsed, so a config that parses can be run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::measures::PotentialSpec;

/// Every accepted key with its default, as printed by `--help`.
pub const KEY_REFERENCE: &str = "\
Config keys (key = value, one per line, # comments):
  experiment        solve | limit-sweep | monotonicity | gj-check | order-check | prekopa-suite
  dimension         1 or 2                               [1]
  bound             half-width L of the grid box         [6 in 1D, 5 in 2D]
  points            nodes per axis N                     [301 in 1D, 61 in 2D]
  epsilon           noise level; repeat the key for a list
                    [solve 0.5; limit-sweep 0.5 0.2 0.1 0.05 0.02;
                     monotonicity 0.1 0.3; prekopa-suite 0.3 in 1D, 0.5 in 2D]
  V                 potential of mu = exp(V) gamma       [zero]
  W                 potential of nu = exp(-W) gamma      [zero]
  scheme            sinkhorn | fortet | both             [both for solve, else sinkhorn]
  seed              base seed for random trials          [0]
  tol               solver stopping tolerance            [1e-8]
  max_iter          solver iteration cap                 [100000]
  trials            trials or cases per experiment       [monotonicity 25 per epsilon; gj-check 100;
                                                          order-check 200; prekopa-suite 100]
  max_cells         largest collapse partition           [12]
  convexity_tol     tolerance of discrete convexity tests [1e-7]
  slack             allowed gap increase in limit-sweep  [0.1]
  threshold         final relative gap in limit-sweep    [0.05]
  expect            pass | violation (gj-check outcome)  [pass]
  waive_compactness accept W without compact support    [false]
  coupling          write the dense coupling CSV (solve) [false]
  plots             write SVG plots                      [false]
  eta_file, nu_file atom CSVs for a single order-check   [unset: random pairs]
  out               output directory                     [out]

Potentials: terms joined by '+', each optionally scaled as 'c * term':
  zero, quadratic(a, b, c) = a|x|^2 + b x_1 + c, abs-norm(a), indicator-ball(r),
  piecewise-linear(x:y, ...), neglog-mixture(w:m:v, ...)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}, column {}: {}", self.line, self.column, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    LimitSweep,
    Monotonicity,
    GjCheck,
    OrderCheck,
    PrekopaSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Solve,
        Experiment::LimitSweep,
        Experiment::Monotonicity,
        Experiment::GjCheck,
        Experiment::OrderCheck,
        Experiment::PrekopaSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::LimitSweep => "limit-sweep",
            Experiment::Monotonicity => "monotonicity",
            Experiment::GjCheck => "gj-check",
            Experiment::OrderCheck => "order-check",
            Experiment::PrekopaSuite => "prekopa-suite",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    Sinkhorn,
    Fortet,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Pass,
    Violation,
}

/// A parsed configuration. Unset fields fall back to per-experiment defaults
/// through the accessor methods.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub dimension: usize,
    pub bound: Option<f64>,
    pub points: Option<usize>,
    pub epsilon: Vec<f64>,
    pub v: PotentialSpec,
    pub w: PotentialSpec,
    pub scheme: Option<SchemeChoice>,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub trials: Option<usize>,
    pub max_cells: usize,
    pub convexity_tol: f64,
    pub slack: f64,
    pub threshold: f64,
    pub expect: Expectation,
    pub waive_compactness: bool,
    pub coupling: bool,
    pub plots: bool,
    pub eta_file: Option<PathBuf>,
    pub nu_file: Option<PathBuf>,
    pub out: PathBuf,
    /// Line of each key that was set, for diagnostics raised after parsing.
    lines: BTreeMap<&'static str, (usize, usize)>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            dimension: 1,
            bound: None,
            points: None,
            epsilon: Vec::new(),
            v: PotentialSpec::Zero,
            w: PotentialSpec::Zero,
            scheme: None,
            seed: 0,
            tol: 1e-8,
            max_iter: 100_000,
            trials: None,
            max_cells: 12,
            convexity_tol: 1e-7,
            slack: 0.1,
            threshold: 0.05,
            expect: Expectation::Pass,
            waive_compactness: false,
            coupling: false,
            plots: false,
            eta_file: None,
            nu_file: None,
            out: PathBuf::from("out"),
            lines: BTreeMap::new(),
        }
    }
}

const KEYS: [&str; 24] = [
    "experiment",
    "dimension",
    "bound",
    "points",
    "epsilon",
    "V",
    "W",
    "scheme",
    "seed",
    "tol",
    "max_iter",
    "trials",
    "max_cells",
    "convexity_tol",
    "slack",
    "threshold",
    "expect",
    "waive_compactness",
    "coupling",
    "plots",
    "eta_file",
    "nu_file",
    "out",
    // accepted for symmetry with the CLI flag
    "quiet",
];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let key_col = content.len() - content.trim_start().len() + 1;
        let Some(eq) = content.find('=') else {
            return Err(ConfigError {
                line,
                column: key_col,
                message: format!("expected 'key = value', found '{}'", content.trim()),
            });
        };
        let key = content[..eq].trim();
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_col = eq + 2 + (after.len() - after.trim_start().len());
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError {
                line,
                column: key_col,
                message: format!("unknown key '{key}'"),
            });
        };
        if key != "epsilon" {
            if let Some((prev, _)) = cfg.lines.get(key) {
                return Err(ConfigError {
                    line,
                    column: key_col,
                    message: format!("duplicate key '{key}' (first set on line {prev})"),
                });
            }
        }
        cfg.lines.entry(key).or_insert((line, value_col));
        let err = |message: String| ConfigError {
            line,
            column: value_col,
            message,
        };
        if value.is_empty() {
            return Err(err(format!("missing value for '{key}'")));
        }
        set(&mut cfg, key, value).map_err(|m| match m {
            SetError::Message(m) => err(m),
            SetError::Potential { column, message } => ConfigError {
                line,
                column: value_col + column - 1,
                message,
            },
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

enum SetError {
    Message(String),
    Potential { column: usize, message: String },
}

impl From<String> for SetError {
    fn from(m: String) -> Self {
        SetError::Message(m)
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("'{key}' expects a number, got '{value}'"))
}

fn flag(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{key}' expects true or false, got '{value}'")),
    }
}

fn potential(value: &str) -> Result<PotentialSpec, SetError> {
    PotentialSpec::parse(value).map_err(|e| match e {
        crate::Error::Parse { column, message } => SetError::Potential { column, message },
        other => SetError::Message(other.to_string()),
    })
}

fn set(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), SetError> {
    match key {
        "experiment" => cfg.experiment = Some(value.parse()?),
        "dimension" => cfg.dimension = num(key, value)?,
        "bound" => cfg.bound = Some(num(key, value)?),
        "points" => cfg.points = Some(num(key, value)?),
        "epsilon" => cfg.epsilon.push(num(key, value)?),
        "V" => cfg.v = potential(value)?,
        "W" => cfg.w = potential(value)?,
        "scheme" => {
            cfg.scheme = Some(match value {
                "sinkhorn" => SchemeChoice::Sinkhorn,
                "fortet" => SchemeChoice::Fortet,
                "both" => SchemeChoice::Both,
                _ => return Err(format!("unknown scheme '{value}'").into()),
            })
        }
        "seed" => cfg.seed = num(key, value)?,
        "tol" => cfg.tol = num(key, value)?,
        "max_iter" => cfg.max_iter = num(key, value)?,
        "trials" => cfg.trials = Some(num(key, value)?),
        "max_cells" => cfg.max_cells = num(key, value)?,
        "convexity_tol" => cfg.convexity_tol = num(key, value)?,
        "slack" => cfg.slack = num(key, value)?,
        "threshold" => cfg.threshold = num(key, value)?,
        "expect" => {
            cfg.expect = match value {
                "pass" => Expectation::Pass,
                "violation" => Expectation::Violation,
                _ => return Err(format!("'expect' is pass or violation, got '{value}'").into()),
            }
        }
        "waive_compactness" => cfg.waive_compactness = flag(key, value)?,
        "coupling" => cfg.coupling = flag(key, value)?,
        "plots" => cfg.plots = flag(key, value)?,
        "quiet" => {
            flag(key, value)?;
        }
        "eta_file" => cfg.eta_file = Some(PathBuf::from(value)),
        "nu_file" => cfg.nu_file = Some(PathBuf::from(value)),
        "out" => cfg.out = PathBuf::from(value),
        _ => unreachable!("key list and setter out of sync"),
    }
    Ok(())
}

impl ExperimentConfig {
    fn at(&self, key: &str, message: String) -> ConfigError {
        let (line, column) = self.lines.get(key).copied().unwrap_or((0, 0));
        ConfigError { line, column, message }
    }

    /// Sets the experiment from the command line; a config naming a different
    /// experiment is rejected.
    pub fn with_experiment(mut self, e: Experiment) -> Result<Self, ConfigError> {
        if let Some(prev) = self.experiment {
            if prev != e {
                return Err(self.at(
                    "experiment",
                    format!("config names '{}' but the command is '{}'", prev.name(), e.name()),
                ));
            }
        }
        self.experiment = Some(e);
        self.validate()?;
        Ok(self)
    }

    pub fn bound(&self) -> f64 {
        self.bound.unwrap_or(if self.dimension == 2 { 5.0 } else { 6.0 })
    }

    pub fn points(&self) -> usize {
        self.points.unwrap_or(if self.dimension == 2 { 61 } else { 301 })
    }

    pub fn epsilons(&self) -> Vec<f64> {
        if !self.epsilon.is_empty() {
            return self.epsilon.clone();
        }
        match self.experiment {
            Some(Experiment::LimitSweep) => vec![0.5, 0.2, 0.1, 0.05, 0.02],
            Some(Experiment::Monotonicity) => vec![0.1, 0.3],
            Some(Experiment::PrekopaSuite) if self.dimension == 2 => vec![0.5],
            Some(Experiment::PrekopaSuite) => vec![0.3],
            _ => vec![0.5],
        }
    }

    pub fn scheme(&self) -> SchemeChoice {
        self.scheme.unwrap_or(match self.experiment {
            Some(Experiment::Solve) => SchemeChoice::Both,
            _ => SchemeChoice::Sinkhorn,
        })
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.experiment {
            Some(Experiment::Monotonicity) => 25,
            Some(Experiment::OrderCheck) => 200,
            _ => 100,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dimension != 1 && self.dimension != 2 {
            return Err(self.at("dimension", format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        if !(self.bound() > 0.0) {
            return Err(self.at("bound", "bound must be positive".into()));
        }
        if self.points() < 3 {
            return Err(self.at("points", "need at least 3 points per axis".into()));
        }
        for (key, v) in [
            ("tol", self.tol),
            ("convexity_tol", self.convexity_tol),
            ("slack", self.slack),
            ("threshold", self.threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(self.at(key, format!("'{key}' must be a positive number, got {v}")));
            }
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(self.at("epsilon", format!("epsilon must be positive, got {e}")));
        }
        if self.max_iter == 0 {
            return Err(self.at("max_iter", "max_iter must be positive".into()));
        }
        if self.trials == Some(0) {
            return Err(self.at("trials", "trials must be positive".into()));
        }
        if self.max_cells == 0 {
            return Err(self.at("max_cells", "max_cells must be positive".into()));
        }
        if self.eta_file.is_some() != self.nu_file.is_some() {
            return Err(self.at(
                if self.eta_file.is_some() { "eta_file" } else { "nu_file" },
                "eta_file and nu_file go together".into(),
            ));
        }
        if self.scheme == Some(SchemeChoice::Both) && self.experiment.is_some_and(|e| e != Experiment::Solve) {
            return Err(self.at("scheme", "scheme = both is only available for solve".into()));
        }
        match self.experiment {
            Some(Experiment::LimitSweep) => {
                if self.dimension != 1 {
                    return Err(self.at("dimension", "limit-sweep is one-dimensional".into()));
                }
                if self.epsilons().windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(self.at("epsilon", "limit-sweep needs a strictly decreasing epsilon list".into()));
                }
            }
            Some(Experiment::GjCheck) if self.dimension != 1 => {
                return Err(self.at("dimension", "gj-check is one-dimensional".into()));
            }
            Some(Experiment::Solve) | Some(Experiment::PrekopaSuite) if self.epsilon.len() > 1 => {
                let e = self.experiment.unwrap();
                return Err(self.at("epsilon", format!("{} takes a single epsilon", e.name())));
            }
            _ => {}
        }
        Ok(())
    }

    /// Resolved settings, defaults included, for the run manifest.
    pub fn echo(&self) -> Value {
        json!({
            "experiment": self.experiment.map(|e| e.name()),
            "dimension": self.dimension,
            "bound": self.bound(),
            "points": self.points(),
            "epsilon": self.epsilons(),
            "V": self.v.to_string(),
            "W": self.w.to_string(),
            "scheme": self.scheme(),
            "seed": self.seed,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "trials": self.trials(),
            "max_cells": self.max_cells,
            "convexity_tol": self.convexity_tol,
            "slack": self.slack,
            "threshold": self.threshold,
            "expect": self.expect,
            "waive_compactness": self.waive_compactness,
            "coupling": self.coupling,
            "plots": self.plots,
            "eta_file": self.eta_file,
            "nu_file": self.nu_file,
            "out": self.out,
        })
    }
}
