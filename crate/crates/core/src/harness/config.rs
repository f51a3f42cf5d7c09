//! Declarative experiment configuration (JSON, `"schema": 1`).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blindest::GainEstimator;
use crate::error::{Error, FieldError, Result};
use crate::model::InputDistribution;
use crate::numerics::QuadratureSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Grids longer than this are rejected as likely typos.
const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Regret scalar, `I(Y;a)` and the trade-off residual per gain.
    Tradeoff,
    /// Regret scalar and `I(Y;a)` per gain.
    Fig2,
    /// Regret against every bound, per gain and `â` rule.
    Bounds,
    /// Gain-estimator efficiency and expected regret, per gain and estimator.
    Efficiency,
    /// Regret and MSEs per gain and `â` rule.
    RegretSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tradeoff => "tradeoff",
            Self::Fig2 => "fig2",
            Self::Bounds => "bounds",
            Self::Efficiency => "efficiency",
            Self::RegretSweep => "regret-sweep",
        }
    }

    fn uses_a_hat_rules(self) -> bool {
        !matches!(self, Self::Tradeoff | Self::Fig2)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Gains to evaluate: an explicit list or an arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl AGrid {
    /// Range points are `start + i·step` up to `stop` (inclusive within
    /// rounding), computed without accumulation.
    pub fn points(&self) -> Vec<f64> {
        match self {
            Self::List(xs) => xs.clone(),
            Self::Range { start, stop, step } => {
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| start + i as f64 * step).collect()
            }
        }
    }

    fn check(&self, errs: &mut Vec<FieldError>) {
        match self {
            Self::List(xs) => {
                if xs.is_empty() {
                    errs.push(FieldError::new("a_grid", "must not be empty"));
                }
                for (i, a) in xs.iter().enumerate() {
                    if !(*a > 0.0 && a.is_finite()) {
                        errs.push(FieldError::new(
                            format!("a_grid[{i}]"),
                            format!("gain {a} must be finite and > 0"),
                        ));
                    }
                }
            }
            Self::Range { start, stop, step } => {
                if !(*start > 0.0 && start.is_finite()) {
                    errs.push(FieldError::new(
                        "a_grid.start",
                        format!("{start} must be finite and > 0"),
                    ));
                }
                if !(stop >= start && stop.is_finite()) {
                    errs.push(FieldError::new(
                        "a_grid.stop",
                        format!("{stop} must be finite and >= start"),
                    ));
                }
                if !(*step > 0.0 && step.is_finite()) {
                    errs.push(FieldError::new(
                        "a_grid.step",
                        format!("{step} must be finite and > 0"),
                    ));
                } else if stop >= start && (stop - start) / step > MAX_GRID_POINTS as f64 {
                    errs.push(FieldError::new(
                        "a_grid",
                        format!("more than {MAX_GRID_POINTS} points"),
                    ));
                }
            }
        }
    }
}

/// How the mismatched gain `â` is chosen for each true gain `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AHatRule {
    /// `â = a + delta`.
    FixedOffset { delta: f64 },
    /// `â = a·(1 + epsilon)`.
    RelativeOffset { epsilon: f64 },
    /// `â` estimated from `n − 1` fresh outputs of the true channel.
    FromEstimator { estimator: GainEstimator, n: usize },
}

impl fmt::Display for AHatRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FixedOffset { delta } => write!(f, "fixed-offset({delta})"),
            Self::RelativeOffset { epsilon } => write!(f, "relative-offset({epsilon})"),
            Self::FromEstimator { estimator, n } => {
                let kind = match estimator.kind {
                    crate::blindest::EstimatorKind::MomentMatching => "moment-matching",
                    crate::blindest::EstimatorKind::NumericalMle => "numerical-mle",
                };
                write!(f, "from-estimator({kind},{n})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default = "default_id")]
    pub id: String,
    pub kind: ExperimentKind,
    pub prior: InputDistribution,
    pub noise_var: f64,
    pub a_grid: AGrid,
    #[serde(default)]
    pub a_hat_rules: Vec<AHatRule>,
    /// Monte Carlo trials per row (efficiency only).
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Outputs per row, spread over ±6 output standard deviations, at which
    /// the exact pointwise regret bound is checked (bounds only).
    #[serde(default = "default_pointwise_points")]
    pub pointwise_points: usize,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_id() -> String {
    "experiment".into()
}

fn default_trials() -> usize {
    1
}

fn default_pointwise_points() -> usize {
    25
}

impl ExperimentConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(
        kind: ExperimentKind,
        prior: InputDistribution,
        noise_var: f64,
        a_grid: AGrid,
    ) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            id: kind.name().into(),
            kind,
            prior,
            noise_var,
            a_grid,
            a_hat_rules: Vec::new(),
            trials: default_trials(),
            seed: 0,
            quadrature: QuadratureSpec::default(),
            pointwise_points: default_pointwise_points(),
            output: OutputPaths::default(),
        }
    }

    /// Parses and validates; every problem is reported with its field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "(root)".to_string()
            } else {
                path
            };
            Error::ConfigInvalid(vec![FieldError::new(field, e.into_inner().to_string())])
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::ConfigInvalid(vec![FieldError::new(
                "(file)",
                format!("cannot read {}: {e}", path.display()),
            )])
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks every semantic constraint, collecting all failures.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.schema != SCHEMA_VERSION {
            errs.push(FieldError::new(
                "schema",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema
                ),
            ));
        }
        if let Err(e) = self.prior.validate() {
            errs.push(FieldError::new("prior", e.to_string()));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            errs.push(FieldError::new(
                "noise_var",
                format!("{} must be finite and > 0", self.noise_var),
            ));
        }
        self.a_grid.check(&mut errs);
        if self.trials == 0 {
            errs.push(FieldError::new("trials", "must be at least 1"));
        }
        if let Err(e) = self.quadrature.validate() {
            errs.push(FieldError::new("quadrature", e.to_string()));
        }
        if self.kind == ExperimentKind::Tradeoff {
            if let Err(e) = self.prior.require_zero_mean() {
                errs.push(FieldError::new("prior", e.to_string()));
            }
        }
        if self.kind == ExperimentKind::Bounds && self.pointwise_points == 0 {
            errs.push(FieldError::new("pointwise_points", "must be at least 1"));
        }
        self.check_rules(&mut errs);
        for (name, path) in [
            ("output.csv", &self.output.csv),
            ("output.json", &self.output.json),
        ] {
            if let Some(p) = path {
                let parent = p
                    .parent()
                    .filter(|d| !d.as_os_str().is_empty())
                    .unwrap_or(Path::new("."));
                if !parent.is_dir() {
                    errs.push(FieldError::new(
                        name,
                        format!("directory {} does not exist", parent.display()),
                    ));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(errs))
        }
    }

    fn check_rules(&self, errs: &mut Vec<FieldError>) {
        if !self.kind.uses_a_hat_rules() {
            if !self.a_hat_rules.is_empty() {
                errs.push(FieldError::new(
                    "a_hat_rules",
                    format!("not used by kind {}; remove it", self.kind),
                ));
            }
            return;
        }
        if self.a_hat_rules.is_empty() {
            errs.push(FieldError::new(
                "a_hat_rules",
                format!("kind {} needs at least one rule", self.kind),
            ));
        }
        let grid_min = match &self.a_grid {
            AGrid::List(xs) => xs.iter().copied().fold(f64::INFINITY, f64::min),
            AGrid::Range { start, .. } => *start,
        };
        for (i, rule) in self.a_hat_rules.iter().enumerate() {
            let field = format!("a_hat_rules[{i}]");
            match *rule {
                AHatRule::FixedOffset { delta } => {
                    if self.kind == ExperimentKind::Efficiency {
                        errs.push(FieldError::new(
                            field,
                            "efficiency needs from-estimator rules",
                        ));
                    } else if !(delta.is_finite() && grid_min + delta > 0.0) {
                        errs.push(FieldError::new(
                            field,
                            format!("delta {delta} makes â non-positive on the grid"),
                        ));
                    }
                }
                AHatRule::RelativeOffset { epsilon } => {
                    if self.kind == ExperimentKind::Efficiency {
                        errs.push(FieldError::new(
                            field,
                            "efficiency needs from-estimator rules",
                        ));
                    } else if !(epsilon.is_finite() && epsilon > -1.0) {
                        errs.push(FieldError::new(
                            field,
                            format!("epsilon {epsilon} must be finite and > -1"),
                        ));
                    }
                }
                AHatRule::FromEstimator { estimator, n } => {
                    if n < 2 {
                        errs.push(FieldError::new(
                            format!("{field}.n"),
                            format!("{n} must be at least 2"),
                        ));
                    }
                    if let Err(e) = estimator.validate() {
                        errs.push(FieldError::new(format!("{field}.estimator"), e.to_string()));
                    }
                    if estimator.kind == crate::blindest::EstimatorKind::MomentMatching
                        && !self.prior.is_zero_mean()
                    {
                        errs.push(FieldError::new(
                            format!("{field}.estimator"),
                            "moment matching needs a zero-mean prior",
                        ));
                    }
                }
            }
        }
    }
}

/// An annotated example config, printed by `regretlab schema`.
pub const EXAMPLE_CONFIG: &str = r#"{
  "schema": 1,
  "id": "bounds-binary",
  "kind": "bounds",
  "prior": { "kind": "discrete", "atoms": [ { "prob": 0.5, "value": -1 }, { "prob": 0.5, "value": 1 } ] },
  "noise_var": 0.25,
  "a_grid": { "start": 0.5, "stop": 2.0, "step": 0.5 },
  "a_hat_rules": [
    { "rule": "relative-offset", "epsilon": 0.01 },
    { "rule": "fixed-offset", "delta": -0.001 },
    { "rule": "from-estimator", "estimator": { "kind": "numerical-mle" }, "n": 1000 }
  ],
  "trials": 1,
  "seed": 7,
  "quadrature": { "method": "adaptive-simpson", "rel_tol": 1e-9 },
  "pointwise_points": 25,
  "output": { "csv": "bounds.csv" }
}"#;

/// Field reference printed with usage errors.
pub const SCHEMA_HELP: &str = "\
config fields (JSON):
  schema            1 (required)
  id                free-text experiment id (default \"experiment\")
  kind              tradeoff | fig2 | bounds | efficiency | regret-sweep
  prior             {kind: gaussian, mean, var}
                    {kind: gaussian-mixture, components: [{weight, mean, var}, ...]}
                    {kind: discrete, atoms: [{prob, value}, ...]}
  noise_var         noise variance > 0
  a_grid            [a, ...] or {start, stop, step}, all gains > 0
  a_hat_rules       [{rule: fixed-offset, delta} | {rule: relative-offset, epsilon}
                     | {rule: from-estimator, estimator: {kind: moment-matching | numerical-mle,
                        bracket?: [lo, hi], tol?}, n}]
                    required by bounds, regret-sweep and efficiency (from-estimator only);
                    not allowed for tradeoff and fig2
  trials            Monte Carlo trials per row (efficiency; default 1)
  seed              u64 (default 0)
  quadrature        {method: adaptive-simpson (default) | gauss-hermite, rel_tol, abs_tol,
                     max_subdivisions, gh_order (2..=150), tail_sigmas}
  pointwise_points  outputs per row for the pointwise bound check (bounds; default 25)
  output            {csv?: path, json?: path}
";
