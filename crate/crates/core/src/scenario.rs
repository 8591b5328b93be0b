//! Scenario files: a JSON tree describing the metric, measure, grid,
//! equation, run settings, estimate constants and the checks to perform.
//!
//! Estimate constants accept the string `"auto"` in place of a number; the
//! runner then measures or derives them from the computed solution.

use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::geometry::MeasureSpec;
use crate::grid::GridChart;
use crate::metric::MetricSpec;
use crate::pde::{Boundary, PdeCoefficients, Scheme, SolveConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// A constant given explicitly or left for the runner to resolve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    Auto(AutoTag),
}

impl Default for Setting {
    fn default() -> Self {
        Setting::Auto(AutoTag::Auto)
    }
}

impl Setting {
    pub fn value(&self) -> Option<f64> {
        match self {
            Setting::Value(v) => Some(*v),
            Setting::Auto(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Lemma32,
    Evolution,
    Liyau,
    Harnack,
    Apriori,
    CurvatureScan,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] =
        [CheckKind::Lemma32, CheckKind::Evolution, CheckKind::Liyau, CheckKind::Harnack, CheckKind::Apriori, CheckKind::CurvatureScan];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Lemma32 => "lemma32",
            CheckKind::Evolution => "evolution",
            CheckKind::Liyau => "liyau",
            CheckKind::Harnack => "harnack",
            CheckKind::Apriori => "apriori",
            CheckKind::CurvatureScan => "curvature-scan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            FinslerError::Config(format!(
                "unknown check `{s}`; expected one of lemma32, evolution, liyau, harnack, apriori, curvature-scan"
            ))
        })
    }

    /// Checks that scan a time series.
    pub fn needs_evolution(&self) -> bool {
        matches!(self, CheckKind::Lemma32 | CheckKind::Evolution | CheckKind::Liyau | CheckKind::Harnack)
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(Self::parse).collect()
    }
}

/// Time-dependent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSettings {
    /// Time at which the initial data is sampled.
    #[serde(default)]
    pub t0: f64,
    pub dt: f64,
    /// Duration of the run.
    pub t_final: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub boundary: Boundary,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Start time of the solution; estimates use `t − time_origin`.
    #[serde(default)]
    pub time_origin: f64,
    /// Only every `frame_stride`-th frame is scanned by the inequality checks.
    #[serde(default = "default_one")]
    pub frame_stride: usize,
    /// Stride of the exported solution frames.
    #[serde(default = "default_field_stride")]
    pub field_stride: usize,
}

impl EvolutionSettings {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig::new(self.dt, self.t_final, self.scheme, self.boundary.clone())
    }
}

/// Stationary solve of `Δu + 2u log u + V u = 0` with `V = b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationarySettings {
    #[serde(default = "default_stationary_tol")]
    pub tol: f64,
    #[serde(default = "default_stationary_iter")]
    pub max_iter: usize,
    #[serde(default = "default_reflecting")]
    pub boundary: Boundary,
    #[serde(default = "default_order")]
    pub order: usize,
}

/// Estimate constants, each explicit or `"auto"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSettings {
    /// Centre of the ball; defaults to the centre of the grid.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    /// Radius `R` of the ball.
    pub radius: f64,
    #[serde(default)]
    pub n_eff: Setting,
    #[serde(default)]
    pub k: Setting,
    #[serde(default)]
    pub k2r: Setting,
    #[serde(default)]
    pub k0: Setting,
    #[serde(default)]
    pub a_const: Setting,
    #[serde(default)]
    pub d: Setting,
    #[serde(default)]
    pub e: Setting,
    #[serde(default)]
    pub c1: Setting,
    #[serde(default)]
    pub c2: Setting,
    #[serde(default)]
    pub c_n_alpha: Setting,
    #[serde(default)]
    pub c0: Setting,
    #[serde(default)]
    pub alpha: Setting,
    #[serde(default)]
    pub b: Setting,
}

/// Sampling density of curvature scans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    #[serde(default = "default_scan_points")]
    pub points_per_axis: usize,
    #[serde(default = "default_scan_dirs")]
    pub directions: usize,
    #[serde(default = "default_scan_tol")]
    pub tol: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings { points_per_axis: default_scan_points(), directions: default_scan_dirs(), tol: default_scan_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub metric: MetricSpec,
    #[serde(default = "default_measure")]
    pub measure: MeasureSpec,
    pub grid: GridChart,
    #[serde(default = "PdeCoefficients::zero")]
    pub coefficients: PdeCoefficients,
    /// Initial data `u(x, t0)`, or the starting guess of a stationary solve.
    pub initial: Expr,
    #[serde(default)]
    pub evolution: Option<EvolutionSettings>,
    #[serde(default)]
    pub stationary: Option<StationarySettings>,
    pub estimate: EstimateSettings,
    pub checks: Vec<CheckKind>,
    /// Checks whose failure does not make the run fail.
    #[serde(default)]
    pub expected_fail: Vec<CheckKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pairs")]
    pub harnack_pairs: usize,
    #[serde(default)]
    pub scan: ScanSettings,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_scheme() -> Scheme {
    Scheme::SemiImplicit
}
fn default_order() -> usize {
    2
}
fn default_one() -> usize {
    1
}
fn default_field_stride() -> usize {
    10
}
fn default_stationary_tol() -> f64 {
    1e-10
}
fn default_stationary_iter() -> usize {
    50
}
fn default_reflecting() -> Boundary {
    Boundary::Reflecting
}
fn default_scan_points() -> usize {
    5
}
fn default_scan_dirs() -> usize {
    8
}
fn default_scan_tol() -> f64 {
    1e-6
}
fn default_measure() -> MeasureSpec {
    MeasureSpec::Lebesgue
}
fn default_pairs() -> usize {
    10
}

impl Scenario {
    /// Parse from JSON text; errors carry `line:column`.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| FinslerError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FinslerError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(FinslerError::Config(s));
        self.metric.validate()?;
        self.grid.validate()?;
        let n = self.metric.dim();
        if self.grid.dim() != n {
            return bad(format!("grid has dimension {} but the metric has dimension {n}", self.grid.dim()));
        }
        for (what, e) in [("coefficient a", &self.coefficients.a), ("coefficient b", &self.coefficients.b), ("initial data", &self.initial)]
        {
            if e.max_coord() > n {
                return bad(format!("{what} `{}` uses x{} in dimension {n}", e.source(), e.max_coord()));
            }
        }
        if self.checks.is_empty() {
            return bad("no checks requested".into());
        }
        if self.checks.iter().any(|c| c.needs_evolution()) && self.evolution.is_none() {
            return bad("time-series checks need an `evolution` block".into());
        }
        if self.checks.contains(&CheckKind::Apriori) && self.stationary.is_none() {
            return bad("the apriori check needs a `stationary` block".into());
        }
        if let Some(ev) = &self.evolution {
            ev.solve_config().steps()?;
            if ev.order != 2 && ev.order != 4 {
                return bad(format!("stencil order must be 2 or 4, got {}", ev.order));
            }
            if ev.t0 < ev.time_origin {
                return bad("t0 must not precede time_origin".into());
            }
        }
        if !(self.estimate.radius > 0.0) {
            return bad("estimate.radius must be positive".into());
        }
        if let Some(c) = &self.estimate.center {
            if c.len() != n {
                return bad(format!("estimate.center has {} coordinates, expected {n}", c.len()));
            }
        }
        Ok(())
    }

    /// Centre of the estimate ball.
    pub fn center(&self) -> Vec<f64> {
        self.estimate.center.clone().unwrap_or_else(|| self.grid.lo.iter().zip(&self.grid.hi).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    /// The scenario with the grid refined `k` times and the step scaled so
    /// that `dt/h²` is unchanged.
    pub fn refined(&self, k: u32) -> Scenario {
        let mut s = self.clone();
        if k == 0 {
            return s;
        }
        s.grid = self.grid.refine(k);
        if let Some(ev) = &mut s.evolution {
            let f = 4f64.powi(k as i32);
            ev.dt /= f;
            ev.frame_stride *= 1 << k;
            ev.field_stride *= 1 << (2 * k);
        }
        s
    }
}
