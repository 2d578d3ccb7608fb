//! Declarative run configuration: one TOML file per run, with named
//! function families instead of an expression language.

use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read table {path}: {reason}")]
    Table { path: PathBuf, reason: String },
}

/// A scalar function given by a named family.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Sin,
    Monod { m: f64, ks: f64 },
    /// (2/π) atan(scale · u); limits ±1.
    AtanLl { scale: f64 },
    Poly { coeffs: Vec<f64> },
    /// u + sin(cbrt(u)).
    CubicRootShift,
    /// Two-column CSV with a strictly increasing first column.
    Tabulated { file: PathBuf },
    /// Planar linear map u -> M u.
    Linear { matrix: [[f64; 2]; 2] },
}

/// One additive term of a periodic signal.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalTerm {
    Const { value: f64 },
    Cos { amplitude: f64, harmonic: u32 },
    Sin { amplitude: f64, harmonic: u32 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GrowthSpec {
    Sublinear,
    Superlinear,
    UserBracket { a: f64, b: f64 },
    Planar { rect: RectSpec },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlocalConfig {
    pub half_length: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// u-dependent part of f(t, u).
    pub f: Option<FunctionSpec>,
    /// additive t-dependent part of f(t, u), as polynomial coefficients in t.
    pub f_t: Option<Vec<f64>>,
    /// constant planar field (dim 2).
    pub f_const: Option<[f64; 2]>,
    pub f_sup: Option<f64>,
    pub g: FunctionSpec,
    pub growth: GrowthSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_multistart")]
    pub multistart: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GClassSpec {
    Periodic { sigma: f64 },
    LandesmanLazer { g_minus: f64, g_plus: f64, window_scale: Option<f64> },
    Generic { window: [f64; 2] },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceConfig {
    pub omega: f64,
    #[serde(default)]
    pub a: f64,
    pub g: FunctionSpec,
    pub g_sup: f64,
    pub g_class: GClassSpec,
    #[serde(default)]
    pub p0: Vec<SignalTerm>,
    /// forcing mean for `solve resonance`
    pub s: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// degeneracy threshold for `scan degeneracy`
    pub degeneracy_tol: Option<f64>,
    /// perturbation and amplitudes for `experiment continuity`
    #[serde(default)]
    pub perturbation: Vec<SignalTerm>,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemostatConfig {
    pub omega: f64,
    pub tau: f64,
    pub gamma: f64,
    pub dilution: Vec<SignalTerm>,
    pub inflow: Vec<SignalTerm>,
    pub mu: FunctionSpec,
    #[serde(default = "default_x0_max")]
    pub x0_max: f64,
    pub steps_per_period: Option<usize>,
}

/// Coefficients of a quadratic map component
/// c0 + ct t + cx x + ctt t² + cxx x² + ctx t x.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadMap {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub ct: f64,
    #[serde(default)]
    pub cx: f64,
    #[serde(default)]
    pub ctt: f64,
    #[serde(default)]
    pub cxx: f64,
    #[serde(default)]
    pub ctx: f64,
}

impl QuadMap {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.c0 + self.ct * t + self.cx * x + self.ctt * t * t + self.cxx * x * x
            + self.ctx * t * x
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub phi1: QuadMap,
    pub phi2: QuadMap,
    pub bound: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckConfig {
    Wirtinger { box_radius: f64, samples: usize },
    NecSuf,
    LlLimits,
}

/// Top-level run configuration; the active section must match the
/// subcommand.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nonlocal: Option<NonlocalConfig>,
    pub resonance: Option<ResonanceConfig>,
    pub chemostat: Option<ChemostatConfig>,
    pub demo: Option<DemoConfig>,
    pub check: Option<CheckConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.into(), source: Box::new(source) })
    }
}

fn default_dim() -> usize {
    1
}

fn default_steps() -> usize {
    64
}

fn default_multistart() -> usize {
    3
}

fn default_x0_max() -> f64 {
    1e6
}

/// Read a strictly increasing two-column numeric CSV table.
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let bad = |reason: String| ConfigError::Table { path: path.into(), reason };
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("read failed: {e}")))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',');
        let parse = |cell: Option<&str>| -> Result<f64, ConfigError> {
            cell.ok_or_else(|| bad(format!("line {}: expected two columns", lineno + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))
        };
        // tolerate a non-numeric header row
        let first = cells.next();
        if lineno == 0 && first.is_some_and(|c| c.trim().parse::<f64>().is_err()) {
            continue;
        }
        xs.push(parse(first)?);
        ys.push(parse(cells.next())?);
    }
    if xs.len() < 2 {
        return Err(bad("need at least two rows".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("first column must be strictly increasing".into()));
    }
    Ok((xs, ys))
}
