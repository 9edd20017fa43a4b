//! Experiment configuration documents.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mechanisms::ModelSpec;
use crate::simulate::SimConfig;

/// Version of the configuration and report schemas written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Top-level experiment document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub simulation: SimConfig,
    #[serde(default)]
    pub analytics: AnalyticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub validation: ValidationSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: None,
            simulation: SimConfig::default(),
            analytics: AnalyticsSpec::default(),
            output: OutputSpec::default(),
            validation: ValidationSpec::default(),
        }
    }
}

/// Points at which analytic and Monte Carlo quantities are evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsSpec {
    pub lambdas: Vec<f64>,
    /// Target levels `a` of `T_a`.
    pub levels: Vec<f64>,
    /// Start points.
    pub x0s: Vec<f64>,
}

impl Default for AnalyticsSpec {
    fn default() -> Self {
        Self { lambdas: vec![0.5, 1.0, 2.0], levels: vec![0.0], x0s: vec![1.0] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    /// Write one CSV per simulated path.
    pub paths: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, formats: vec![Format::Json], paths: false }
    }
}

/// Acceptance rows to run; empty means all of them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    pub rows: Vec<RowRequest>,
}

/// A row by name, optionally with parameter overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowRequest {
    Name(String),
    WithParams {
        row: String,
        #[serde(flatten)]
        params: RowParams,
    },
}

impl RowRequest {
    pub fn name(&self) -> &str {
        match self {
            Self::Name(n) => n,
            Self::WithParams { row, .. } => row,
        }
    }

    pub fn params(&self) -> RowParams {
        match self {
            Self::Name(_) => RowParams::default(),
            Self::WithParams { params, .. } => params.clone(),
        }
    }
}

/// Overrides of a row's model and Monte Carlo settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RowParams {
    pub b: Option<f64>,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub c: Option<f64>,
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
}

/// Malformed input, with the file, position and key path when known.
#[derive(Debug)]
pub struct ConfigError {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if self.line > 0 {
            write!(f, ":{}:{}", self.line, self.column)?;
        }
        if !self.key.is_empty() && self.key != "." {
            write!(f, ": at `{}`", self.key)?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, file: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        ConfigError { file: file.into(), line: inner.line(), column: inner.column(), key, message: inner.to_string() }
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError { file: path.display().to_string(), line: 0, column: 0, key: String::new(), message: e.to_string() })
}

fn semantic(file: &str, key: &str, message: String) -> ConfigError {
    ConfigError { file: file.into(), line: 0, column: 0, key: key.into(), message }
}

/// Parse an experiment document and check it beyond its syntax.
pub fn parse_config(text: &str, file: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = parse(text, file)?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(semantic(file, "schema_version", format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", cfg.schema_version)));
    }
    if let Some(m) = &cfg.model {
        m.validate().map_err(|e| semantic(file, "model", e.to_string()))?;
    }
    cfg.simulation.validate().map_err(|e| semantic(file, "simulation", e.to_string()))?;
    let a = &cfg.analytics;
    if let Some(l) = a.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(semantic(file, "analytics.lambdas", format!("λ must be finite and non-negative, got {l}")));
    }
    if let Some(x) = a.x0s.iter().chain(&a.levels).find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(semantic(file, "analytics", format!("levels and start points must be finite and non-negative, got {x}")));
    }
    Ok(cfg)
}

/// Parse a bare model document.
pub fn parse_model(text: &str, file: &str) -> Result<ModelSpec, ConfigError> {
    let m: ModelSpec = parse(text, file)?;
    m.validate().map_err(|e| semantic(file, "", e.to_string()))?;
    Ok(m)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config(&read(path)?, &path.display().to_string())
}

pub fn load_model(path: &Path) -> Result<ModelSpec, ConfigError> {
    parse_model(&read(path)?, &path.display().to_string())
}
