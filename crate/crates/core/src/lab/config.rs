//! Experiment configuration: TOML ingestion with per-field validation.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{HolonomySign, Representation, SpectraError};

/// One problem with one configuration field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("invalid config:\n{}", list(.0))]
    Fields(Vec<FieldError>),
    #[error(transparent)]
    Representation(#[from] SpectraError),
}

fn list(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    /// Names of the offending fields, when the error is a validation error.
    pub fn fields(&self) -> Vec<&str> {
        match self {
            ConfigError::Fields(v) => v.iter().map(|e| e.field.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

/// Generators given inline (row-major rows per matrix) or in a TOML file
/// with a `generators` array, relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

/// Estimation knobs with defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    /// Outward dilation of the hull of all Jordan directions.
    #[serde(default = "default_dilation")]
    pub cone_dilation: f64,
    /// Minimum word length of the directions used for the growth model;
    /// `0` picks half the maximal length.
    #[serde(default)]
    pub cone_min_length: usize,
    /// Half-angle of the directional counting cones, radians.
    #[serde(default = "default_aperture")]
    pub aperture: f64,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_critical_tol")]
    pub critical_tol: f64,
}

fn default_dilation() -> f64 {
    1.05
}
fn default_aperture() -> f64 {
    0.15
}
fn default_gap_tol() -> f64 {
    crate::spectra::DEFAULT_GAP_TOL
}
fn default_critical_tol() -> f64 {
    1e-6
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            cone_dilation: default_dilation(),
            cone_min_length: 0,
            aperture: default_aperture(),
            gap_tol: default_gap_tol(),
            critical_tol: default_critical_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub max_word_length: usize,
    pub shard_count: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
    pub phi_rows: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// Holonomy patterns, one sign string per representation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    pub representations: Vec<RepresentationSpec>,
}

/// Mirror of [`ExperimentConfig`] with every field optional, so missing
/// fields can be reported together.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    max_word_length: Option<usize>,
    shard_count: Option<usize>,
    seed: Option<u64>,
    cache_dir: Option<String>,
    phi_rows: Option<Vec<Vec<f64>>>,
    r: Option<Vec<f64>>,
    epsilon: Option<Vec<f64>>,
    t_grid: Option<Vec<f64>>,
    theta: Option<Vec<Vec<String>>>,
    analysis: Option<AnalysisSettings>,
    representations: Option<Vec<RepresentationSpec>>,
}

#[derive(Deserialize)]
struct GeneratorFile {
    generators: Vec<Vec<Vec<f64>>>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut errors = Vec::new();
        let mut need = |name: &str, present: bool| {
            if !present {
                errors.push(FieldError {
                    field: name.into(),
                    message: "missing".into(),
                });
            }
        };
        need("name", raw.name.is_some());
        need("max_word_length", raw.max_word_length.is_some());
        need("phi_rows", raw.phi_rows.is_some());
        need("r", raw.r.is_some());
        need("epsilon", raw.epsilon.is_some());
        need("t_grid", raw.t_grid.is_some());
        need("representations", raw.representations.is_some());
        if !errors.is_empty() {
            return Err(ConfigError::Fields(errors));
        }
        let cfg = ExperimentConfig {
            name: raw.name.unwrap_or_default(),
            max_word_length: raw.max_word_length.unwrap_or_default(),
            shard_count: raw.shard_count.unwrap_or(1),
            seed: raw.seed.unwrap_or(0),
            cache_dir: raw.cache_dir,
            phi_rows: raw.phi_rows.unwrap_or_default(),
            r: raw.r.unwrap_or_default(),
            epsilon: raw.epsilon.unwrap_or_default(),
            t_grid: raw.t_grid.unwrap_or_default(),
            theta: raw.theta,
            analysis: raw.analysis.unwrap_or_default(),
            representations: raw.representations.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    /// Structural checks that do not need the generator matrices.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut bad = |field: &str, message: String| {
            errors.push(FieldError {
                field: field.into(),
                message,
            })
        };
        if self.max_word_length == 0 {
            bad("max_word_length", "must be at least 1".into());
        }
        if self.shard_count == 0 {
            bad("shard_count", "must be at least 1".into());
        }
        let d = self.phi_rows.len();
        if d == 0 {
            bad("phi_rows", "needs at least one row".into());
        }
        if self.phi_rows.iter().any(|r| r.len() != self.phi_rows[0].len()) {
            bad("phi_rows", "rows have different lengths".into());
        }
        if self.r.len() != d {
            bad("r", format!("has {} entries but phi_rows has {d} rows", self.r.len()));
        }
        if self.epsilon.len() != d {
            bad(
                "epsilon",
                format!("has {} entries but phi_rows has {d} rows", self.epsilon.len()),
            );
        } else if self.epsilon.iter().any(|&e| !(e > 0.0)) {
            bad("epsilon", "entries must be positive".into());
        }
        if self.t_grid.is_empty() {
            bad("t_grid", "is empty".into());
        } else if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            bad("t_grid", "must be strictly increasing".into());
        }
        if self.representations.is_empty() {
            bad("representations", "needs at least one representation".into());
        }
        for (i, rep) in self.representations.iter().enumerate() {
            if rep.generators.is_some() == rep.file.is_some() {
                bad(
                    &format!("representations[{i}]"),
                    "give exactly one of `generators` or `file`".into(),
                );
            }
        }
        if let Some(theta) = &self.theta {
            for (i, pattern) in theta.iter().enumerate() {
                if pattern.len() != self.representations.len() {
                    bad(
                        &format!("theta[{i}]"),
                        format!("needs one sign string per representation ({})", self.representations.len()),
                    );
                }
                if pattern.iter().any(|p| HolonomySign::parse(p).is_none()) {
                    bad(&format!("theta[{i}]"), "sign strings use only `+` and `-`".into());
                }
            }
        }
        let a = &self.analysis;
        if !(a.cone_dilation >= 1.0) {
            bad("analysis.cone_dilation", "must be at least 1".into());
        }
        if !(a.aperture > 0.0) {
            bad("analysis.aperture", "must be positive".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Fields(errors))
        }
    }

    /// Builds the representations, resolving files against `base_dir`.
    pub fn representations(&self, base_dir: &Path) -> Result<Vec<Representation>, ConfigError> {
        let mut out = Vec::with_capacity(self.representations.len());
        for (i, spec) in self.representations.iter().enumerate() {
            let gens = match (&spec.generators, &spec.file) {
                (Some(g), None) => g.clone(),
                (None, Some(f)) => {
                    let path = base_dir.join(f);
                    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    let parsed: GeneratorFile =
                        toml::from_str(&text).map_err(|e| ConfigError::Syntax(format!("{}: {e}", path.display())))?;
                    parsed.generators
                }
                _ => {
                    return Err(ConfigError::Fields(vec![FieldError {
                        field: format!("representations[{i}]"),
                        message: "give exactly one of `generators` or `file`".into(),
                    }]))
                }
            };
            let mats = gens
                .iter()
                .enumerate()
                .map(|(j, rows)| {
                    let n = rows.len();
                    if n == 0 || rows.iter().any(|r| r.len() != n) {
                        return Err(ConfigError::Fields(vec![FieldError {
                            field: format!("representations[{i}].generators[{j}]"),
                            message: "must be a square matrix given by rows".into(),
                        }]));
                    }
                    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(Representation::new(spec.name.clone(), mats)?);
        }
        Ok(out)
    }

    /// Parsed Θ patterns.
    pub fn theta_patterns(&self) -> Option<Vec<Vec<HolonomySign>>> {
        self.theta.as_ref().map(|t| {
            t.iter()
                .map(|p| p.iter().filter_map(|s| HolonomySign::parse(s)).collect())
                .collect()
        })
    }

    /// Multiplies `φ` rows and `ε` by `factors` (`r` unchanged).
    pub fn with_scaled_rows(&self, factors: &[f64]) -> Self {
        let mut out = self.clone();
        for ((row, eps), &f) in out.phi_rows.iter_mut().zip(out.epsilon.iter_mut()).zip(factors) {
            for x in row.iter_mut() {
                *x *= f;
            }
            *eps *= f;
        }
        out
    }
}

/// Bundled configurations, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("schottky-pair", include_str!("../../configs/schottky-pair.toml")),
    ("sl3-gaps", include_str!("../../configs/sl3-gaps.toml")),
    ("sl2-sl3-tube", include_str!("../../configs/sl2-sl3-tube.toml")),
    ("sl3-hilbert", include_str!("../../configs/sl3-hilbert.toml")),
];

pub fn bundled(name: &str) -> Option<ExperimentConfig> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ExperimentConfig::from_toml_str(text).expect("bundled configs are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_round_trip() {
        for (name, _) in BUNDLED {
            let cfg = bundled(name).unwrap();
            let text = cfg.to_toml_string();
            assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
            assert!(cfg.representations(Path::new(".")).is_ok());
        }
    }

    #[test]
    fn missing_fields_are_named() {
        let cfg = bundled("schottky-pair").unwrap();
        let mut table: toml::Table = toml::from_str(&cfg.to_toml_string()).unwrap();
        table.remove("epsilon");
        table.remove("t_grid");
        let err = ExperimentConfig::from_toml_str(&toml::to_string(&table).unwrap()).unwrap_err();
        assert_eq!(err.fields(), vec!["epsilon", "t_grid"]);
    }
}
