//! End-to-end experiments: configuration, analysis of the class sample,
//! counting in boxes and truncations, exponent fits and reports.

pub mod config;
pub mod count;
pub mod report;

use std::path::Path;

use nalgebra::DVector;
use thiserror::Error;

use crate::asymptotics::AsymptoticError;
use crate::cache::{Cache, CacheError};
use crate::chamber::ChamberSpace;
use crate::cone::{
    estimate_delta, estimate_limit_cone, properness_margin, ConeError, GrowthIndicatorEstimate,
    GrowthSettings, LimitConeEstimate, LinearFunctional, LinearMapPhi,
};
use crate::critical::{
    sup_value_bound_check, BoundReport, CriticalError, CriticalVectorProblem, CriticalVectorResult,
};
use crate::hypertube::{build_from_box_family, BoxDecomposition, BoxFamily, TubeError};
use crate::polyhedral::{GeometryError, PolyCone};
use crate::spectra::{Representation, SpectraError, SpectrumSample};
use crate::word::{GeneratorAlphabet, WordError};

pub use config::{ConfigError, ExperimentConfig, FieldError};
pub use count::{
    fit_exponent, CountKind, CountRecord, CountSeries, ExceptionalElement, FitResult, KindCounts,
    SeriesPoint,
};
pub use report::{compare_to_prediction, emit_report, HolonomyGroup, PredictionComparison};

/// Slack on the per-factor upper bound for the critical value.
pub const BOUND_SLACK: f64 = 0.05;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error(transparent)]
    Tube(#[from] TubeError),
    #[error(transparent)]
    Asymptotic(#[from] AsymptoticError),
    #[error("φ is not proper on the estimated limit cone (margin {0:.3e})")]
    NotProper(f64),
    #[error("enumeration produced no loxodromic classes")]
    EmptyEnumeration,
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Inputs of an experiment with the class sample loaded.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub reps: Vec<Representation>,
    pub alphabet: GeneratorAlphabet,
    pub space: ChamberSpace,
    pub phi: LinearMapPhi,
    pub family: BoxFamily,
    pub sample: SpectrumSample,
}

impl Experiment {
    /// Builds the representations (files relative to `base_dir`) and the
    /// class sample, through `cache` when given.
    pub fn prepare(
        config: ExperimentConfig,
        base_dir: &Path,
        cache: Option<&Cache>,
    ) -> Result<Self, LabError> {
        config.validate()?;
        let reps = config.representations(base_dir)?;
        let rank = reps[0].rank();
        let alphabet = GeneratorAlphabet::standard(rank)?;
        let dims: Vec<usize> = reps.iter().map(Representation::dimension).collect();
        let space = ChamberSpace::special_linear(&dims)?;
        let ambient = space.ambient_dim();
        if config.phi_rows.iter().any(|r| r.len() != ambient) {
            return Err(ConfigError::Fields(vec![FieldError {
                field: "phi_rows".into(),
                message: format!("rows must have {ambient} entries (sum of representation dimensions)"),
            }])
            .into());
        }
        let phi = LinearMapPhi::from_rows(config.phi_rows.clone())?;
        let family = BoxFamily::new(phi.clone(), config.r.clone(), config.epsilon.clone())?;
        let (l, shards, gap) = (config.max_word_length, config.shard_count, config.analysis.gap_tol);
        let sample = match cache {
            Some(c) => c.class_sample(&reps, &alphabet, l, shards, gap)?,
            None => SpectrumSample::for_classes(&reps, &alphabet, l, shards, gap)?,
        };
        if sample.loxodromic_entries().next().is_none() {
            return Err(LabError::EmptyEnumeration);
        }
        Ok(Self {
            config,
            reps,
            alphabet,
            space,
            phi,
            family,
            sample,
        })
    }

    /// Same group and sample with `φ` rows and `ε` multiplied by `factors`.
    pub fn with_scaled_rows(&self, factors: &[f64]) -> Result<Self, LabError> {
        let config = self.config.with_scaled_rows(factors);
        let phi = LinearMapPhi::from_rows(config.phi_rows.clone())?;
        let family = BoxFamily::new(phi.clone(), config.r.clone(), config.epsilon.clone())?;
        Ok(Self {
            config,
            phi,
            family,
            ..self.clone()
        })
    }

    /// Rows of `φ` and `ε` multiplied by `δ̂_i r_i`, so every `δ̂_i r_i`
    /// becomes one; the grid is multiplied by the geometric mean factor to
    /// cover the same range of projections.
    pub fn with_equalized_rates(&self, factor_deltas: &[f64]) -> Result<Self, LabError> {
        let factors: Vec<f64> = factor_deltas.iter().zip(&self.config.r).map(|(d, r)| d * r).collect();
        let mut out = self.with_scaled_rows(&factors)?;
        let mean = (factors.iter().map(|f| f.ln()).sum::<f64>() / factors.len() as f64).exp();
        for t in &mut out.config.t_grid {
            *t *= mean;
        }
        Ok(out)
    }

    pub fn growth_settings(&self) -> GrowthSettings {
        GrowthSettings {
            aperture: self.config.analysis.aperture,
            ..GrowthSettings::default()
        }
    }

    /// Minimum word length of the directions feeding the growth model.
    pub fn model_min_length(&self) -> usize {
        match self.config.analysis.cone_min_length {
            0 => (self.config.max_word_length / 2).max(1),
            n => n,
        }
    }

    /// Limit cone, growth model, critical vector, box decomposition and
    /// per-factor exponents.
    pub fn analyze(&self) -> Result<Analysis, LabError> {
        let settings = self.growth_settings();
        let full_cone = estimate_limit_cone(&self.sample, &self.space, 1)?;
        let margin = properness_margin(&self.phi, &self.space, full_cone.hull())?;
        if margin <= 1e-9 {
            return Err(LabError::NotProper(margin));
        }
        let model_cone = estimate_limit_cone(&self.sample, &self.space, self.model_min_length())?;
        let working_cone = full_cone.working_cone(self.config.analysis.cone_dilation)?;
        let growth = GrowthIndicatorEstimate::fit(&self.sample, &model_cone, &settings)?;
        let critical = CriticalVectorProblem::new(
            &growth,
            &self.space,
            &self.phi,
            &self.config.r,
            model_cone.hull(),
        )?
        .solve(self.config.analysis.critical_tol)?;
        let psi_v = rowspace_tangent(&self.phi, &self.space, &critical)?;
        let decomposition = build_from_box_family(
            &self.family,
            &self.space,
            &critical.v_star,
            &psi_v,
            &working_cone,
            1e-6,
        )?;
        let factor_deltas = self
            .phi
            .rows()
            .iter()
            .map(|row| estimate_delta(&self.sample, row, &settings))
            .collect::<Result<Vec<_>, _>>()?;
        let bound = sup_value_bound_check(critical.value, &factor_deltas, &self.config.r, BOUND_SLACK);
        Ok(Analysis {
            full_cone,
            model_cone,
            working_cone,
            properness_margin: margin,
            growth,
            critical,
            psi_v,
            decomposition,
            factor_deltas,
            bound,
        })
    }
}

/// Tangent form at `v⋆` projected onto the row space of `φ`, rescaled to
/// agree with the model value at `v⋆`.
fn rowspace_tangent(
    phi: &LinearMapPhi,
    space: &ChamberSpace,
    critical: &CriticalVectorResult,
) -> Result<LinearFunctional, LabError> {
    let m = phi.intrinsic(space)?;
    let t = &critical.tangent_intrinsic;
    let coef = (&m * m.transpose())
        .lu()
        .solve(&(&m * t))
        .ok_or_else(|| LabError::Insufficient("φ rows are dependent".into()))?;
    let mut projected: DVector<f64> = m.transpose() * coef;
    let at_v = projected.dot(&critical.v_intrinsic);
    if at_v <= 0.0 {
        return Err(LabError::Insufficient(
            "projected tangent form is not positive at the critical vector".into(),
        ));
    }
    projected *= critical.value / at_v;
    Ok(LinearFunctional::new(space.functional_to_ambient(&projected))?)
}

/// Geometric estimates derived from the class sample.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// Hull of every loxodromic Jordan direction.
    pub full_cone: LimitConeEstimate,
    /// Hull of the late directions the growth model is fitted on.
    pub model_cone: LimitConeEstimate,
    /// Dilated full hull used as the cone `C` of the hypertube.
    pub working_cone: PolyCone,
    pub properness_margin: f64,
    pub growth: GrowthIndicatorEstimate,
    pub critical: CriticalVectorResult,
    /// Tangent form used for the decomposition (ambient).
    pub psi_v: LinearFunctional,
    pub decomposition: BoxDecomposition,
    /// `δ̂_i` of each row of `φ`.
    pub factor_deltas: Vec<f64>,
    pub bound: BoundReport,
}
