//! JSON model documents. Floats are written in shortest round-trip form, so
//! load followed by save reproduces the file byte for byte.

use hetcr::cohort::Standardization;
use hetcr::estimation::ErrorBars;
use hetcr::{BaseHazard, GaussianFrailtyModel, LatentClassModel, TimeGrid};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Latent,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    /// `L`; 0 for the Gaussian model.
    pub classes: usize,
    pub k: usize,
    pub risks: usize,
    pub covariates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentParams {
    pub weights: Vec<f64>,
    /// `[class][risk 0..=R][μ]`, μ = 0 is the frailty.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub free_censoring: bool,
    pub reference_class: usize,
    /// The same coefficients against raw (un-normalised) covariates; written
    /// for reading only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients_raw_scale: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    /// `[risk 1..=R][μ]`.
    pub means: Vec<Vec<f64>>,
    /// Row-major `(p + 1)R` square matrix.
    pub covariance: Vec<Vec<f64>>,
    pub mc_samples: usize,
    pub use_lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMeta {
    pub psi: f64,
    pub loglik: f64,
    pub n_par: usize,
    pub seed: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBarsFile {
    pub names: Vec<String>,
    /// `null` where the curvature is singular in that direction.
    pub sigma: Vec<Option<f64>>,
    /// `null` when infinite.
    pub condition_number: Option<f64>,
    pub min_eigenvalue: f64,
}

impl From<&ErrorBars> for ErrorBarsFile {
    fn from(e: &ErrorBars) -> Self {
        ErrorBarsFile {
            names: e.names.clone(),
            sigma: e.sigma.clone(),
            condition_number: e.condition_number.is_finite().then_some(e.condition_number),
            min_eigenvalue: e.min_eigenvalue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub dims: Dims,
    /// Interval spanned by the base-hazard knots.
    pub time_bounds: [f64; 2],
    pub covariate_names: Vec<String>,
    /// `(mean, sd)` per covariate when the model was fitted on normalised
    /// covariates.
    pub normalization: Option<Vec<Standardization>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianParams>,
    /// Knot values per risk `0..=R`.
    pub knots: Vec<Vec<f64>>,
    pub fit: Option<FitMeta>,
    pub error_bars: Option<ErrorBarsFile>,
}

/// A loaded, validated model.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Latent(LatentClassModel),
    Gaussian(GaussianFrailtyModel),
}

impl ModelFile {
    pub fn from_latent(
        model: &LatentClassModel,
        covariate_names: Vec<String>,
        normalization: Option<Vec<Standardization>>,
    ) -> Self {
        let grid = model.grid();
        ModelFile {
            kind: ModelKind::Latent,
            dims: Dims {
                classes: model.n_classes(),
                k: grid.k,
                risks: model.n_risks(),
                covariates: model.n_covariates(),
            },
            time_bounds: [grid.t_min, grid.t_max],
            covariate_names,
            latent: Some(LatentParams {
                weights: model.weights.clone(),
                coefficients: model.coefficient_tensor(),
                free_censoring: model.free_censoring,
                reference_class: model.reference_class,
                coefficients_raw_scale: normalization.as_ref().map(|maps| model.coefficients_on_raw_scale(maps)),
            }),
            normalization,
            gaussian: None,
            knots: model.base_hazards.iter().map(|h| h.knots.clone()).collect(),
            fit: None,
            error_bars: None,
        }
    }

    pub fn from_gaussian(
        model: &GaussianFrailtyModel,
        covariate_names: Vec<String>,
        normalization: Option<Vec<Standardization>>,
    ) -> Self {
        let grid = model.grid();
        let c = &model.covariance;
        ModelFile {
            kind: ModelKind::Gaussian,
            dims: Dims { classes: 0, k: grid.k, risks: model.n_risks(), covariates: model.n_covariates() },
            time_bounds: [grid.t_min, grid.t_max],
            covariate_names,
            normalization,
            latent: None,
            gaussian: Some(GaussianParams {
                means: (1..=model.n_risks()).map(|r| model.mean(r).to_vec()).collect(),
                covariance: (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect(),
                mc_samples: model.mc_samples,
                use_lower_bound: model.use_lower_bound,
            }),
            knots: model.base_hazards.iter().map(|h| h.knots.clone()).collect(),
            fit: None,
            error_bars: None,
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        crate::output::to_json(self)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("model file: {e}")))
    }

    pub fn read(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read model file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn hazards(&self) -> CliResult<Vec<BaseHazard>> {
        let grid = TimeGrid::new(self.time_bounds[0], self.time_bounds[1], self.dims.k)?;
        if self.knots.len() != self.dims.risks + 1 {
            return Err(CliError::usage(format!("model file has knots for {} risks, expected {}", self.knots.len(), self.dims.risks + 1)));
        }
        Ok(self.knots.iter().map(|k| BaseHazard::new(grid, k.clone())).collect::<hetcr::Result<_>>()?)
    }

    /// Rebuilds and validates the model.
    pub fn model(&self) -> CliResult<LoadedModel> {
        if self.covariate_names.len() != self.dims.covariates {
            return Err(CliError::usage("covariate_names does not match dims.covariates"));
        }
        if let Some(maps) = &self.normalization {
            if maps.len() != self.dims.covariates {
                return Err(CliError::usage("normalization does not match dims.covariates"));
            }
        }
        let hazards = self.hazards()?;
        match (self.kind, &self.latent, &self.gaussian) {
            (ModelKind::Latent, Some(p), None) => {
                if p.coefficients.len() != self.dims.classes {
                    return Err(CliError::usage("coefficients do not match dims.classes"));
                }
                let mut true_risks = Vec::with_capacity(p.coefficients.len());
                for per_risk in &p.coefficients {
                    if per_risk.len() != self.dims.risks + 1 {
                        return Err(CliError::usage("coefficients must list risks 0..=R for every class"));
                    }
                    true_risks.push(per_risk[1..].to_vec());
                }
                let mut m = LatentClassModel::new(p.weights.clone(), true_risks, hazards)?;
                if m.n_covariates() != self.dims.covariates {
                    return Err(CliError::usage("coefficient vectors do not match dims.covariates"));
                }
                m.free_censoring = p.free_censoring;
                m.reference_class = p.reference_class;
                for (l, per_risk) in p.coefficients.iter().enumerate() {
                    if per_risk[0].len() != self.dims.covariates + 1 {
                        return Err(CliError::usage("censoring coefficients have the wrong length"));
                    }
                    m.beta_mut(l, 0).copy_from_slice(&per_risk[0]);
                }
                m.validate()?;
                Ok(LoadedModel::Latent(m))
            }
            (ModelKind::Gaussian, None, Some(p)) => {
                let d = p.covariance.len();
                if p.covariance.iter().any(|row| row.len() != d) {
                    return Err(CliError::usage("covariance must be square"));
                }
                let flat: Vec<f64> = p.covariance.iter().flatten().copied().collect();
                let c = DMatrix::from_row_slice(d, d, &flat);
                let mut m = GaussianFrailtyModel::new(p.means.clone(), c, hazards)?;
                m.mc_samples = p.mc_samples;
                m.use_lower_bound = p.use_lower_bound;
                m.validate()?;
                if m.n_covariates() != self.dims.covariates || m.n_risks() != self.dims.risks {
                    return Err(CliError::usage("means do not match dims"));
                }
                Ok(LoadedModel::Gaussian(m))
            }
            _ => Err(CliError::usage("model file must carry exactly the parameter block named by `kind`")),
        }
    }

    /// Rewrites the file from its own model, which must not change it.
    pub fn normalized_copy(&self) -> CliResult<Self> {
        let mut out = match self.model()? {
            LoadedModel::Latent(m) => Self::from_latent(&m, self.covariate_names.clone(), self.normalization.clone()),
            LoadedModel::Gaussian(m) => Self::from_gaussian(&m, self.covariate_names.clone(), self.normalization.clone()),
        };
        out.fit = self.fit.clone();
        out.error_bars = self.error_bars.clone();
        Ok(out)
    }

    /// Maps raw covariates onto the scale the model was fitted on.
    pub fn model_scale(&self, raw: &[f64]) -> CliResult<Vec<f64>> {
        if raw.len() != self.dims.covariates {
            return Err(CliError::usage(format!("expected {} covariate values, got {}", self.dims.covariates, raw.len())));
        }
        Ok(match &self.normalization {
            Some(maps) => raw.iter().zip(maps).map(|(z, m)| m.apply(*z)).collect(),
            None => raw.to_vec(),
        })
    }
}
