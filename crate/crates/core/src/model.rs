//! Parametrisations of the joint distribution of individual hazards.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hazard::{BaseHazard, TimeGrid};

/// Linear predictor `β·z = β⁰ + Σ_μ βᵘ zᵘ` for a coefficient vector with the
/// frailty first.
#[inline]
pub fn linear_predictor(beta: &[f64], z: &[f64]) -> f64 {
    let mut acc = beta[0];
    for (b, x) in beta[1..].iter().zip(z) {
        acc += b * x;
    }
    acc
}

/// `L` latent classes, each with its own frailty and regression vector for
/// every risk; base hazards are shared by all classes.
///
/// Coefficients are stored for risks `0..=R`. Risk `0` (end-of-trial
/// censoring) has identically zero coefficients unless `free_censoring` is set.
/// The class `reference_class` carries zero frailty for every risk, which fixes
/// the scale redundancy between frailties and base hazards.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentClassModel {
    n_classes: usize,
    n_risks: usize,
    n_covariates: usize,
    pub weights: Vec<f64>,
    coefficients: Vec<f64>,
    /// Indexed by risk `0..=R`.
    pub base_hazards: Vec<BaseHazard>,
    pub free_censoring: bool,
    pub reference_class: usize,
}

impl LatentClassModel {
    /// `coefficients[class][risk - 1]` for the true risks, each of length
    /// `p + 1`; censoring coefficients start at zero.
    pub fn new(weights: Vec<f64>, coefficients: Vec<Vec<Vec<f64>>>, base_hazards: Vec<BaseHazard>) -> Result<Self> {
        let n_classes = weights.len();
        if n_classes == 0 || coefficients.len() != n_classes {
            return Err(Error::Dimension("one coefficient block per class is required".into()));
        }
        let n_risks = coefficients[0].len();
        let width = coefficients[0].first().map_or(1, |b| b.len());
        if width == 0 {
            return Err(Error::Dimension("coefficient vectors need a frailty entry".into()));
        }
        if base_hazards.len() != n_risks + 1 {
            return Err(Error::Dimension(format!(
                "{} base hazards for {} risks (censoring included)",
                base_hazards.len(),
                n_risks + 1
            )));
        }
        let mut model = Self::zeros(n_classes, n_risks, width - 1, base_hazards[0].grid);
        model.weights = weights;
        model.base_hazards = base_hazards;
        for (l, per_risk) in coefficients.iter().enumerate() {
            if per_risk.len() != n_risks {
                return Err(Error::Dimension(format!("class {}: expected {n_risks} risks", l + 1)));
            }
            for (r, beta) in per_risk.iter().enumerate() {
                if beta.len() != width {
                    return Err(Error::Dimension(format!("class {}, risk {}: expected {width} entries", l + 1, r + 1)));
                }
                model.beta_mut(l, r + 1).copy_from_slice(beta);
            }
        }
        Ok(model)
    }

    /// All coefficients zero, equal weights, unit base hazards.
    pub fn zeros(n_classes: usize, n_risks: usize, n_covariates: usize, grid: TimeGrid) -> Self {
        LatentClassModel {
            n_classes,
            n_risks,
            n_covariates,
            weights: vec![1.0 / n_classes as f64; n_classes],
            coefficients: vec![0.0; n_classes * (n_risks + 1) * (n_covariates + 1)],
            base_hazards: vec![BaseHazard::constant(grid, 1.0); n_risks + 1],
            free_censoring: false,
            reference_class: 0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_risks(&self) -> usize {
        self.n_risks
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.base_hazards[0].grid
    }

    #[inline]
    fn offset(&self, class: usize, risk: usize) -> usize {
        (class * (self.n_risks + 1) + risk) * (self.n_covariates + 1)
    }

    /// `β̂_r^ℓ`, frailty first; `risk = 0` is the censoring risk.
    #[inline]
    pub fn beta(&self, class: usize, risk: usize) -> &[f64] {
        let o = self.offset(class, risk);
        &self.coefficients[o..o + self.n_covariates + 1]
    }

    pub fn beta_mut(&mut self, class: usize, risk: usize) -> &mut [f64] {
        let o = self.offset(class, risk);
        let w = self.n_covariates + 1;
        &mut self.coefficients[o..o + w]
    }

    /// `β̂_r^ℓ·z` with the implicit leading covariate `1`.
    #[inline]
    pub fn linear_predictor(&self, class: usize, risk: usize, z: &[f64]) -> f64 {
        linear_predictor(self.beta(class, risk), z)
    }

    /// Checks weights, dimensions, knot signs and the identifiability gauge.
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("class weights sum to {total}")));
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w < 1.0) && self.n_classes > 1) {
            return Err(Error::invalid("class weights must lie in (0, 1)"));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coefficient"));
        }
        if self.reference_class >= self.n_classes {
            return Err(Error::invalid("reference class out of range"));
        }
        for r in 0..=self.n_risks {
            if self.beta(self.reference_class, r)[0] != 0.0 {
                return Err(Error::invalid(format!(
                    "reference class {} has nonzero frailty for risk {r}",
                    self.reference_class + 1
                )));
            }
        }
        if !self.free_censoring {
            for l in 0..self.n_classes {
                if self.beta(l, 0).iter().any(|&b| b != 0.0) {
                    return Err(Error::invalid("censoring coefficients must be zero unless free_censoring"));
                }
            }
        }
        let grid = self.grid();
        for h in &self.base_hazards {
            if h.grid != *grid {
                return Err(Error::invalid("all base hazards must share one time grid"));
            }
            BaseHazard::new(h.grid, h.knots.clone())?;
        }
        Ok(())
    }

    /// Reorders the classes: `new class j = old class perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n_classes);
        let mut out = self.clone();
        for (new, &old) in perm.iter().enumerate() {
            out.weights[new] = self.weights[old];
            for r in 0..=self.n_risks {
                out.beta_mut(new, r).copy_from_slice(self.beta(old, r));
            }
        }
        out.reference_class = perm.iter().position(|&o| o == self.reference_class).unwrap_or(0);
        out
    }

    /// Class order used in reports: descending weight, ties broken by the
    /// coefficients in lexicographic order.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_classes).collect();
        let key = |l: usize| -> Vec<f64> { (1..=self.n_risks).flat_map(|r| self.beta(l, r).to_vec()).collect() };
        order.sort_by(|&a, &b| {
            self.weights[b]
                .partial_cmp(&self.weights[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    key(a)
                        .iter()
                        .zip(key(b).iter())
                        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
                        .find(|o| *o != Ordering::Equal)
                        .unwrap_or(Ordering::Equal)
                })
        });
        order
    }

    pub fn canonicalized(&self) -> Self {
        self.permuted(&self.canonical_order())
    }

    /// Coefficients as `[class][risk]` vectors for risks `0..=R`.
    pub fn coefficient_tensor(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_classes)
            .map(|l| (0..=self.n_risks).map(|r| self.beta(l, r).to_vec()).collect())
            .collect()
    }

    /// Largest `|β̂_0^{ℓμ}|` over classes and covariates `μ ≥ 1`; zero means the
    /// censoring risk ignores covariates.
    pub fn max_censoring_regression(&self) -> f64 {
        (0..self.n_classes)
            .flat_map(|l| self.beta(l, 0)[1..].to_vec())
            .fold(0.0, |m, b| m.max(b.abs()))
    }

    /// Maps coefficients fitted on normalised covariates back to raw
    /// covariate scale: `βᵘ_raw = βᵘ / sd_μ`, `β⁰_raw = β⁰ − Σ βᵘ mean_μ / sd_μ`.
    pub fn coefficients_on_raw_scale(&self, maps: &[crate::Standardization]) -> Vec<Vec<Vec<f64>>> {
        self.coefficient_tensor()
            .into_iter()
            .map(|per_risk| {
                per_risk
                    .into_iter()
                    .map(|beta| {
                        let mut raw = beta.clone();
                        for (mu, m) in maps.iter().enumerate() {
                            raw[mu + 1] = beta[mu + 1] / m.sd;
                            raw[0] -= beta[mu + 1] * m.mean / m.sd;
                        }
                        raw
                    })
                    .collect()
            })
            .collect()
    }
}

/// Gaussian distribution of the stacked vectors `(β_1, …, β_R)` with mean
/// `means` and covariance `C` of size `(p + 1)R`; base hazards shared.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFrailtyModel {
    n_risks: usize,
    n_covariates: usize,
    /// `R × (p + 1)`, row `r - 1` is `β̂_r`.
    means: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Indexed by risk `0..=R`.
    pub base_hazards: Vec<BaseHazard>,
    pub mc_samples: usize,
    pub use_lower_bound: bool,
}

impl GaussianFrailtyModel {
    pub fn new(means: Vec<Vec<f64>>, covariance: DMatrix<f64>, base_hazards: Vec<BaseHazard>) -> Result<Self> {
        let n_risks = means.len();
        let width = means.first().map_or(0, |m| m.len());
        if n_risks == 0 || width == 0 || means.iter().any(|m| m.len() != width) {
            return Err(Error::Dimension("means must be R vectors of equal length p + 1".into()));
        }
        let dim = n_risks * width;
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(Error::Dimension(format!("covariance must be {dim} × {dim}")));
        }
        if base_hazards.len() != n_risks + 1 {
            return Err(Error::Dimension("need R + 1 base hazards".into()));
        }
        let model = GaussianFrailtyModel {
            n_risks,
            n_covariates: width - 1,
            means: means.concat(),
            covariance,
            base_hazards,
            mc_samples: 10_000,
            use_lower_bound: true,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n_risks(&self) -> usize {
        self.n_risks
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.base_hazards[0].grid
    }

    /// `β̂_r` for `r ≥ 1`.
    pub fn mean(&self, risk: usize) -> &[f64] {
        let w = self.n_covariates + 1;
        &self.means[(risk - 1) * w..risk * w]
    }

    pub fn mean_mut(&mut self, risk: usize) -> &mut [f64] {
        let w = self.n_covariates + 1;
        &mut self.means[(risk - 1) * w..risk * w]
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.covariance;
        let asym = (c - c.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(Error::invalid(format!("covariance is not symmetric (max asymmetry {asym:e})")));
        }
        let eig = SymmetricEigen::new(c.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::invalid(format!("covariance is indefinite (eigenvalue {min:e})")));
        }
        Ok(())
    }

    /// `K_{rr'}(z) = z̃·C^{rr'} z̃` with `z̃ = (1, z)`.
    pub fn k_matrix(&self, z: &[f64]) -> DMatrix<f64> {
        let w = self.n_covariates + 1;
        let mut zt = Vec::with_capacity(w);
        zt.push(1.0);
        zt.extend_from_slice(z);
        DMatrix::from_fn(self.n_risks, self.n_risks, |r, s| {
            let mut acc = 0.0;
            for (a, za) in zt.iter().enumerate() {
                for (b, zb) in zt.iter().enumerate() {
                    acc += za * self.covariance[(r * w + a, s * w + b)] * zb;
                }
            }
            acc
        })
    }
}
