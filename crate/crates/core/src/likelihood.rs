//! Data log-likelihoods and the MAP+AIC score
//! `Ψ(θ) = n_par − 𝓛(θ) − log P(θ)`.
//!
//! The latent-class log-likelihood is
//!
//! ```text
//! 𝓛 = Σ_i log λ̂_{r_i}(t_i)
//!   + Σ_i log Σ_ℓ w_ℓ exp( β̂_{r_i}^ℓ·z_i − Σ_{r=0}^R Λ̂_r(t_i) exp(β̂_r^ℓ·z_i) )
//! ```
//!
//! With the censoring coefficients fixed at zero the `r = 0` term leaves the
//! class sum and `𝓛 = 𝓛_0(ξ_0) + 𝓛_risks`, which [`censoring_loglik`] and
//! [`LatentEvaluator::risks_loglik`] compute separately.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::hazard::{BasisCache, TimeGrid};
use crate::model::{linear_predictor, GaussianFrailtyModel, LatentClassModel};
use crate::rng;

/// Which parametrisation a parameter count refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Latent,
    Gaussian,
}

/// `RL(p+1) + KR + L − 1` for latent classes,
/// `½(p+1)²R² + 3/2 (p+1)R + KR` for the Gaussian model.
pub fn n_params(kind: ModelKind, n_classes: usize, k: usize, n_risks: usize, n_covariates: usize) -> usize {
    let q = n_covariates + 1;
    match kind {
        ModelKind::Latent => n_risks * n_classes * q + k * n_risks + n_classes - 1,
        ModelKind::Gaussian => (q * q * n_risks * n_risks + 3 * q * n_risks) / 2 + k * n_risks,
    }
}

/// Prior and complexity terms of `Ψ`.
///
/// Regression and frailty coefficients get independent zero-mean Gaussian
/// priors of standard deviation `prior_sd`; base-hazard knots and class weights
/// get flat priors, which contribute nothing. Normalisation constants of the
/// Gaussian prior are dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub prior_sd: f64,
    /// Add `n_par` (AIC) to the score.
    pub aic: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig { prior_sd: 1.0, aic: true }
    }
}

impl PenaltyConfig {
    pub fn log_prior(&self, coefficients: impl IntoIterator<Item = f64>) -> f64 {
        let inv = 1.0 / (self.prior_sd * self.prior_sd);
        -0.5 * inv * coefficients.into_iter().map(|c| c * c).sum::<f64>()
    }
}

#[inline]
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Likelihood machinery bound to one cohort and one knot grid.
#[derive(Debug, Clone)]
pub struct LatentEvaluator<'a> {
    cohort: &'a Cohort,
    cache: BasisCache,
}

impl<'a> LatentEvaluator<'a> {
    pub fn new(cohort: &'a Cohort, grid: TimeGrid) -> Self {
        LatentEvaluator { cohort, cache: BasisCache::new(grid, cohort.times()) }
    }

    pub fn cohort(&self) -> &Cohort {
        self.cohort
    }

    pub fn cache(&self) -> &BasisCache {
        &self.cache
    }

    fn check(&self, model: &LatentClassModel) -> Result<()> {
        if model.n_risks() != self.cohort.n_risks() || model.n_covariates() != self.cohort.n_covariates() {
            return Err(Error::Dimension(format!(
                "model has R = {}, p = {}; cohort has R = {}, p = {}",
                model.n_risks(),
                model.n_covariates(),
                self.cohort.n_risks(),
                self.cohort.n_covariates()
            )));
        }
        if model.grid() != self.cache.grid() {
            return Err(Error::Dimension("model and evaluator use different time grids".into()));
        }
        Ok(())
    }

    /// Full `𝓛 = 𝓛_0 + 𝓛_risks`.
    pub fn loglik(&self, model: &LatentClassModel) -> Result<f64> {
        self.check(model)?;
        if model.free_censoring {
            return self.sum_terms(model, true);
        }
        Ok(censoring_loglik(&model.base_hazards[0].knots, self.cohort, &self.cache)? + self.sum_terms(model, false)?)
    }

    /// `𝓛_risks`, the part that depends on coefficients, weights and the
    /// true-risk base hazards (censoring coefficients fixed at zero).
    pub fn risks_loglik(&self, model: &LatentClassModel) -> Result<f64> {
        self.check(model)?;
        self.sum_terms(model, false)
    }

    fn sum_terms(&self, model: &LatentClassModel, with_censoring: bool) -> Result<f64> {
        let n_risks = model.n_risks();
        let n_classes = model.n_classes();
        let first_risk = if with_censoring { 0 } else { 1 };
        let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
        let mut cum = vec![0.0; n_risks + 1];
        let mut terms = vec![0.0; n_classes];
        let mut total = 0.0;
        for i in 0..self.cohort.len() {
            let z = self.cohort.covariates(i);
            let r_i = self.cohort.label(i);
            let mut contribution = 0.0;
            if with_censoring || r_i != 0 {
                contribution += self.cache.rate(i, &model.base_hazards[r_i].knots).ln();
            }
            for (r, c) in cum.iter_mut().enumerate().skip(first_risk) {
                *c = self.cache.cumulative(i, &model.base_hazards[r].knots);
            }
            for (l, term) in terms.iter_mut().enumerate() {
                let mut a = log_w[l];
                for r in first_risk..=n_risks {
                    let lp = model.linear_predictor(l, r, z);
                    if r == r_i {
                        a += lp;
                    }
                    a -= cum[r] * lp.exp();
                }
                *term = a;
            }
            contribution += log_sum_exp(&terms);
            if !contribution.is_finite() {
                return Err(Error::NonFinite(i));
            }
            total += contribution;
        }
        Ok(total)
    }

    /// `Ψ = n_par − 𝓛 − log P` for the latent-class model.
    pub fn psi(&self, model: &LatentClassModel, penalty: &PenaltyConfig) -> Result<f64> {
        let ll = self.loglik(model)?;
        Ok(psi_from_parts(model, ll, penalty))
    }
}

pub(crate) fn latent_n_par(model: &LatentClassModel) -> usize {
    n_params(ModelKind::Latent, model.n_classes(), model.grid().k, model.n_risks(), model.n_covariates())
}

/// Sum of squares over all coefficients carrying the Gaussian prior.
pub fn latent_log_prior(model: &LatentClassModel, penalty: &PenaltyConfig) -> f64 {
    let first = if model.free_censoring { 0 } else { 1 };
    let coefs = (0..model.n_classes())
        .flat_map(|l| (first..=model.n_risks()).flat_map(move |r| model.beta(l, r).to_vec()));
    penalty.log_prior(coefs)
}

pub(crate) fn psi_from_parts(model: &LatentClassModel, loglik: f64, penalty: &PenaltyConfig) -> f64 {
    let aic = if penalty.aic { latent_n_par(model) as f64 } else { 0.0 };
    aic - loglik - latent_log_prior(model, penalty)
}

/// `𝓛_0 = Σ_i δ_{0,r_i} log λ̂_0(t_i) − Σ_i Λ̂_0(t_i)`.
pub fn censoring_loglik(knots: &[f64], cohort: &Cohort, cache: &BasisCache) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..cohort.len() {
        let mut c = -cache.cumulative(i, knots);
        if cohort.label(i) == 0 {
            c += cache.rate(i, knots).ln();
        }
        if !c.is_finite() {
            return Err(Error::NonFinite(i));
        }
        total += c;
    }
    Ok(total)
}

/// Latent-class data log-likelihood.
pub fn loglik_latent(model: &LatentClassModel, cohort: &Cohort) -> Result<f64> {
    LatentEvaluator::new(cohort, *model.grid()).loglik(model)
}

pub fn psi_latent(model: &LatentClassModel, cohort: &Cohort, penalty: &PenaltyConfig) -> Result<f64> {
    LatentEvaluator::new(cohort, *model.grid()).psi(model, penalty)
}

fn check_gaussian(model: &GaussianFrailtyModel, cohort: &Cohort) -> Result<()> {
    if model.n_risks() != cohort.n_risks() || model.n_covariates() != cohort.n_covariates() {
        return Err(Error::Dimension("Gaussian model and cohort dimensions differ".into()));
    }
    Ok(())
}

/// Per-individual pieces shared by the Gaussian evaluations.
struct GaussianTerms {
    /// `log λ̂_{r_i}(t_i)` (all risks, censoring included) minus `Λ̂_0(t_i)`.
    base: f64,
    /// `Λ̂_r(t_i)` for `r = 1..=R`.
    cum: Vec<f64>,
    /// `β̂_r·z_i` for `r = 1..=R`.
    lp: Vec<f64>,
}

fn gaussian_terms(model: &GaussianFrailtyModel, cohort: &Cohort, cache: &BasisCache, i: usize) -> GaussianTerms {
    let r_i = cohort.label(i);
    let z = cohort.covariates(i);
    let base = cache.rate(i, &model.base_hazards[r_i].knots).ln() - cache.cumulative(i, &model.base_hazards[0].knots);
    let cum = (1..=model.n_risks()).map(|r| cache.cumulative(i, &model.base_hazards[r].knots)).collect();
    let lp = (1..=model.n_risks()).map(|r| linear_predictor(model.mean(r), z)).collect();
    GaussianTerms { base, cum, lp }
}

/// Closed-form Jensen lower bound on the Gaussian-model log-likelihood:
///
/// ```text
/// Σ_i log λ̂_{r_i}(t_i) − Λ̂_0(t_i) + δ̄_{0 r_i}{β̂_{r_i}·z_i + ½K_{r_i r_i}}
///     − Σ_{r'} Λ̂_{r'}(t_i) exp(β̂_{r'}·z_i + δ̄_{0 r_i} K_{r_i r'} + ½K_{r'r'})
/// ```
///
/// with `K = K(z_i)`. It is exact when `C = 0`.
pub fn loglik_gaussian_lb(model: &GaussianFrailtyModel, cohort: &Cohort) -> Result<f64> {
    check_gaussian(model, cohort)?;
    model.validate()?;
    let cache = BasisCache::new(*model.grid(), cohort.times());
    let mut total = 0.0;
    for i in 0..cohort.len() {
        let r_i = cohort.label(i);
        let k = model.k_matrix(cohort.covariates(i));
        let g = gaussian_terms(model, cohort, &cache, i);
        let mut c = g.base;
        if r_i != 0 {
            c += g.lp[r_i - 1] + 0.5 * k[(r_i - 1, r_i - 1)];
        }
        for r in 0..model.n_risks() {
            let shift = if r_i != 0 { k[(r_i - 1, r)] } else { 0.0 };
            c -= g.cum[r] * (g.lp[r] + shift + 0.5 * k[(r, r)]).exp();
        }
        if !c.is_finite() {
            return Err(Error::NonFinite(i));
        }
        total += c;
    }
    Ok(total)
}

/// Monte-Carlo estimate of the Gaussian-model log-likelihood and its
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Symmetric PSD square root by eigendecomposition; eigenvalues down to
/// `-1e-10` are clamped to zero.
pub fn psd_sqrt(k: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(k.clone());
    if eig.eigenvalues.iter().any(|&e| !e.is_finite() || e < -1e-10) {
        return None;
    }
    let roots = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|e| e.max(0.0).sqrt()));
    let v = &eig.eigenvectors;
    Some(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Evaluates the `R`-dimensional standard-normal integral of every individual
/// with the same `mc_samples` draws (common random numbers), deterministic
/// under `seed`.
pub fn loglik_gaussian_mc(model: &GaussianFrailtyModel, cohort: &Cohort, seed: u64) -> Result<McEstimate> {
    check_gaussian(model, cohort)?;
    model.validate()?;
    if model.mc_samples < 100 {
        return Err(Error::invalid("mc_samples must be at least 100"));
    }
    let n_risks = model.n_risks();
    let n_samples = model.mc_samples;
    let mut rng = rng::seeded(seed);
    let draws: Vec<f64> = (0..n_samples * n_risks).map(|_| rng.sample(StandardNormal)).collect();
    let cache = BasisCache::new(*model.grid(), cohort.times());

    let mut total = 0.0;
    // g_s = Σ_i e_is / m_i, whose sample spread gives the error of the total
    let mut g = vec![0.0; n_samples];
    let mut u = vec![0.0; n_samples];
    let mut shifted = vec![0.0; n_risks];
    for i in 0..cohort.len() {
        let r_i = cohort.label(i);
        let k = model.k_matrix(cohort.covariates(i));
        let root = psd_sqrt(&k).ok_or_else(|| Error::Numerical(format!("eigendecomposition of K(z) failed for individual {i}")))?;
        let terms = gaussian_terms(model, cohort, &cache, i);
        let mut c = terms.base;
        if r_i != 0 {
            c += terms.lp[r_i - 1] + 0.5 * k[(r_i - 1, r_i - 1)];
        }
        for r in 0..n_risks {
            let shift = if r_i != 0 { k[(r_i - 1, r)] } else { 0.0 };
            shifted[r] = terms.lp[r] + shift;
        }
        for (s, us) in u.iter_mut().enumerate() {
            let y = &draws[s * n_risks..(s + 1) * n_risks];
            let mut acc = 0.0;
            for r in 0..n_risks {
                let mut x = shifted[r];
                for (q, yq) in y.iter().enumerate() {
                    x += root[(r, q)] * yq;
                }
                acc -= terms.cum[r] * x.exp();
            }
            *us = acc;
        }
        let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_scaled = u.iter().map(|v| (v - m).exp()).sum::<f64>() / n_samples as f64;
        c += m + mean_scaled.ln();
        if !c.is_finite() {
            return Err(Error::NonFinite(i));
        }
        total += c;
        for (gs, us) in g.iter_mut().zip(&u) {
            *gs += (us - m).exp() / mean_scaled;
        }
    }
    let n = n_samples as f64;
    let mean_g = g.iter().sum::<f64>() / n;
    let var_g = g.iter().map(|x| (x - mean_g).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate { value: total, std_error: (var_g / n).sqrt() })
}

/// Coefficients carrying the Gaussian prior in the Gaussian model: the means
/// and the upper triangle of `C`.
pub fn gaussian_log_prior(model: &GaussianFrailtyModel, penalty: &PenaltyConfig) -> f64 {
    let c = &model.covariance;
    let means = (1..=model.n_risks()).flat_map(|r| model.mean(r).to_vec());
    let upper = (0..c.nrows()).flat_map(|a| (a..c.ncols()).map(move |b| c[(a, b)]));
    penalty.log_prior(means.chain(upper))
}

/// `Ψ` of the Gaussian model with the Jensen bound standing in for `𝓛`.
pub fn psi_gaussian_lb(model: &GaussianFrailtyModel, cohort: &Cohort, penalty: &PenaltyConfig) -> Result<f64> {
    let ll = loglik_gaussian_lb(model, cohort)?;
    let aic = if penalty.aic {
        n_params(ModelKind::Gaussian, 1, model.grid().k, model.n_risks(), model.n_covariates()) as f64
    } else {
        0.0
    };
    Ok(aic - ll - gaussian_log_prior(model, penalty))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::BaseHazard;

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 10.0, 1).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(n_params(ModelKind::Latent, 2, 3, 2, 3), 23);
        assert_eq!(n_params(ModelKind::Latent, 1, 3, 2, 3), 2 * 4 + 6);
        assert_eq!(n_params(ModelKind::Gaussian, 1, 1, 1, 1), 6);
    }

    #[test]
    fn single_exponential_event() {
        let lambda = 0.3;
        let t = 2.5;
        let cohort = Cohort::new(vec![vec![]], vec![t], vec![1], None).unwrap();
        let grid = TimeGrid::new(t, t, 1).unwrap();
        let model = LatentClassModel::new(
            vec![1.0],
            vec![vec![vec![0.0]]],
            vec![BaseHazard::constant(grid, 0.0), BaseHazard::constant(grid, lambda)],
        )
        .unwrap();
        // 𝓛_0 = −Λ_0 = 0 with a zero censoring rate
        let ll = loglik_latent(&model, &cohort).unwrap();
        assert!((ll - (lambda.ln() - lambda * t)).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_survives_extreme_predictors() {
        let cohort = Cohort::new(vec![vec![30.0], vec![-30.0]], vec![1.0, 2.0], vec![1, 1], None).unwrap();
        let model = LatentClassModel::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.0, 1.0]], vec![vec![0.0, -1.0]]],
            vec![BaseHazard::constant(grid(), 0.01), BaseHazard::constant(grid(), 0.1)],
        )
        .unwrap();
        let ll = loglik_latent(&model, &cohort).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn all_classes_underflowing_is_an_error() {
        let cohort = Cohort::new(vec![vec![800.0]], vec![1.0], vec![1], None).unwrap();
        let model = LatentClassModel::new(
            vec![1.0],
            vec![vec![vec![0.0, 1.0]]],
            vec![BaseHazard::constant(grid(), 0.01), BaseHazard::constant(grid(), 0.1)],
        )
        .unwrap();
        assert!(matches!(loglik_latent(&model, &cohort), Err(Error::NonFinite(0))));
    }

    #[test]
    fn zero_coefficients_give_bare_score() {
        let cohort = Cohort::new(vec![vec![0.3], vec![-1.0]], vec![1.0, 2.0], vec![1, 0], None).unwrap();
        let model = LatentClassModel::new(
            vec![1.0],
            vec![vec![vec![0.0, 0.0]]],
            vec![BaseHazard::constant(grid(), 0.05), BaseHazard::constant(grid(), 0.2)],
        )
        .unwrap();
        let penalty = PenaltyConfig::default();
        let ll = loglik_latent(&model, &cohort).unwrap();
        let psi = psi_latent(&model, &cohort, &penalty).unwrap();
        assert!((psi - (n_params(ModelKind::Latent, 1, 1, 1, 1) as f64 - ll)).abs() < 1e-12);
    }
}
