//! Heterogeneity-induced competing risks.
//!
//! Fits latent-class (and Gaussian-frailty) proportional hazards models over
//! all risks of a cohort jointly, so that the cohort-level correlations between
//! risks that are generated by residual heterogeneity can be filtered out of the
//! primary-risk measures. The main entry points are:
//!
//! - [`cohort`]: survival data, CSV ingestion, covariate normalisation and the
//!   synthetic cohort generator.
//! - [`hazard`]: Gaussian-kernel interpolated base hazards and their integrals.
//! - [`likelihood`]: data log-likelihoods and the MAP+AIC score `Ψ`.
//! - [`estimation`]: randomized Nelder-Mead fitting, `(L, K)` grid selection and
//!   curvature error bars.
//! - [`inference`]: decontaminated and crude survival/hazard curves, cumulative
//!   incidence and retrospective class posteriors.
//! - [`baselines`]: Kaplan-Meier, Cox/Breslow and the gamma-frailty model.

pub mod baselines;
pub mod cohort;
pub mod error;
pub mod estimation;
pub mod hazard;
pub mod inference;
pub mod likelihood;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod rng;

pub use cohort::{Cohort, CsvSchema, Standardization, SyntheticSpec};
pub use error::{Error, Result};
pub use hazard::{BaseHazard, TimeGrid};
pub use model::{GaussianFrailtyModel, LatentClassModel};
