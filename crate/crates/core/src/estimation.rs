//! MAP estimation: randomized Nelder-Mead on `Ψ`, `(L, K)` grid selection and
//! curvature-based error bars.
//!
//! The optimiser works in transformed coordinates: coefficients as they are,
//! class weights through a softmax over `L − 1` free logits (the last logit is
//! pinned at zero), knot values through their logarithms. While the censoring
//! coefficients are pinned at zero `𝓛_0` depends on the censoring knots alone,
//! so those knots are fitted once on their own before the main search.

use web_time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::hazard::{BaseHazard, TimeGrid};
use crate::inference::effective_classes;
use crate::likelihood::{
    self, censoring_loglik, latent_log_prior, n_params, LatentEvaluator, ModelKind, PenaltyConfig,
};
use crate::model::{GaussianFrailtyModel, LatentClassModel};
use crate::optimize::{self, minimize_randomized, NelderMeadConfig, RandomizedConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub restarts: usize,
    pub simplex_max_iter: usize,
    pub simplex_tolerance: f64,
    pub simplex_step: f64,
    /// Strictly decreasing kick amplitudes, in transformed coordinates.
    pub randomization_schedule: Vec<f64>,
    /// Standard deviation of the initial coefficient noise.
    pub init_coefficient_noise: f64,
    pub rng_seed: u64,
    pub free_censoring: bool,
    pub penalty: PenaltyConfig,
    pub compute_error_bars: bool,
    /// Seed each grid cell with an extra restart from the previous cell that
    /// has the same `L`.
    pub warm_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 16,
            simplex_max_iter: 10_000,
            simplex_tolerance: 1e-8,
            simplex_step: 0.1,
            randomization_schedule: optimize::geometric_schedule(0.5, 0.5, 8),
            init_coefficient_noise: 0.05,
            rng_seed: 0,
            free_censoring: false,
            penalty: PenaltyConfig::default(),
            compute_error_bars: true,
            warm_start: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if self.randomization_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::invalid("randomization amplitudes must be strictly decreasing"));
        }
        if self.randomization_schedule.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::invalid("randomization amplitudes must be nonnegative"));
        }
        if !(self.simplex_tolerance > 0.0) || !(self.simplex_step > 0.0) {
            return Err(Error::invalid("simplex tolerance and step must be positive"));
        }
        Ok(())
    }

    fn randomized(&self) -> RandomizedConfig {
        RandomizedConfig {
            simplex: NelderMeadConfig {
                max_iter: self.simplex_max_iter,
                tolerance: self.simplex_tolerance,
                initial_step: self.simplex_step,
                ..Default::default()
            },
            amplitudes: self.randomization_schedule.clone(),
        }
    }
}

/// Map between a [`LatentClassModel`] and the optimiser's parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentLayout {
    pub n_classes: usize,
    pub n_risks: usize,
    pub n_covariates: usize,
    pub grid: TimeGrid,
    pub free_censoring: bool,
    pub reference_class: usize,
    /// Include the censoring knots in the vector.
    pub censoring_knots: bool,
}

impl LatentLayout {
    pub fn for_model(model: &LatentClassModel, censoring_knots: bool) -> Self {
        LatentLayout {
            n_classes: model.n_classes(),
            n_risks: model.n_risks(),
            n_covariates: model.n_covariates(),
            grid: *model.grid(),
            free_censoring: model.free_censoring,
            reference_class: model.reference_class,
            censoring_knots: censoring_knots || model.free_censoring,
        }
    }

    fn first_coef_risk(&self) -> usize {
        if self.free_censoring {
            0
        } else {
            1
        }
    }

    fn first_knot_risk(&self) -> usize {
        if self.censoring_knots {
            0
        } else {
            1
        }
    }

    fn free_coefficients(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let q = self.n_covariates + 1;
        (0..self.n_classes).flat_map(move |l| {
            (self.first_coef_risk()..=self.n_risks).flat_map(move |r| {
                (0..q).filter(move |&mu| !(l == self.reference_class && mu == 0)).map(move |mu| (l, r, mu))
            })
        })
    }

    pub fn n_coefficients(&self) -> usize {
        self.free_coefficients().count()
    }

    pub fn dim(&self) -> usize {
        self.n_coefficients()
            + (self.n_classes - 1)
            + (self.n_risks + 1 - self.first_knot_risk()) * self.grid.n_knots()
    }

    /// Human-readable name of every coordinate, 1-based class and knot labels.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .free_coefficients()
            .map(|(l, r, mu)| format!("beta[class={},risk={},mu={}]", l + 1, r, mu))
            .collect();
        out.extend((1..self.n_classes).map(|l| format!("weight_logit[class={l}]")));
        for r in self.first_knot_risk()..=self.n_risks {
            out.extend((0..self.grid.n_knots()).map(|k| format!("log_knot[risk={r},k={k}]")));
        }
        out
    }

    pub fn pack(&self, model: &LatentClassModel) -> Vec<f64> {
        let mut theta: Vec<f64> = self.free_coefficients().map(|(l, r, mu)| model.beta(l, r)[mu]).collect();
        let last = model.weights[self.n_classes - 1].ln();
        theta.extend(model.weights[..self.n_classes - 1].iter().map(|w| w.ln() - last));
        for r in self.first_knot_risk()..=self.n_risks {
            theta.extend(model.base_hazards[r].knots.iter().map(|x| x.ln()));
        }
        theta
    }

    /// Writes `theta` into `model`, which must have this layout's shape.
    pub fn unpack_into(&self, theta: &[f64], model: &mut LatentClassModel) {
        debug_assert_eq!(theta.len(), self.dim());
        let mut it = theta.iter().copied();
        for (l, r, mu) in self.free_coefficients() {
            model.beta_mut(l, r)[mu] = it.next().unwrap_or(0.0);
        }
        let logits: Vec<f64> = (0..self.n_classes - 1).map(|_| it.next().unwrap_or(0.0)).chain([0.0]).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|a| (a - m).exp()).sum();
        for (w, a) in model.weights.iter_mut().zip(&logits) {
            *w = (a - m).exp() / total;
        }
        for r in self.first_knot_risk()..=self.n_risks {
            for x in model.base_hazards[r].knots.iter_mut() {
                *x = it.next().unwrap_or(0.0).exp();
            }
        }
    }

    pub fn template(&self) -> LatentClassModel {
        let mut m = LatentClassModel::zeros(self.n_classes, self.n_risks, self.n_covariates, self.grid);
        m.free_censoring = self.free_censoring;
        m.reference_class = self.reference_class;
        m
    }

    pub fn unpack(&self, theta: &[f64], base: &LatentClassModel) -> LatentClassModel {
        let mut m = base.clone();
        self.unpack_into(theta, &mut m);
        m
    }
}

/// Constant-rate maximum-likelihood value `#events of type r / Σ_i t_i`,
/// floored at `1e-8 / mean(t)` for risks without events.
pub fn initial_rate(cohort: &Cohort, r: usize) -> f64 {
    let total = cohort.total_time();
    let count = cohort.event_count(r);
    let mean_t = total / cohort.len() as f64;
    if count == 0 || total <= 0.0 {
        let floor = 1e-8 / mean_t.max(f64::MIN_POSITIVE);
        if r != 0 {
            log::warn!("risk {r} has no events; base rate floored at {floor:e}");
        }
        return floor;
    }
    count as f64 / total
}

/// Starting point of a search: stationary base hazards at their constant-rate
/// optimum, equal class weights, Gaussian noise of sd `noise` on every free
/// coefficient.
pub fn init_model(
    cohort: &Cohort,
    n_classes: usize,
    k: usize,
    noise: f64,
    noise_seed: u64,
    free_censoring: bool,
) -> Result<LatentClassModel> {
    if n_classes == 0 || k == 0 {
        return Err(Error::invalid("L and K must be at least 1"));
    }
    let grid = TimeGrid::for_cohort(cohort, k)?;
    let mut model = LatentClassModel::zeros(n_classes, cohort.n_risks(), cohort.n_covariates(), grid);
    model.free_censoring = free_censoring;
    for r in 0..=cohort.n_risks() {
        model.base_hazards[r] = BaseHazard::constant(grid, initial_rate(cohort, r));
    }
    let layout = LatentLayout::for_model(&model, false);
    let mut rng = rng::seeded(noise_seed);
    for (l, r, mu) in layout.free_coefficients().collect::<Vec<_>>() {
        model.beta_mut(l, r)[mu] = noise * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(model)
}

/// Curvature of `Ψ` at a minimum and the error bars it implies.
#[derive(Debug, Clone)]
pub struct ErrorBars {
    pub names: Vec<String>,
    /// Probe estimate of `C⁻¹`, averaged over the probe sizes.
    pub curvature: DMatrix<f64>,
    /// `C`, present when the curvature is positive definite.
    pub covariance: Option<DMatrix<f64>>,
    /// `C_ii` per parameter, absent where the curvature is singular or
    /// indefinite along a direction involving the parameter.
    pub variance: Vec<Option<f64>>,
    /// `sqrt(C_ii)`.
    pub sigma: Vec<Option<f64>>,
    /// `|λ|_max / |λ|_min` of the curvature.
    pub condition_number: f64,
    pub min_eigenvalue: f64,
}

/// How `Ψ` is probed around the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeScheme {
    /// `θ̂ + ε e_k` and `θ̂ + ε(e_k + e_l)` only.
    OneSided,
    /// Both signs, averaged; cancels the gradient and cubic terms.
    Symmetric,
}

/// `ε_λ = 10⁻³ (½)^{λ−1}`, `λ = 1…10`.
pub fn default_probe_sizes() -> Vec<f64> {
    (0..10).map(|j| 1e-3 * 0.5f64.powi(j)).collect()
}

/// Builds `C⁻¹` from the probe responses
/// `(C⁻¹)_kk = 2ε⁻²ΔΨ_k`, `(C⁻¹)_kl = ε⁻²(ΔΨ_kl − ΔΨ_k − ΔΨ_l)`, averaged over
/// `eps`, then inverts it.
pub fn curvature_error_bars(
    mut psi: impl FnMut(&[f64]) -> f64,
    theta: &[f64],
    names: Vec<String>,
    eps: &[f64],
    scheme: ProbeScheme,
) -> Result<ErrorBars> {
    let n = theta.len();
    let psi0 = psi(theta);
    if !psi0.is_finite() {
        return Err(Error::Numerical("Ψ is not finite at the probe centre".into()));
    }
    let signs: &[f64] = match scheme {
        ProbeScheme::OneSided => &[1.0],
        ProbeScheme::Symmetric => &[1.0, -1.0],
    };
    let mut curvature = DMatrix::<f64>::zeros(n, n);
    let mut probe = theta.to_vec();
    for &e in eps {
        // mean response over signs, ≈ ½ Δθ·C⁻¹Δθ
        let mut single = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for &s in signs {
                probe[k] = theta[k] + s * e;
                acc += psi(&probe) - psi0;
            }
            probe[k] = theta[k];
            single[k] = acc / signs.len() as f64;
        }
        for k in 0..n {
            curvature[(k, k)] += 2.0 * single[k] / (e * e);
            for l in k + 1..n {
                let mut acc = 0.0;
                for &s in signs {
                    probe[k] = theta[k] + s * e;
                    probe[l] = theta[l] + s * e;
                    acc += psi(&probe) - psi0;
                }
                probe[k] = theta[k];
                probe[l] = theta[l];
                let pair = acc / signs.len() as f64;
                let v = (pair - single[k] - single[l]) / (e * e);
                curvature[(k, l)] += v;
                curvature[(l, k)] += v;
            }
        }
    }
    curvature /= eps.len() as f64;
    if curvature.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite curvature probe".into()));
    }
    Ok(invert_curvature(curvature, names))
}

fn invert_curvature(curvature: DMatrix<f64>, names: Vec<String>) -> ErrorBars {
    let n = curvature.nrows();
    let eig = SymmetricEigen::new(curvature.clone());
    let abs_max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let abs_min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = 1e-6 * abs_max;
    let good: Vec<bool> = eig.eigenvalues.iter().map(|&v| v > threshold).collect();
    let mut variance = vec![None; n];
    let mut pseudo = DMatrix::<f64>::zeros(n, n);
    for (j, &ok) in good.iter().enumerate() {
        if ok {
            let v = eig.eigenvectors.column(j);
            pseudo += (v * v.transpose()) / eig.eigenvalues[j];
        }
    }
    for (k, var) in variance.iter_mut().enumerate() {
        let leak: f64 = good
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(j, _)| eig.eigenvectors[(k, j)].powi(2))
            .sum();
        if leak < 1e-6 {
            *var = Some(pseudo[(k, k)]);
        }
    }
    let all_good = good.iter().all(|&g| g);
    ErrorBars {
        names,
        covariance: all_good.then(|| pseudo.clone()),
        sigma: variance.iter().map(|v| v.map(|x| x.max(0.0).sqrt())).collect(),
        variance,
        curvature,
        condition_number: if abs_min > 0.0 { abs_max / abs_min } else { f64::INFINITY },
        min_eigenvalue,
    }
}

/// Error bars of every free parameter of a fitted latent-class model, in the
/// optimiser's coordinates (censoring knots included).
pub fn latent_error_bars(model: &LatentClassModel, cohort: &Cohort, penalty: &PenaltyConfig) -> Result<ErrorBars> {
    let layout = LatentLayout::for_model(model, true);
    let evaluator = LatentEvaluator::new(cohort, *model.grid());
    let theta = layout.pack(model);
    let mut scratch = model.clone();
    let psi = |th: &[f64]| {
        layout.unpack_into(th, &mut scratch);
        evaluator.psi(&scratch, penalty).unwrap_or(f64::INFINITY)
    };
    curvature_error_bars(psi, &theta, layout.names(), &default_probe_sizes(), ProbeScheme::Symmetric)
}

/// Outcome of one `(L, K)` fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub n_classes: usize,
    pub k: usize,
    /// Best model, classes in canonical order.
    pub model: LatentClassModel,
    pub psi: f64,
    pub loglik: f64,
    pub n_par: usize,
    pub per_restart_psis: Vec<f64>,
    pub initial_psis: Vec<f64>,
    /// Best-so-far `Ψ` after each round, per restart.
    pub restart_histories: Vec<Vec<f64>>,
    pub evaluations: usize,
    pub error_bars: Option<ErrorBars>,
    pub wall_time: Duration,
}

impl FitReport {
    pub fn effective_classes(&self) -> f64 {
        effective_classes(&self.model.weights)
    }
}

/// Fits the censoring knots by maximising `𝓛_0` alone.
fn fit_censoring_knots(
    evaluator: &LatentEvaluator,
    start: &[f64],
    cfg: &FitConfig,
) -> Vec<f64> {
    let cohort = evaluator.cohort();
    if cohort.event_count(0) == 0 {
        return start.to_vec();
    }
    let mut knots = start.to_vec();
    let mut f = |eta: &[f64]| {
        for (x, e) in knots.iter_mut().zip(eta) {
            *x = e.exp();
        }
        censoring_loglik(&knots, cohort, evaluator.cache()).map(|v| -v).unwrap_or(f64::INFINITY)
    };
    let eta0: Vec<f64> = start.iter().map(|x| x.ln()).collect();
    let nm = NelderMeadConfig {
        max_iter: cfg.simplex_max_iter,
        tolerance: cfg.simplex_tolerance * 1e-2,
        initial_step: cfg.simplex_step,
        ..Default::default()
    };
    let mut best = optimize::nelder_mead(&mut f, &eta0, &nm);
    // restart from the optimum until the simplex stops moving
    for _ in 0..3 {
        let again = optimize::nelder_mead(&mut f, &best.x, &nm);
        if again.value >= best.value - 1e-12 {
            break;
        }
        best = again;
    }
    best.x.iter().map(|e| e.exp()).collect()
}

struct RestartOutcome {
    model: LatentClassModel,
    psi: f64,
    initial_psi: f64,
    history: Vec<f64>,
    evaluations: usize,
}

fn run_restart(
    evaluator: &LatentEvaluator,
    start: LatentClassModel,
    cfg: &FitConfig,
    mut rng: rng::Rng,
    label: (usize, usize, usize),
) -> RestartOutcome {
    let layout = LatentLayout::for_model(&start, false);
    let censoring_ll = if start.free_censoring {
        0.0
    } else {
        censoring_loglik(&start.base_hazards[0].knots, evaluator.cohort(), evaluator.cache()).unwrap_or(f64::NEG_INFINITY)
    };
    let n_par = likelihood::latent_n_par(&start) as f64;
    let aic = if cfg.penalty.aic { n_par } else { 0.0 };
    let mut scratch = start.clone();
    let mut psi = |theta: &[f64]| {
        layout.unpack_into(theta, &mut scratch);
        let ll = if scratch.free_censoring {
            evaluator.loglik(&scratch)
        } else {
            evaluator.risks_loglik(&scratch).map(|v| v + censoring_ll)
        };
        match ll {
            Ok(ll) => aic - ll - latent_log_prior(&scratch, &cfg.penalty),
            Err(_) => f64::INFINITY,
        }
    };
    let theta0 = layout.pack(&start);
    let initial_psi = psi(&theta0);
    let (l_count, k, restart) = label;
    let out = minimize_randomized(&mut psi, &theta0, &cfg.randomized(), &mut rng, |round, value| {
        log::info!("L={l_count} K={k} restart {restart} round {round}: psi = {value:.6}");
    });
    RestartOutcome {
        model: layout.unpack(&out.best.x, &start),
        psi: out.best.value,
        initial_psi,
        history: out.history,
        evaluations: out.evaluations,
    }
}

/// Resamples a model's knots onto another grid by evaluating its hazards at
/// the new knot times.
fn regrid(model: &LatentClassModel, grid: TimeGrid) -> LatentClassModel {
    let mut out = model.clone();
    for (dst, src) in out.base_hazards.iter_mut().zip(&model.base_hazards) {
        let knots = (0..grid.n_knots()).map(|k| src.rate(grid.knot_time(k)).max(1e-300)).collect();
        *dst = BaseHazard { grid, knots };
    }
    out
}

fn fit_cell(
    cohort: &Cohort,
    n_classes: usize,
    k: usize,
    cfg: &FitConfig,
    cell: u64,
    warm: Option<&LatentClassModel>,
) -> Result<FitReport> {
    cfg.validate()?;
    if cohort.is_empty() {
        return Err(Error::NoRecords);
    }
    if (1..=cohort.n_risks()).all(|r| cohort.event_count(r) == 0) {
        return Err(Error::invalid("the cohort has no events of any true risk"));
    }
    let started = Instant::now();
    let grid = TimeGrid::for_cohort(cohort, k)?;
    let evaluator = LatentEvaluator::new(cohort, grid);

    let base = init_model(cohort, n_classes, k, 0.0, 0, cfg.free_censoring)?;
    let censoring_knots = if cfg.free_censoring {
        base.base_hazards[0].knots.clone()
    } else {
        fit_censoring_knots(&evaluator, &base.base_hazards[0].knots, cfg)
    };

    let mut starts: Vec<(LatentClassModel, rng::Rng)> = (0..cfg.restarts)
        .map(|restart| {
            let noise_seed = rng::derive_seed(cfg.rng_seed, &[cell, restart as u64, 0]);
            let mut m = init_model(cohort, n_classes, k, cfg.init_coefficient_noise, noise_seed, cfg.free_censoring)?;
            m.base_hazards[0].knots.clone_from(&censoring_knots);
            Ok((m, rng::stream(cfg.rng_seed, &[cell, restart as u64, 1])))
        })
        .collect::<Result<_>>()?;
    if let Some(prev) = warm.filter(|p| p.n_classes() == n_classes) {
        let mut m = regrid(prev, grid);
        m.base_hazards[0].knots.clone_from(&censoring_knots);
        starts.push((m, rng::stream(cfg.rng_seed, &[cell, u64::MAX, 1])));
    }

    let run = |(i, (start, rng)): (usize, (LatentClassModel, rng::Rng))| {
        run_restart(&evaluator, start, cfg, rng, (n_classes, k, i))
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<RestartOutcome> = starts.into_par_iter().enumerate().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<RestartOutcome> = starts.into_iter().enumerate().map(run).collect();

    let best = outcomes
        .iter()
        .filter(|o| o.psi.is_finite())
        .min_by(|a, b| a.psi.total_cmp(&b.psi))
        .ok_or_else(|| {
            Error::Numerical(format!(
                "all {} restarts produced a non-finite Ψ (L = {n_classes}, K = {k})",
                outcomes.len()
            ))
        })?;
    let model = best.model.canonicalized();
    let loglik = evaluator.loglik(&model)?;
    let psi = evaluator.psi(&model, &cfg.penalty)?;
    let error_bars = if cfg.compute_error_bars {
        match latent_error_bars(&model, cohort, &cfg.penalty) {
            Ok(eb) => Some(eb),
            Err(e) => {
                log::warn!("error bars unavailable: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(FitReport {
        n_classes,
        k,
        n_par: likelihood::latent_n_par(&model),
        model,
        psi,
        loglik,
        per_restart_psis: outcomes.iter().map(|o| o.psi).collect(),
        initial_psis: outcomes.iter().map(|o| o.initial_psi).collect(),
        restart_histories: outcomes.iter().map(|o| o.history.clone()).collect(),
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        error_bars,
        wall_time: started.elapsed(),
    })
}

/// MAP fit of the latent-class model with `L` classes and `K` knot intervals.
pub fn fit_map(cohort: &Cohort, n_classes: usize, k: usize, cfg: &FitConfig) -> Result<FitReport> {
    fit_cell(cohort, n_classes, k, cfg, 0, None)
}

#[derive(Debug, Clone)]
pub struct SelectionCell {
    pub n_classes: usize,
    pub k: usize,
    pub outcome: std::result::Result<FitReport, String>,
}

impl SelectionCell {
    pub fn psi(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.psi)
    }
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub cells: Vec<SelectionCell>,
    /// Index into `cells` of the smallest `Ψ`.
    pub chosen: usize,
    /// `(Ψ_second − Ψ_best) / N`, when at least two cells succeeded.
    pub delta_psi_per_individual: Option<f64>,
    /// `exp(Ψ_second − Ψ_best)`, the likelihood ratio of the top two.
    pub likelihood_ratio: Option<f64>,
}

impl SelectionReport {
    pub fn best(&self) -> &FitReport {
        self.cells[self.chosen].outcome.as_ref().expect("chosen cell succeeded")
    }

    pub fn chosen_dims(&self) -> (usize, usize) {
        (self.cells[self.chosen].n_classes, self.cells[self.chosen].k)
    }
}

/// Fits every `(L, K)` of the grid and picks the smallest `Ψ`. Cells fail
/// independently; the call errors only when every cell fails.
pub fn select_model(cohort: &Cohort, l_grid: &[usize], k_grid: &[usize], cfg: &FitConfig) -> Result<SelectionReport> {
    if l_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::invalid("model grids must be nonempty"));
    }
    let mut cells = Vec::new();
    let mut previous: Vec<LatentClassModel> = Vec::new();
    for &l in l_grid {
        for &k in k_grid {
            let cell_index = cells.len() as u64;
            let warm = if cfg.warm_start { previous.iter().rev().find(|m| m.n_classes() == l) } else { None };
            let outcome = fit_cell(cohort, l, k, cfg, cell_index, warm).map_err(|e| e.to_string());
            if let Ok(r) = &outcome {
                previous.push(r.model.clone());
            }
            cells.push(SelectionCell { n_classes: l, k, outcome });
        }
    }
    let mut ranked: Vec<(usize, f64)> =
        cells.iter().enumerate().filter_map(|(i, c)| c.psi().map(|p| (i, p))).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let chosen = ranked
        .first()
        .map(|(i, _)| *i)
        .ok_or_else(|| Error::Numerical("every grid cell failed".into()))?;
    let gap = ranked.get(1).map(|(_, p)| p - ranked[0].1);
    Ok(SelectionReport {
        cells,
        chosen,
        delta_psi_per_individual: gap.map(|g| g / cohort.len() as f64),
        likelihood_ratio: gap.map(f64::exp),
    })
}

/// Fit of the Gaussian-frailty model.
#[derive(Debug, Clone)]
pub struct GaussianFitReport {
    pub k: usize,
    pub model: GaussianFrailtyModel,
    /// `Ψ` with the Jensen bound in place of `𝓛`.
    pub psi_lower_bound: f64,
    pub loglik_lower_bound: f64,
    /// Monte-Carlo log-likelihood at the optimum, when requested.
    pub loglik_mc: Option<likelihood::McEstimate>,
    pub n_par: usize,
    pub per_restart_psis: Vec<f64>,
    pub wall_time: Duration,
}

/// Layout: regression means (frailty means pinned at zero), the lower
/// Cholesky factor of `C`, log knots of the true risks.
struct GaussianLayout {
    n_risks: usize,
    q: usize,
    grid: TimeGrid,
}

impl GaussianLayout {
    fn dim_c(&self) -> usize {
        self.n_risks * self.q
    }

    fn dim(&self) -> usize {
        let d = self.dim_c();
        self.n_risks * (self.q - 1) + d * (d + 1) / 2 + self.n_risks * self.grid.n_knots()
    }

    fn unpack_into(&self, theta: &[f64], model: &mut GaussianFrailtyModel) {
        let mut it = theta.iter().copied();
        for r in 1..=self.n_risks {
            let mean = model.mean_mut(r);
            mean[0] = 0.0;
            for m in mean[1..].iter_mut() {
                *m = it.next().unwrap_or(0.0);
            }
        }
        let d = self.dim_c();
        let mut chol = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in 0..=a {
                chol[(a, b)] = it.next().unwrap_or(0.0);
            }
        }
        model.covariance = &chol * chol.transpose();
        for r in 1..=self.n_risks {
            for x in model.base_hazards[r].knots.iter_mut() {
                *x = it.next().unwrap_or(0.0).exp();
            }
        }
    }
}

/// MAP fit of the Gaussian model, optimising the Jensen-bound `Ψ`. With
/// `mc_refine = Some(samples)` a final simplex pass optimises the Monte-Carlo
/// likelihood (fixed draws) from the bound optimum.
pub fn fit_gaussian(cohort: &Cohort, k: usize, cfg: &FitConfig, mc_refine: Option<usize>) -> Result<GaussianFitReport> {
    cfg.validate()?;
    let started = Instant::now();
    let grid = TimeGrid::for_cohort(cohort, k)?;
    let n_risks = cohort.n_risks();
    let q = cohort.n_covariates() + 1;
    let evaluator = LatentEvaluator::new(cohort, grid);
    let censoring = fit_censoring_knots(&evaluator, &[initial_rate(cohort, 0); 1].repeat(grid.n_knots()), cfg);
    let mut hazards = vec![BaseHazard { grid, knots: censoring }];
    hazards.extend((1..=n_risks).map(|r| BaseHazard::constant(grid, initial_rate(cohort, r))));
    let d = n_risks * q;
    let template = GaussianFrailtyModel::new(vec![vec![0.0; q]; n_risks], DMatrix::zeros(d, d), hazards)?;
    let layout = GaussianLayout { n_risks, q, grid };
    let penalty = cfg.penalty;

    let run = |restart: usize| {
        let mut rng = rng::stream(cfg.rng_seed, &[0, restart as u64, 0]);
        let mut theta = vec![0.0; layout.dim()];
        let n_reg = n_risks * (q - 1);
        for x in theta[..n_reg].iter_mut() {
            *x = cfg.init_coefficient_noise * rng.sample::<f64, _>(StandardNormal);
        }
        let mut pos = n_reg;
        for a in 0..d {
            for b in 0..=a {
                theta[pos] = if a == b { 0.05 } else { 0.0 };
                pos += 1;
            }
        }
        for r in 1..=n_risks {
            for _ in 0..grid.n_knots() {
                theta[pos] = initial_rate(cohort, r).ln();
                pos += 1;
            }
        }
        let mut scratch = template.clone();
        let mut psi = |th: &[f64]| {
            layout.unpack_into(th, &mut scratch);
            likelihood::psi_gaussian_lb(&scratch, cohort, &penalty).unwrap_or(f64::INFINITY)
        };
        let out = minimize_randomized(&mut psi, &theta, &cfg.randomized(), &mut rng, |round, value| {
            log::info!("gaussian K={k} restart {restart} round {round}: psi = {value:.6}");
        });
        (out.best.x, out.best.value)
    };
    let results: Vec<(Vec<f64>, f64)> = (0..cfg.restarts).map(run).collect();
    let (theta, _) = results
        .iter()
        .filter(|r| r.1.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .ok_or_else(|| Error::Numerical("all Gaussian restarts produced a non-finite Ψ".into()))?;
    let mut model = template.clone();
    layout.unpack_into(&theta, &mut model);

    let loglik_mc = match mc_refine {
        None => None,
        Some(samples) => {
            model.mc_samples = samples;
            let mut scratch = model.clone();
            let mc_seed = rng::derive_seed(cfg.rng_seed, &[u64::MAX]);
            let mut objective = |th: &[f64]| {
                layout.unpack_into(th, &mut scratch);
                match likelihood::loglik_gaussian_mc(&scratch, cohort, mc_seed) {
                    Ok(est) => {
                        n_params(ModelKind::Gaussian, 1, k, n_risks, q - 1) as f64 - est.value
                            - likelihood::gaussian_log_prior(&scratch, &penalty)
                    }
                    Err(_) => f64::INFINITY,
                }
            };
            let nm = NelderMeadConfig {
                max_iter: cfg.simplex_max_iter,
                tolerance: cfg.simplex_tolerance,
                initial_step: cfg.simplex_step * 0.1,
                ..Default::default()
            };
            let refined = optimize::nelder_mead(&mut objective, &theta, &nm);
            layout.unpack_into(&refined.x, &mut model);
            model.use_lower_bound = false;
            Some(likelihood::loglik_gaussian_mc(&model, cohort, mc_seed)?)
        }
    };
    let loglik_lower_bound = likelihood::loglik_gaussian_lb(&model, cohort)?;
    Ok(GaussianFitReport {
        k,
        psi_lower_bound: likelihood::psi_gaussian_lb(&model, cohort, &penalty)?,
        loglik_lower_bound,
        loglik_mc,
        n_par: n_params(ModelKind::Gaussian, 1, k, n_risks, q - 1),
        per_restart_psis: results.iter().map(|r| r.1).collect(),
        model,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_synthetic, SyntheticSpec};

    fn small_cohort() -> Cohort {
        let spec = SyntheticSpec::two_class_benchmark(Some(([3.0, 0.0, 0.0], [0.0; 3])), 120, 4);
        generate_synthetic(&spec).unwrap().0
    }

    #[test]
    fn initial_rates_follow_event_counts() {
        let cohort = Cohort::new(
            vec![vec![0.0]; 20],
            (0..20).map(|i| if i < 10 { 15.0 } else { 5.0 }).collect(),
            (0..20).map(|i| if i < 10 { 1 } else { 0 }).collect(),
            None,
        )
        .unwrap();
        // 10 events, Σt = 200
        let m = init_model(&cohort, 3, 2, 0.05, 1, false).unwrap();
        assert!(m.base_hazards[1].knots.iter().all(|&x| (x - 0.05).abs() < 1e-15));
        assert_eq!(m.weights, vec![1.0 / 3.0; 3]);
        assert_eq!(m, init_model(&cohort, 3, 2, 0.05, 1, false).unwrap());
        m.validate().unwrap();
    }

    #[test]
    fn empty_risk_gets_floored_rate() {
        let cohort = Cohort::new(vec![vec![0.0]; 2], vec![1.0, 3.0], vec![1, 1], Some(2)).unwrap();
        assert!((initial_rate(&cohort, 2) - 1e-8 / 2.0).abs() < 1e-20);
    }

    #[test]
    fn layout_round_trip() {
        let cohort = small_cohort();
        let mut m = init_model(&cohort, 3, 2, 0.3, 9, false).unwrap();
        m.weights = vec![0.2, 0.5, 0.3];
        let layout = LatentLayout::for_model(&m, true);
        assert_eq!(layout.names().len(), layout.dim());
        // 3 classes × 2 risks × 4 − 2 pinned frailties, 2 logits, 3 risks × 3 knots
        assert_eq!(layout.dim(), 22 + 2 + 9);
        let theta = layout.pack(&m);
        let back = layout.unpack(&theta, &m);
        for (a, b) in back.weights.iter().zip(&m.weights) {
            assert!((a - b).abs() < 1e-15);
        }
        for r in 0..=2 {
            for (a, b) in back.base_hazards[r].knots.iter().zip(&m.base_hazards[r].knots) {
                assert!((a - b).abs() < 1e-15 * b);
            }
        }
        assert_eq!(back.coefficient_tensor(), m.coefficient_tensor());
    }

    #[test]
    fn quadratic_error_bars_are_exact() {
        let v = [0.5, 2.0, 0.1];
        let psi = |x: &[f64]| 0.5 * x.iter().zip(&v).map(|(a, b)| a * a / b).sum::<f64>();
        for scheme in [ProbeScheme::OneSided, ProbeScheme::Symmetric] {
            let eb = curvature_error_bars(psi, &[0.0; 3], vec![String::new(); 3], &default_probe_sizes(), scheme).unwrap();
            for (s, var) in eb.sigma.iter().zip(&v) {
                assert!((s.unwrap() - var.sqrt()).abs() < 1e-6);
            }
            assert!(eb.covariance.is_some());
        }
    }

    #[test]
    fn flat_direction_is_flagged() {
        let psi = |x: &[f64]| 0.5 * x[0] * x[0] + x[1].powi(4);
        let eb = curvature_error_bars(psi, &[0.0, 0.0], vec![String::new(); 2], &default_probe_sizes(), ProbeScheme::Symmetric)
            .unwrap();
        assert!(eb.sigma[0].is_some());
        assert!(eb.sigma[1].is_none());
        assert!(eb.covariance.is_none());
        assert!(eb.condition_number > 1e5);
    }

    #[test]
    fn fit_never_worse_than_its_start() {
        let cohort = small_cohort();
        let cfg = FitConfig {
            restarts: 2,
            simplex_max_iter: 300,
            randomization_schedule: vec![0.2, 0.1],
            compute_error_bars: false,
            rng_seed: 3,
            ..Default::default()
        };
        let report = fit_map(&cohort, 2, 1, &cfg).unwrap();
        for ((psi, init), hist) in report.per_restart_psis.iter().zip(&report.initial_psis).zip(&report.restart_histories) {
            assert!(psi <= init);
            assert!(hist.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!((report.psi - report.per_restart_psis.iter().copied().fold(f64::INFINITY, f64::min)).abs() < 1e-9);
        let again = fit_map(&cohort, 2, 1, &cfg).unwrap();
        assert_eq!(report.model, again.model);
    }

    #[test]
    fn bad_schedule_is_rejected() {
        let cfg = FitConfig { randomization_schedule: vec![0.1, 0.2], ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = FitConfig { restarts: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
