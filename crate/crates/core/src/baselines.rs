//! Classical comparison estimators: Kaplan-Meier, Cox regression with the
//! Breslow baseline, and the gamma-frailty proportional hazards model whose
//! frailty integrals are analytic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::hazard::{BaseHazard, BasisCache};
use crate::model::linear_predictor;

/// Right-continuous step survival function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    /// Jump times, strictly increasing.
    pub times: Vec<f64>,
    /// Value from each jump time up to the next.
    pub values: Vec<f64>,
    /// Number at risk just before each jump.
    pub at_risk: Vec<usize>,
    /// Events at each jump.
    pub events: Vec<usize>,
}

impl StepFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 1.0,
            n => self.values[n - 1],
        }
    }

    /// Greenwood standard error at `t`.
    pub fn std_error(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s <= t);
        if n == 0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for j in 0..n {
            let (d, m) = (self.events[j] as f64, self.at_risk[j] as f64);
            if m > d {
                acc += d / (m * (m - d));
            } else {
                return 0.0;
            }
        }
        self.values[n - 1] * acc.sqrt()
    }
}

/// Product-limit estimator of risk `r`, all other outcomes treated as
/// censoring. At tied times deaths are counted before censorings leave the
/// risk set.
pub fn kaplan_meier(cohort: &Cohort, r: usize) -> Result<StepFunction> {
    if r == 0 || r > cohort.n_risks() {
        return Err(Error::invalid(format!("risk must be in 1..={}, got {r}", cohort.n_risks())));
    }
    if cohort.event_count(r) == 0 {
        log::warn!("no events of risk {r}; Kaplan-Meier estimate is constant 1");
    }
    let mut order: Vec<usize> = (0..cohort.len()).collect();
    order.sort_by(|&a, &b| cohort.time(a).total_cmp(&cohort.time(b)));
    let mut out = StepFunction { times: Vec::new(), values: Vec::new(), at_risk: Vec::new(), events: Vec::new() };
    let mut at_risk = cohort.len();
    let mut s = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = cohort.time(order[i]);
        let mut j = i;
        let mut deaths = 0;
        while j < order.len() && cohort.time(order[j]) == t {
            if cohort.label(order[j]) == r {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            out.times.push(t);
            out.values.push(s);
            out.at_risk.push(at_risk);
            out.events.push(deaths);
        }
        at_risk -= j - i;
        i = j;
    }
    Ok(out)
}

/// Cox regression for one risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub risk: usize,
    /// `β̂¹ … β̂ᵖ`.
    pub coefficients: Vec<f64>,
    /// From the inverse observed information.
    pub std_errors: Vec<f64>,
    /// Breslow increments `(t_j, Δ Λ̂(t_j))` at the distinct event times.
    pub breslow_baseline: Vec<(f64, f64)>,
    pub partial_loglik: f64,
    pub iterations: usize,
}

impl CoxFit {
    pub fn cumulative_baseline(&self, t: f64) -> f64 {
        self.breslow_baseline.iter().take_while(|(s, _)| *s <= t).map(|(_, d)| d).sum()
    }

    pub fn survival(&self, z: &[f64], t: f64) -> f64 {
        let lp: f64 = self.coefficients.iter().zip(z).map(|(b, x)| b * x).sum();
        (-self.cumulative_baseline(t) * lp.exp()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxConfig {
    pub max_iter: usize,
    /// Converged when the Newton step's largest component is below this.
    pub tolerance: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        CoxConfig { max_iter: 100, tolerance: 1e-10 }
    }
}

/// Partial log-likelihood, gradient and information with Breslow ties.
fn cox_terms(cohort: &Cohort, r: usize, order: &[usize], beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = beta.len();
    let mut ll = 0.0;
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    // risk-set sums, accumulated from the latest time backwards
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut i = order.len();
    while i > 0 {
        let t = cohort.time(order[i - 1]);
        let mut j = i;
        while j > 0 && cohort.time(order[j - 1]) == t {
            j -= 1;
        }
        for &k in &order[j..i] {
            let z = DVector::from_column_slice(cohort.covariates(k));
            let e = beta.iter().zip(z.iter()).map(|(b, x)| b * x).sum::<f64>().exp();
            s0 += e;
            s1 += &z * e;
            s2 += &z * z.transpose() * e;
        }
        let deaths: Vec<usize> = order[j..i].iter().copied().filter(|&k| cohort.label(k) == r).collect();
        if !deaths.is_empty() {
            let d = deaths.len() as f64;
            let mean = &s1 / s0;
            for &k in &deaths {
                let z = DVector::from_column_slice(cohort.covariates(k));
                ll += beta.iter().zip(z.iter()).map(|(b, x)| b * x).sum::<f64>();
                grad += &z;
            }
            ll -= d * s0.ln();
            grad -= &mean * d;
            info += (&s2 / s0 - &mean * mean.transpose()) * d;
        }
        i = j;
    }
    (ll, grad, info)
}

/// Cox partial likelihood with Breslow ties at `beta`.
pub fn cox_partial_loglik(cohort: &Cohort, r: usize, beta: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..cohort.len()).collect();
    order.sort_by(|&a, &b| cohort.time(a).total_cmp(&cohort.time(b)));
    cox_terms(cohort, r, &order, beta).0
}

/// Newton-Raphson with step halving on the partial likelihood; Breslow's
/// baseline `ΔΛ̂(t_j) = d_j / Σ_{k: t_k ≥ t_j} e^{β̂·z_k}`.
pub fn cox_fit(cohort: &Cohort, r: usize, cfg: &CoxConfig) -> Result<CoxFit> {
    if r == 0 || r > cohort.n_risks() {
        return Err(Error::invalid(format!("risk must be in 1..={}, got {r}", cohort.n_risks())));
    }
    if cohort.event_count(r) == 0 {
        return Err(Error::invalid(format!("no events of risk {r}")));
    }
    let p = cohort.n_covariates();
    for a in 0..p {
        for b in a + 1..p {
            if (0..cohort.len()).all(|i| cohort.covariates(i)[a] == cohort.covariates(i)[b]) {
                return Err(Error::invalid(format!("covariate columns {} and {} are identical", a + 1, b + 1)));
            }
        }
    }
    let mut order: Vec<usize> = (0..cohort.len()).collect();
    order.sort_by(|&a, &b| cohort.time(a).total_cmp(&cohort.time(b)));
    let mut beta = vec![0.0; p];
    let (mut ll, mut grad, mut info) = cox_terms(cohort, r, &order, &beta);
    let mut iterations = 0;
    let mut converged = p == 0;
    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        let chol = info.clone().cholesky().ok_or_else(|| {
            Error::Numerical("Cox information matrix is singular (collinear covariates or separation)".into())
        })?;
        let step = chol.solve(&grad);
        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let next = cox_terms(cohort, r, &order, &trial);
            if next.0 >= ll - 1e-12 * ll.abs() || scale < 1e-10 {
                beta = trial;
                (ll, grad, info) = next;
                break;
            }
            scale *= 0.5;
        }
        let size = step.iter().fold(0.0f64, |m, s| m.max((scale * s).abs()));
        if beta.iter().any(|b| b.abs() > 50.0) {
            return Err(Error::Numerical(
                "Cox coefficients diverge: monotone likelihood (perfect separation)".into(),
            ));
        }
        converged = size < cfg.tolerance;
    }
    if !converged {
        return Err(Error::Numerical(format!("Cox fit did not converge in {} iterations", cfg.max_iter)));
    }
    let std_errors = match info.clone().try_inverse() {
        Some(inv) if p > 0 => (0..p).map(|k| inv[(k, k)].max(0.0).sqrt()).collect(),
        _ => vec![f64::NAN; p],
    };
    // Breslow increments
    let mut breslow = Vec::new();
    let mut s0 = 0.0;
    let mut i = order.len();
    while i > 0 {
        let t = cohort.time(order[i - 1]);
        let mut j = i;
        while j > 0 && cohort.time(order[j - 1]) == t {
            j -= 1;
        }
        let mut deaths = 0usize;
        for &k in &order[j..i] {
            s0 += linear_predictor_no_frailty(&beta, cohort.covariates(k)).exp();
            if cohort.label(k) == r {
                deaths += 1;
            }
        }
        if deaths > 0 {
            breslow.push((t, deaths as f64 / s0));
        }
        i = j;
    }
    breslow.reverse();
    Ok(CoxFit { risk: r, coefficients: beta, std_errors, breslow_baseline: breslow, partial_loglik: ll, iterations })
}

fn linear_predictor_no_frailty(beta: &[f64], z: &[f64]) -> f64 {
    beta.iter().zip(z).map(|(b, x)| b * x).sum()
}

/// Gamma-distributed multiplicative frailty `e^{β⁰}` of shape `α` and mean 1
/// on a single risk with base hazard `λ̂` and regression `β¹…ᵖ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFrailtyFit {
    pub alpha: f64,
    pub coefficients: Vec<f64>,
    pub base: BaseHazard,
}

impl GammaFrailtyFit {
    fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid(format!("frailty shape must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    /// `S̃(t|z) = (1 + Λ̂(t)e^{β·z}/α)^{−α}`.
    pub fn survival(&self, z: &[f64], t: f64) -> Result<f64> {
        self.check()?;
        let x = self.base.cumulative(t) * linear_predictor_no_frailty(&self.coefficients, z).exp() / self.alpha;
        Ok((-self.alpha * x.ln_1p()).exp())
    }

    /// `h̃(t|z) = λ̂(t)e^{β·z} / (1 + Λ̂(t)e^{β·z}/α)`.
    pub fn hazard(&self, z: &[f64], t: f64) -> Result<f64> {
        self.check()?;
        let e = linear_predictor_no_frailty(&self.coefficients, z).exp();
        Ok(self.base.rate(t) * e / (1.0 + self.base.cumulative(t) * e / self.alpha))
    }
}

/// Closed-form primary-risk log-likelihood of the gamma-frailty model,
///
/// ```text
/// Σ_i δ_i log λ̂(t_i) + Σ_i δ_i β·z_i − α Σ_i log(1 + Λ̂(t_i)e^{β·z_i}/α)
///     − Σ_i δ_i log(1 + Λ̂(t_i)e^{β·z_i}/α)
/// ```
///
/// with `δ_i` the indicator of risk `r`.
pub fn gamma_frailty_loglik(alpha: f64, coefficients: &[f64], base: &BaseHazard, cohort: &Cohort, r: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("frailty shape must be positive, got {alpha}")));
    }
    if coefficients.len() != cohort.n_covariates() {
        return Err(Error::Dimension("one coefficient per covariate is required".into()));
    }
    let cache = BasisCache::new(base.grid, cohort.times());
    let mut total = 0.0;
    for i in 0..cohort.len() {
        let z = cohort.covariates(i);
        let lp = linear_predictor_no_frailty(coefficients, z);
        let x = cache.cumulative(i, &base.knots) * lp.exp() / alpha;
        let log1p = x.ln_1p();
        let mut c = -alpha * log1p;
        if cohort.label(i) == r {
            c += cache.rate(i, &base.knots).ln() + lp - log1p;
        }
        if !c.is_finite() {
            return Err(Error::NonFinite(i));
        }
        total += c;
    }
    Ok(total)
}

/// The frailty-free limit: `Σ_i δ_i (log λ̂(t_i) + β·z_i) − Σ_i Λ̂(t_i) e^{β·z_i}`.
pub fn proportional_hazards_loglik(coefficients: &[f64], base: &BaseHazard, cohort: &Cohort, r: usize) -> f64 {
    let cache = BasisCache::new(base.grid, cohort.times());
    (0..cohort.len())
        .map(|i| {
            let lp = linear_predictor(&[[0.0].as_slice(), coefficients].concat(), cohort.covariates(i));
            let mut c = -cache.cumulative(i, &base.knots) * lp.exp();
            if cohort.label(i) == r {
                c += cache.rate(i, &base.knots).ln() + lp;
            }
            c
        })
        .sum()
}

/// Maximum-likelihood fit of `(log α, β, log ξ)` by the randomized simplex.
pub fn fit_gamma_frailty(cohort: &Cohort, r: usize, k: usize, seed: u64) -> Result<GammaFrailtyFit> {
    use crate::optimize::{minimize_randomized, RandomizedConfig};
    let grid = crate::hazard::TimeGrid::for_cohort(cohort, k)?;
    let p = cohort.n_covariates();
    let rate0 = crate::estimation::initial_rate(cohort, r);
    let mut theta0 = vec![0.0; 1 + p];
    theta0.extend(std::iter::repeat_n(rate0.ln(), grid.n_knots()));
    let unpack = |th: &[f64]| GammaFrailtyFit {
        alpha: th[0].exp(),
        coefficients: th[1..=p].to_vec(),
        base: BaseHazard { grid, knots: th[1 + p..].iter().map(|x| x.exp()).collect() },
    };
    let mut f = |th: &[f64]| {
        let m = unpack(th);
        gamma_frailty_loglik(m.alpha, &m.coefficients, &m.base, cohort, r).map(|v| -v).unwrap_or(f64::INFINITY)
    };
    let mut rng = crate::rng::seeded(seed);
    let out = minimize_randomized(&mut f, &theta0, &RandomizedConfig::default(), &mut rng, |_, _| {});
    Ok(unpack(&out.best.x))
}
