//! Independent numerical oracles and the checks shared by the integration
//! tests and the acceptance run.

#![allow(dead_code)]

use hetcr::baselines::{
    cox_fit, gamma_frailty_loglik, proportional_hazards_loglik, CoxConfig, GammaFrailtyFit,
};
use hetcr::cohort::{generate_synthetic, SyntheticSpec};
use hetcr::estimation::{curvature_error_bars, default_probe_sizes, fit_map, latent_error_bars, FitConfig, ProbeScheme};
use hetcr::inference::{crude_hazard, crude_survival};
use hetcr::likelihood::{loglik_gaussian_lb, loglik_gaussian_mc, loglik_latent, PenaltyConfig};
use hetcr::model::linear_predictor;
use hetcr::optimize::{nelder_mead, NelderMeadConfig};
use hetcr::{BaseHazard, Cohort, GaussianFrailtyModel, LatentClassModel, TimeGrid};
use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::gamma as gamma_fn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub type CheckResult = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for j in 1..n {
        acc += if j % 2 == 1 { 4.0 } else { 2.0 } * f(a + j as f64 * h);
    }
    acc * h / 3.0
}

/// Gauss-Hermite nodes and weights for the standard normal measure, from the
/// eigen-decomposition of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i + 1 == j || j + 1 == i { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// A random latent-class model with smooth positive base hazards on `[0, 10]`.
pub fn random_model(rng: &mut ChaCha8Rng, l: usize, r: usize, p: usize, k: usize, free_censoring: bool) -> LatentClassModel {
    let grid = TimeGrid::new(0.0, 10.0, k).unwrap();
    let mut raw: Vec<f64> = (0..l).map(|_| 0.2 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|w| *w /= total);
    let coefficients = (0..l)
        .map(|class| {
            (0..r)
                .map(|_| {
                    (0..=p)
                        .map(|mu| if class == 0 && mu == 0 { 0.0 } else { 0.7 * rng.sample::<f64, _>(StandardNormal) })
                        .collect()
                })
                .collect()
        })
        .collect();
    let hazards = (0..=r)
        .map(|_| BaseHazard::new(grid, (0..=k).map(|_| 0.02 + 0.28 * rng.random::<f64>()).collect()).unwrap())
        .collect();
    let mut m = LatentClassModel::new(raw, coefficients, hazards).unwrap();
    if free_censoring {
        m.free_censoring = true;
        for class in 0..l {
            for mu in 0..=p {
                if !(class == 0 && mu == 0) {
                    m.beta_mut(class, 0)[mu] = 0.5 * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }
    m.validate().unwrap();
    m
}

fn exposure(model: &LatentClassModel, class: usize, z: &[f64], t: f64) -> f64 {
    (0..=model.n_risks())
        .map(|r| model.base_hazards[r].cumulative(t) * model.linear_predictor(class, r, z).exp())
        .sum()
}

/// Direct data probability `Σ_ℓ w_ℓ λ̂_r e^{β_r^ℓ·z} exp(−Σ_{r'} e^{β_{r'}^ℓ·z} Λ̂_{r'})`.
pub fn p_direct(model: &LatentClassModel, r: usize, z: &[f64], t: f64) -> f64 {
    let rate = model.base_hazards[r].rate(t);
    (0..model.n_classes())
        .map(|l| model.weights[l] * rate * model.linear_predictor(l, r, z).exp() * (-exposure(model, l, z, t)).exp())
        .sum()
}

/// Crude hazard of the censoring risk, which the library does not expose.
fn crude_censoring_hazard(model: &LatentClassModel, z: &[f64], t: f64) -> f64 {
    let rate = model.base_hazards[0].rate(t);
    let mut num = 0.0;
    let mut den = 0.0;
    for l in 0..model.n_classes() {
        let s = model.weights[l] * (-exposure(model, l, z, t)).exp();
        num += s * model.linear_predictor(l, 0, z).exp();
        den += s;
    }
    rate * num / den
}

/// The same probability through the crude cohort-level rates,
/// `h_r(t|z) exp(−Σ_{r'} ∫_0^t h_{r'}(s|z) ds)`.
pub fn p_via_crude(model: &LatentClassModel, r: usize, z: &[f64], t: f64) -> f64 {
    let mut log_surv = -simpson(0.0, t, 400, |s| crude_censoring_hazard(model, z, s));
    for rr in 1..=model.n_risks() {
        log_surv += crude_survival(model, rr, z, t).ln();
    }
    let h = if r == 0 { crude_censoring_hazard(model, z, t) } else { crude_hazard(model, r, z, t) };
    h * log_surv.exp()
}

pub fn check_data_probability_routes() -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut g = rng(101);
    for _ in 0..20 {
        let m = random_model(&mut g, 2, 2, 2, 3, true);
        let z: Vec<f64> = (0..2).map(|_| g.sample(StandardNormal)).collect();
        for _ in 0..3 {
            let t = 0.5 + 9.0 * g.random::<f64>();
            for r in 0..=2 {
                let a = p_direct(&m, r, &z, t);
                let b = p_via_crude(&m, r, &z, t);
                worst = worst.max(((a - b) / a).abs());
            }
        }
    }
    if worst <= 1e-6 {
        Ok(format!("max relative deviation {worst:.2e}"))
    } else {
        Err(format!("max relative deviation {worst:.2e} > 1e-6"))
    }
}

/// Ten individuals with constant rates against the equivalent atomic mixture.
pub fn check_individual_rate_link() -> CheckResult {
    let mut g = rng(202);
    let grid = TimeGrid::new(0.0, 20.0, 0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let rates: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| 0.01 + 0.5 * g.random::<f64>()).collect()).collect();
        let base: Vec<f64> = rates[0].clone();
        let coefficients = rates
            .iter()
            .map(|h| (1..3).map(|r| vec![(h[r] / base[r]).ln()]).collect())
            .collect();
        let hazards = base.iter().map(|&b| BaseHazard::constant(grid, b)).collect();
        let mut m = LatentClassModel::new(vec![0.1; 10], coefficients, hazards).map_err(|e| e.to_string())?;
        m.free_censoring = true;
        for (l, h) in rates.iter().enumerate() {
            m.beta_mut(l, 0)[0] = (h[0] / base[0]).ln();
        }
        m.validate().map_err(|e| e.to_string())?;
        for _ in 0..4 {
            let t = 15.0 * g.random::<f64>();
            for r in 1..3 {
                let mut num = 0.0;
                let mut den = 0.0;
                for h in &rates {
                    let s = (-(h.iter().sum::<f64>()) * t).exp();
                    num += h[r] * s;
                    den += s;
                }
                worst = worst.max((num / den - crude_hazard(&m, r, &[], t)).abs());
            }
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e} > 1e-10"))
    }
}

/// Gamma frailty: the frailty integral, the likelihood, the α → ∞ limit and
/// the survival function against quadrature and simulation.
pub fn check_gamma_frailty() -> CheckResult {
    // ∫ g(x) e^{−yx} dx with g the Gamma(α, α) density of x = e^β
    let (alpha, y) = (2.0f64, 3.0f64);
    let density = |x: f64| alpha.powf(alpha) * x.powf(alpha - 1.0) * (-alpha * x).exp() / gamma_fn(alpha);
    let integral = simpson(0.0, 60.0, 200_000, |x| density(x) * (-y * x).exp());
    let closed = (alpha / (alpha + y)).powf(alpha);
    let e1 = (integral - closed).abs();

    let mut g = rng(303);
    let grid = TimeGrid::new(0.0, 5.0, 2).unwrap();
    let base = BaseHazard::new(grid, vec![0.2, 0.4, 0.3]).unwrap();
    let n = 12;
    let cohort = Cohort::new(
        (0..n).map(|_| vec![g.sample::<f64, _>(StandardNormal)]).collect(),
        (0..n).map(|_| 0.2 + 4.8 * g.random::<f64>()).collect(),
        (0..n).map(|i| i % 2).collect(),
        Some(1),
    )
    .unwrap();
    let beta = [0.6];
    let closed_ll = gamma_frailty_loglik(alpha, &beta, &base, &cohort, 1).map_err(|e| e.to_string())?;
    let mut quad_ll = 0.0;
    for i in 0..n {
        let z = cohort.covariates(i);
        let e = (beta[0] * z[0]).exp();
        let cum = base.cumulative(cohort.time(i));
        let delta = cohort.label(i) == 1;
        let lik = simpson(0.0, 60.0, 200_000, |x| {
            let ev = if delta { base.rate(cohort.time(i)) * x * e } else { 1.0 };
            density(x) * ev * (-x * e * cum).exp()
        });
        quad_ll += lik.ln();
    }
    let e2 = (closed_ll - quad_ll).abs();

    let big = gamma_frailty_loglik(1e6, &beta, &base, &cohort, 1).map_err(|e| e.to_string())?;
    let e3 = (big - proportional_hazards_loglik(&beta, &base, &cohort, 1)).abs();

    let fit = GammaFrailtyFit { alpha, coefficients: beta.to_vec(), base: base.clone() };
    let gamma = Gamma::new(alpha, 1.0 / alpha).unwrap();
    let mut worst_z: f64 = 0.0;
    for (z, t) in [(0.3, 1.0), (-1.0, 3.5), (1.2, 4.8)] {
        let e = (beta[0] * z).exp();
        let cum = base.cumulative(t);
        let draws = 1_000_000;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for _ in 0..draws {
            let v = (-gamma.sample(&mut g) * e * cum).exp();
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / draws as f64;
        let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
        worst_z = worst_z.max((fit.survival(&[z], t).unwrap() - mean).abs() / se);
    }
    let detail = format!("integral {e1:.1e}, likelihood {e2:.1e}, Cox limit {e3:.1e}, survival {worst_z:.2} SE");
    if e1 <= 1e-8 && e2 <= 1e-8 && e3 <= 1e-4 && worst_z <= 3.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn random_gaussian_model(g: &mut ChaCha8Rng, r: usize, p: usize, scale: f64) -> GaussianFrailtyModel {
    let grid = TimeGrid::new(0.0, 5.0, 1).unwrap();
    let d = r * (p + 1);
    let a = DMatrix::from_fn(d, d, |_, _| g.sample::<f64, _>(StandardNormal));
    let c = &a * a.transpose() * (scale / d as f64);
    let means = (0..r).map(|_| (0..=p).map(|_| 0.4 * g.sample::<f64, _>(StandardNormal)).collect()).collect();
    let hazards = (0..=r).map(|_| BaseHazard::new(grid, vec![0.1 + 0.2 * g.random::<f64>(), 0.1 + 0.2 * g.random::<f64>()]).unwrap()).collect();
    GaussianFrailtyModel::new(means, c, hazards).unwrap()
}

pub fn random_cohort(g: &mut ChaCha8Rng, n: usize, r: usize, p: usize, t_max: f64) -> Cohort {
    Cohort::new(
        (0..n).map(|_| (0..p).map(|_| g.sample::<f64, _>(StandardNormal)).collect()).collect(),
        (0..n).map(|_| 0.05 + (t_max - 0.05) * g.random::<f64>()).collect(),
        (0..n).map(|_| g.random_range(0..=r)).collect(),
        Some(r),
    )
    .unwrap()
}

pub fn check_gaussian_bound() -> CheckResult {
    let mut g = rng(404);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..10 {
        let mut m = random_gaussian_model(&mut g, 2, 1, 0.3);
        m.mc_samples = 20_000;
        let cohort = random_cohort(&mut g, 30, 2, 1, 5.0);
        let lb = loglik_gaussian_lb(&m, &cohort).map_err(|e| e.to_string())?;
        let mc = loglik_gaussian_mc(&m, &cohort, g.random()).map_err(|e| e.to_string())?;
        worst_excess = worst_excess.max((lb - mc.value) / mc.std_error);
    }
    let mut m = random_gaussian_model(&mut g, 2, 1, 0.0);
    m.covariance.fill(0.0);
    m.mc_samples = 200;
    let cohort = random_cohort(&mut g, 30, 2, 1, 5.0);
    let lb = loglik_gaussian_lb(&m, &cohort).map_err(|e| e.to_string())?;
    let mc = loglik_gaussian_mc(&m, &cohort, 1).map_err(|e| e.to_string())?;
    let gap = (lb - mc.value).abs();
    let detail = format!("max (lb − mc)/SE {worst_excess:.2}, C = 0 gap {gap:.1e}");
    if worst_excess <= 3.0 && gap <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Reparametrisation, relabeling, extreme predictors and the cumulative
/// hazard quadrature.
pub fn check_invariances() -> CheckResult {
    let mut g = rng(505);
    let mut worst_redundancy: f64 = 0.0;
    let mut worst_perm: f64 = 0.0;
    for _ in 0..10 {
        let m = random_model(&mut g, 3, 2, 2, 3, false);
        let cohort = random_cohort(&mut g, 40, 2, 2, 10.0);
        let ll = loglik_latent(&m, &cohort).map_err(|e| e.to_string())?;
        let mut shifted = m.clone();
        let zeta = g.sample::<f64, _>(StandardNormal);
        let r = g.random_range(1..=2);
        shifted.base_hazards[r].knots.iter_mut().for_each(|x| *x *= (-zeta).exp());
        for l in 0..3 {
            shifted.beta_mut(l, r)[0] += zeta;
        }
        let ll2 = loglik_latent(&shifted, &cohort).map_err(|e| e.to_string())?;
        worst_redundancy = worst_redundancy.max(((ll - ll2) / ll).abs());
        let ll3 = loglik_latent(&m.permuted(&[2, 0, 1]), &cohort).map_err(|e| e.to_string())?;
        worst_perm = worst_perm.max(((ll - ll3) / ll).abs());
    }

    let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
    let m = LatentClassModel::new(
        vec![0.5, 0.5],
        vec![vec![vec![0.0, 1.0]], vec![vec![0.0, -1.0]]],
        vec![BaseHazard::constant(grid, 0.1), BaseHazard::constant(grid, 0.1)],
    )
    .map_err(|e| e.to_string())?;
    let extreme = Cohort::new(
        vec![vec![30.0], vec![-30.0], vec![30.0], vec![-30.0]],
        vec![0.5, 0.5, 1.0, 1.0],
        vec![1, 1, 0, 0],
        Some(1),
    )
    .unwrap();
    let ll = loglik_latent(&m, &extreme).map_err(|e| e.to_string())?;

    let grid = TimeGrid::new(0.0, 12.0, 5).unwrap();
    let h = BaseHazard::new(grid, (0..6).map(|_| 0.05 + g.random::<f64>()).collect()).unwrap();
    let mut worst_quad: f64 = 0.0;
    for t in [0.3, 2.7, 6.0, 11.9, 15.0] {
        worst_quad = worst_quad.max((h.cumulative(t) - simpson(0.0, t, 100_000, |s| h.rate(s))).abs());
    }
    let detail = format!(
        "redundancy {worst_redundancy:.1e}, permutation {worst_perm:.1e}, |β·z| = 30 loglik {ll:.3}, quadrature {worst_quad:.1e}"
    );
    if worst_redundancy <= 1e-10 && worst_perm <= 1e-12 && ll.is_finite() && worst_quad <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn check_quadratic_objective() -> CheckResult {
    let target = [1.5, -0.7, 3.2, 0.1];
    let scales = [1.0, 4.0, 0.5, 2.0];
    let mut f = |x: &[f64]| x.iter().zip(&target).zip(&scales).map(|((a, b), s)| s * (a - b).powi(2)).sum::<f64>();
    let cfg = NelderMeadConfig { tolerance: 1e-16, max_iter: 100_000, ..Default::default() };
    let m = nelder_mead(&mut f, &[0.0; 4], &cfg);
    let err = m.x.iter().zip(&target).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
    if err <= 1e-6 {
        Ok(format!("minimiser error {err:.1e}"))
    } else {
        Err(format!("minimiser error {err:.1e} > 1e-6"))
    }
}

/// Probe curvature of a single-class, single-risk, constant-hazard model
/// against its analytic Hessian
/// `Σ_i t_i e^{η+β·z_i} x_i x_iᵀ + I_β` (`x_i = (z_i, 1)`), plus the
/// censoring block `Σ_i t_i e^{η_0}`.
pub fn check_curvature_matches_hessian() -> CheckResult {
    let mut g = rng(606);
    let p = 2;
    let n = 60;
    let cohort = random_cohort(&mut g, n, 1, p, 4.0);
    let grid = TimeGrid::new(0.0, 4.0, 0).unwrap();
    let (xi0, xi1) = (0.15, 0.4);
    let beta = vec![0.0, 0.3, -0.5];
    let m = LatentClassModel::new(
        vec![1.0],
        vec![vec![beta.clone()]],
        vec![BaseHazard::constant(grid, xi0), BaseHazard::constant(grid, xi1)],
    )
    .map_err(|e| e.to_string())?;
    let eb = latent_error_bars(&m, &cohort, &PenaltyConfig::default()).map_err(|e| e.to_string())?;
    // layout: β¹, β², log ξ_0, log ξ_1
    let mut h = DMatrix::<f64>::zeros(4, 4);
    for i in 0..n {
        let z = cohort.covariates(i);
        let t = cohort.time(i);
        let e = xi1 * t * linear_predictor(&beta, z).exp();
        let x = [z[0], z[1], 0.0, 1.0];
        for a in [0, 1, 3] {
            for b in [0, 1, 3] {
                h[(a, b)] += e * x[a] * x[b];
            }
        }
        h[(2, 2)] += xi0 * t;
    }
    h[(0, 0)] += 1.0;
    h[(1, 1)] += 1.0;
    let scale = h.abs().max();
    let err = (&eb.curvature - &h).abs().max() / scale;
    if err <= 1e-3 {
        Ok(format!("relative deviation {err:.1e}"))
    } else {
        Err(format!("relative deviation {err:.1e} > 1e-3 ({:?})", eb.names))
    }
}

/// Fraction of (replication, coefficient) pairs within two reported
/// standard errors of the truth, for Cox and for single-class fits.
pub fn homogeneous_coverage(replications: usize) -> Result<(f64, f64), String> {
    let mut cox_hits = 0;
    let mut latent_hits = 0;
    let mut total = 0;
    for rep in 0..replications {
        let spec = SyntheticSpec {
            class_weights: vec![1.0],
            betas: vec![vec![vec![0.0, 1.0, 0.0, 0.0]]],
            base_rates: vec![0.05],
            censor_time: Some(30.0),
            n_individuals: 400,
            rng_seed: 10_000 + rep as u64,
        };
        let (cohort, _) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
        let truth = [1.0, 0.0, 0.0];
        let cox = cox_fit(&cohort, 1, &CoxConfig::default()).map_err(|e| e.to_string())?;
        let cfg = FitConfig {
            restarts: 1,
            randomization_schedule: vec![0.2, 0.05],
            rng_seed: rep as u64,
            ..Default::default()
        };
        let fit = fit_map(&cohort, 1, 1, &cfg).map_err(|e| e.to_string())?;
        let eb = fit.error_bars.as_ref().ok_or("missing error bars")?;
        for (mu, &b) in truth.iter().enumerate() {
            total += 1;
            if (cox.coefficients[mu] - b).abs() <= 2.0 * cox.std_errors[mu] {
                cox_hits += 1;
            }
            let name = format!("beta[class=1,risk=1,mu={}]", mu + 1);
            let k = eb.names.iter().position(|n| *n == name).ok_or("coefficient missing from error bars")?;
            let sigma = eb.sigma[k].ok_or("singular curvature")?;
            if (fit.model.beta(0, 1)[mu + 1] - b).abs() <= 2.0 * sigma {
                latent_hits += 1;
            }
        }
    }
    Ok((cox_hits as f64 / total as f64, latent_hits as f64 / total as f64))
}

/// Numerical Hessian helper for one-dimensional slices, used to cross-check
/// the probe scheme on an arbitrary objective.
pub fn probe_curvature(f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    curvature_error_bars(f, x, vec![String::new(); x.len()], &default_probe_sizes(), ProbeScheme::Symmetric)
        .unwrap()
        .curvature
}
