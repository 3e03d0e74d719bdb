//! Downhill simplex minimisation, alternated with random kicks of decreasing
//! amplitude around the best point found so far.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_iter: usize,
    /// Converged once `max f − min f` over the simplex drops below this.
    pub tolerance: f64,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_iter: 10_000,
            tolerance: 1e-8,
            initial_step: 0.1,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `f` from `x0`. Non-finite values count as `+∞`, so the search
/// never accepts a point where `f` is undefined. The returned value is never
/// larger than `f(x0)`.
pub fn nelder_mead(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        finite_or_inf(f(x))
    };
    if n == 0 {
        let value = eval(x0, &mut evaluations);
        return Minimum { x: Vec::new(), value, iterations: 0, evaluations, converged: true };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for j in 0..n {
        let mut v = x0.to_vec();
        v[j] += cfg.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        let spread = values[worst] - values[best];
        if spread.is_finite() && spread < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &idx in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        let along = |out: &mut [f64], centroid: &[f64], towards: &[f64], coef: f64| {
            for ((o, c), w) in out.iter_mut().zip(centroid).zip(towards) {
                *o = c + coef * (c - w);
            }
        };

        along(&mut trial, &centroid, &simplex[worst], cfg.reflection);
        let f_reflect = eval(&trial, &mut evaluations);

        if f_reflect < values[best] {
            along(&mut trial2, &centroid, &simplex[worst], cfg.reflection * cfg.expansion);
            let f_expand = eval(&trial2, &mut evaluations);
            if f_expand < f_reflect {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_expand;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[second_worst] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = f_reflect;
            continue;
        }
        if f_reflect < values[worst] {
            along(&mut trial2, &centroid, &simplex[worst], cfg.reflection * cfg.contraction);
            let f_contract = eval(&trial2, &mut evaluations);
            if f_contract <= f_reflect {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_contract;
                continue;
            }
        } else {
            along(&mut trial2, &centroid, &simplex[worst], -cfg.contraction);
            let f_contract = eval(&trial2, &mut evaluations);
            if f_contract < values[worst] {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_contract;
                continue;
            }
        }
        // shrink towards the best vertex
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            for (x, a) in simplex[idx].iter_mut().zip(&anchor) {
                *x = a + cfg.shrink * (*x - a);
            }
            values[idx] = eval(&simplex[idx], &mut evaluations);
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum { x: simplex[best].clone(), value: values[best], iterations, evaluations, converged }
}

/// Simplex runs separated by random perturbations of the best point.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedConfig {
    pub simplex: NelderMeadConfig,
    /// Standard deviation of the Gaussian kick before each extra round;
    /// must be strictly decreasing.
    pub amplitudes: Vec<f64>,
}

impl Default for RandomizedConfig {
    fn default() -> Self {
        RandomizedConfig { simplex: NelderMeadConfig::default(), amplitudes: geometric_schedule(0.5, 0.5, 8) }
    }
}

/// `start, start·factor, …` (`rounds` values).
pub fn geometric_schedule(start: f64, factor: f64, rounds: usize) -> Vec<f64> {
    (0..rounds).map(|k| start * factor.powi(k as i32)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedMinimum {
    pub best: Minimum,
    /// Best value after the initial run and after each randomisation round.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Runs the simplex from `x0`, then for every amplitude `a` restarts it from
/// `best + a·N(0, I)` and keeps the better result. `history` is nonincreasing.
pub fn minimize_randomized(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &RandomizedConfig,
    rng: &mut Rng,
    mut on_round: impl FnMut(usize, f64),
) -> RandomizedMinimum {
    let mut best = nelder_mead(f, x0, &cfg.simplex);
    let mut evaluations = best.evaluations;
    let mut history = vec![best.value];
    on_round(0, best.value);
    for (round, &amp) in cfg.amplitudes.iter().enumerate() {
        let start: Vec<f64> = best.x.iter().map(|x| x + amp * rng.sample::<f64, _>(StandardNormal)).collect();
        let candidate = nelder_mead(f, &start, &cfg.simplex);
        evaluations += candidate.evaluations;
        if candidate.value < best.value {
            best = candidate;
        }
        history.push(best.value);
        on_round(round + 1, best.value);
    }
    RandomizedMinimum { best, history, evaluations }
}
