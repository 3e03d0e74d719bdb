//! Predictive quantities of a fitted latent-class model.
//!
//! For an individual with covariates `z`, risk `r ≥ 1`:
//!
//! ```text
//! S̃_r(t|z) = Σ_ℓ w_ℓ exp(−e^{β_r^ℓ·z} Λ̂_r(t))                       decontaminated
//! h̃_r(t|z) = λ̂_r(t) Σ_ℓ w_ℓ e^{β_r^ℓ·z − e^{β_r^ℓ·z}Λ̂_r} / Σ_ℓ w_ℓ e^{−e^{β_r^ℓ·z}Λ̂_r}
//! h_r(t|z)  = λ̂_r(t) Σ_ℓ w_ℓ e^{β_r^ℓ·z − E_ℓ} / Σ_ℓ w_ℓ e^{−E_ℓ}       crude
//! F_r(t|z)  = ∫_0^t λ̂_r Σ_ℓ w_ℓ e^{β_r^ℓ·z − E_ℓ}                      incidence
//! ```
//!
//! with `E_ℓ(t) = Σ_{r'=0}^R e^{β_{r'}^ℓ·z} Λ̂_{r'}(t)`. While the censoring
//! coefficients are zero the `r' = 0` term is a common factor `e^{−Λ̂_0}`, which
//! cancels from the crude hazard.

use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::hazard::BasisCache;
use crate::likelihood::log_sum_exp;
use crate::model::LatentClassModel;
use crate::quadrature::{self, GaussLegendre};

/// Which curve to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    DecontaminatedSurvival,
    DecontaminatedHazard,
    CrudeSurvival,
    CrudeHazard,
    CumulativeIncidence,
}

impl CurveKind {
    pub const ALL: [CurveKind; 5] = [
        CurveKind::DecontaminatedSurvival,
        CurveKind::DecontaminatedHazard,
        CurveKind::CrudeSurvival,
        CurveKind::CrudeHazard,
        CurveKind::CumulativeIncidence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::DecontaminatedSurvival => "decontaminated-survival",
            CurveKind::DecontaminatedHazard => "decontaminated-hazard",
            CurveKind::CrudeSurvival => "crude-survival",
            CurveKind::CrudeHazard => "crude-hazard",
            CurveKind::CumulativeIncidence => "cumulative-incidence",
        }
    }

    fn needs_nodes(self) -> bool {
        matches!(self, CurveKind::CrudeSurvival | CurveKind::CumulativeIncidence)
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurveKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown curve kind {s:?}")))
    }
}

/// A sampled curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

/// `n` equally spaced times from `0` to `t_max`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_grid(t: &[f64]) -> Result<()> {
    if t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid("time grid must be finite and nonnegative"));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

fn check_risk(model: &LatentClassModel, r: usize) -> Result<()> {
    if r == 0 || r > model.n_risks() {
        return Err(Error::invalid(format!("risk must be in 1..={}, got {r}", model.n_risks())));
    }
    Ok(())
}

/// `λ̂_r` and `Λ̂_r` of every risk at a list of times.
#[derive(Debug, Clone)]
struct Snapshots {
    width: usize,
    rate: Vec<f64>,
    cum: Vec<f64>,
}

impl Snapshots {
    fn new(model: &LatentClassModel, times: &[f64]) -> Self {
        let width = model.n_risks() + 1;
        let cache = BasisCache::new(*model.grid(), times);
        let mut rate = Vec::with_capacity(times.len() * width);
        let mut cum = Vec::with_capacity(times.len() * width);
        for j in 0..times.len() {
            for h in &model.base_hazards {
                rate.push(cache.rate(j, &h.knots));
                cum.push(cache.cumulative(j, &h.knots));
            }
        }
        Snapshots { width, rate, cum }
    }

    fn rate(&self, j: usize, r: usize) -> f64 {
        self.rate[j * self.width + r]
    }

    fn cum(&self, j: usize) -> &[f64] {
        &self.cum[j * self.width..(j + 1) * self.width]
    }
}

struct Nodes {
    weight: Vec<f64>,
    /// Nodes of grid time `i` are `start[i]..start[i + 1]`.
    start: Vec<usize>,
    snap: Snapshots,
}

/// Curves of one model on one time grid, for any number of covariate
/// vectors. Base-hazard values at the grid (and, for the integrated curves, at
/// the quadrature nodes) are computed once.
pub struct CurveEngine<'m> {
    model: &'m LatentClassModel,
    times: Vec<f64>,
    at_t: Snapshots,
    nodes: OnceLock<Nodes>,
}

/// Per-`z` linear predictors `β_{r}^ℓ·z`, laid out `[ℓ][r]`.
fn predictors(model: &LatentClassModel, z: &[f64]) -> Vec<f64> {
    let w = model.n_risks() + 1;
    let mut lp = vec![0.0; model.n_classes() * w];
    for l in 0..model.n_classes() {
        for r in 0..w {
            lp[l * w + r] = model.linear_predictor(l, r, z);
        }
    }
    lp
}

/// `(log Σ_ℓ w_ℓ e^{lp_r − X_ℓ}, log Σ_ℓ w_ℓ e^{−X_ℓ})` where `X_ℓ` is either
/// the single-risk or the all-risk exposure.
fn mixture_logs(model: &LatentClassModel, lp: &[f64], cum: &[f64], r: usize, all_risks: bool, buf: &mut Vec<f64>) -> (f64, f64) {
    let w = cum.len();
    let n_classes = model.n_classes();
    buf.clear();
    buf.resize(2 * n_classes, 0.0);
    for l in 0..n_classes {
        let row = &lp[l * w..(l + 1) * w];
        let exposure = if all_risks {
            row.iter().zip(cum).map(|(a, c)| if *c == 0.0 { 0.0 } else { c * a.exp() }).sum()
        } else {
            cum[r] * row[r].exp()
        };
        let lw = model.weights[l].ln();
        buf[l] = lw + row[r] - exposure;
        buf[n_classes + l] = lw - exposure;
    }
    (log_sum_exp(&buf[..n_classes]), log_sum_exp(&buf[n_classes..]))
}

impl<'m> CurveEngine<'m> {
    pub fn new(model: &'m LatentClassModel, times: &[f64]) -> Result<Self> {
        check_grid(times)?;
        Ok(CurveEngine { model, times: times.to_vec(), at_t: Snapshots::new(model, times), nodes: OnceLock::new() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn nodes(&self) -> &Nodes {
        self.nodes.get_or_init(|| {
            let mut at = Vec::new();
            let mut weight = Vec::new();
            let mut start = vec![0];
            for &t in &self.times {
                quadrature::for_each_node(t, |s, w| {
                    at.push(s);
                    weight.push(w);
                });
                start.push(at.len());
            }
            Nodes { weight, start, snap: Snapshots::new(self.model, &at) }
        })
    }

    /// Local (non-integrated) quantity at snapshot `j`.
    fn local(&self, snap: &Snapshots, j: usize, lp: &[f64], r: usize, kind: CurveKind, buf: &mut Vec<f64>) -> f64 {
        let cum = snap.cum(j);
        match kind {
            CurveKind::DecontaminatedSurvival => {
                let w = cum.len();
                (0..self.model.n_classes())
                    .map(|l| self.model.weights[l] * (-cum[r] * lp[l * w + r].exp()).exp())
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            }
            CurveKind::DecontaminatedHazard | CurveKind::CrudeHazard => {
                let (num, den) = mixture_logs(self.model, lp, cum, r, kind == CurveKind::CrudeHazard, buf);
                snap.rate(j, r) * (num - den).exp()
            }
            // integrand of the incidence
            CurveKind::CumulativeIncidence => {
                let (num, _) = mixture_logs(self.model, lp, cum, r, true, buf);
                snap.rate(j, r) * num.exp()
            }
            CurveKind::CrudeSurvival => unreachable!("crude survival is integrated"),
        }
    }

    /// `kind` for risk `r` at covariates `z`, one value per grid time.
    pub fn curve(&self, kind: CurveKind, r: usize, z: &[f64]) -> Result<Vec<f64>> {
        check_risk(self.model, r)?;
        if z.len() != self.model.n_covariates() {
            return Err(Error::Dimension(format!("expected {} covariates, got {}", self.model.n_covariates(), z.len())));
        }
        let lp = predictors(self.model, z);
        let mut buf = Vec::new();
        if !kind.needs_nodes() {
            return Ok((0..self.times.len()).map(|j| self.local(&self.at_t, j, &lp, r, kind, &mut buf)).collect());
        }
        let nodes = self.nodes();
        let local_kind = if kind == CurveKind::CrudeSurvival { CurveKind::CrudeHazard } else { kind };
        Ok((0..self.times.len())
            .map(|i| {
                let integral: f64 = (nodes.start[i]..nodes.start[i + 1])
                    .map(|j| nodes.weight[j] * self.local(&nodes.snap, j, &lp, r, local_kind, &mut buf))
                    .sum();
                match kind {
                    CurveKind::CrudeSurvival => (-integral).exp(),
                    _ => integral.clamp(0.0, 1.0),
                }
            })
            .collect())
    }

    /// Average of the curves of the given cohort rows (all rows if `None`).
    pub fn cohort_average(&self, kind: CurveKind, r: usize, cohort: &Cohort, rows: Option<&[usize]>) -> Result<Vec<f64>> {
        let all: Vec<usize>;
        let rows = match rows {
            Some(rows) => rows,
            None => {
                all = (0..cohort.len()).collect();
                &all
            }
        };
        if rows.is_empty() {
            return Err(Error::NoRecords);
        }
        let mut acc = vec![0.0; self.times.len()];
        for &i in rows {
            for (a, v) in acc.iter_mut().zip(self.curve(kind, r, cohort.covariates(i))?) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= rows.len() as f64);
        Ok(acc)
    }
}

/// Panics unless `1 ≤ r ≤ R`.
fn assert_risk(model: &LatentClassModel, r: usize) {
    assert!(r >= 1 && r <= model.n_risks(), "risk {r} outside 1..={}", model.n_risks());
}

/// `S̃_r(t|z)`. Panics unless `1 ≤ r ≤ R`.
pub fn decontaminated_survival(model: &LatentClassModel, r: usize, z: &[f64], t: f64) -> f64 {
    assert_risk(model, r);
    let cum = model.base_hazards[r].cumulative(t);
    (0..model.n_classes())
        .map(|l| model.weights[l] * (-cum * model.linear_predictor(l, r, z).exp()).exp())
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// `h̃_r(t|z) = −d/dt log S̃_r(t|z)`. Panics unless `1 ≤ r ≤ R`.
pub fn decontaminated_hazard(model: &LatentClassModel, r: usize, z: &[f64], t: f64) -> f64 {
    point(model, CurveKind::DecontaminatedHazard, r, z, t)
}

/// Cohort-level hazard of risk `r` among survivors at `t`. Panics unless
/// `1 ≤ r ≤ R`.
pub fn crude_hazard(model: &LatentClassModel, r: usize, z: &[f64], t: f64) -> f64 {
    point(model, CurveKind::CrudeHazard, r, z, t)
}

/// `exp(−∫_0^t h_r(s|z) ds)`. Panics unless `1 ≤ r ≤ R`.
pub fn crude_survival(model: &LatentClassModel, r: usize, z: &[f64], t: f64) -> f64 {
    point(model, CurveKind::CrudeSurvival, r, z, t)
}

/// Probability that risk `r` is observed first, by time `t`. Panics unless
/// `1 ≤ r ≤ R`.
pub fn cumulative_incidence(model: &LatentClassModel, r: usize, z: &[f64], t: f64) -> f64 {
    point(model, CurveKind::CumulativeIncidence, r, z, t)
}

fn point(model: &LatentClassModel, kind: CurveKind, r: usize, z: &[f64], t: f64) -> f64 {
    assert_risk(model, r);
    assert!(t.is_finite() && t >= 0.0, "time must be finite and nonnegative, got {t}");
    let engine = CurveEngine { model, times: vec![t], at_t: Snapshots::new(model, &[t]), nodes: OnceLock::new() };
    engine.curve(kind, r, z).expect("risk and dimensions checked")[0]
}

/// `exp(−Σ_ℓ w_ℓ log w_ℓ)`; zero weights contribute nothing.
pub fn effective_classes(weights: &[f64]) -> f64 {
    let entropy: f64 = weights.iter().filter(|&&w| w > 0.0).map(|w| -w * w.ln()).sum();
    entropy.exp()
}

/// Retrospective class membership probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPosterior {
    /// `probabilities[i][ℓ]`.
    pub probabilities: Vec<Vec<f64>>,
    /// `argmax_ℓ p_iℓ`, first maximum on ties.
    pub assignment: Vec<usize>,
}

impl ClassPosterior {
    pub fn n_classes(&self) -> usize {
        self.probabilities.first().map_or(0, |p| p.len())
    }

    /// Position of individual `i` in the equilateral simplex triangle with
    /// corners `(0,0)`, `(1,0)`, `(½, √3/2)` for classes 1–3.
    pub fn simplex_coordinates(&self, i: usize) -> (f64, f64) {
        let p = &self.probabilities[i];
        let p2 = p.get(1).copied().unwrap_or(0.0);
        let p3 = p.get(2).copied().unwrap_or(0.0);
        (p2 + 0.5 * p3, p3 * 3f64.sqrt() / 2.0)
    }
}

/// `p_iℓ ∝ w_ℓ exp(δ̄_{0r_i} β_{r_i}^ℓ·z_i − Σ_{r'} e^{β_{r'}^ℓ·z_i} Λ̂_{r'}(t_i))`.
/// For censored individuals the first term is absent unless the censoring
/// coefficients are free.
pub fn class_posterior(model: &LatentClassModel, cohort: &Cohort) -> Result<ClassPosterior> {
    if model.n_risks() != cohort.n_risks() || model.n_covariates() != cohort.n_covariates() {
        return Err(Error::Dimension("model and cohort dimensions differ".into()));
    }
    let snap = Snapshots::new(model, cohort.times());
    let n_classes = model.n_classes();
    let w = model.n_risks() + 1;
    let mut probabilities = Vec::with_capacity(cohort.len());
    let mut assignment = Vec::with_capacity(cohort.len());
    let mut logs = vec![0.0; n_classes];
    for i in 0..cohort.len() {
        let lp = predictors(model, cohort.covariates(i));
        let r_i = cohort.label(i);
        let cum = snap.cum(i);
        for (l, a) in logs.iter_mut().enumerate() {
            let row = &lp[l * w..(l + 1) * w];
            let lead = if r_i != 0 || model.free_censoring { row[r_i] } else { 0.0 };
            let exposure: f64 = row.iter().zip(cum).map(|(x, c)| if *c == 0.0 { 0.0 } else { c * x.exp() }).sum();
            *a = model.weights[l].ln() + lead - exposure;
        }
        let norm = log_sum_exp(&logs);
        if !norm.is_finite() {
            return Err(Error::NonFinite(i));
        }
        let p: Vec<f64> = logs.iter().map(|a| (a - norm).exp()).collect();
        let arg = p
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (l, &v)| if v > best.1 { (l, v) } else { best })
            .0;
        probabilities.push(p);
        assignment.push(arg);
    }
    Ok(ClassPosterior { probabilities, assignment })
}

/// Largest fraction of individuals whose hard assignment agrees with the true
/// class, over all relabelings of the fitted classes. Returns the fraction
/// and the relabeling `fitted → true`.
pub fn classification_fraction(assigned: &[usize], truth: &[usize]) -> Result<(f64, Vec<usize>)> {
    if assigned.len() != truth.len() {
        return Err(Error::Dimension(format!("{} assignments for {} true labels", assigned.len(), truth.len())));
    }
    if assigned.is_empty() {
        return Err(Error::NoRecords);
    }
    let n_fit = assigned.iter().copied().max().unwrap_or(0) + 1;
    let n_true = truth.iter().copied().max().unwrap_or(0) + 1;
    let n = n_fit.max(n_true);
    if n > 9 {
        return Err(Error::invalid("classification fraction supports at most 9 classes"));
    }
    let mut counts = vec![vec![0usize; n]; n];
    for (&a, &t) in assigned.iter().zip(truth) {
        counts[a][t] += 1;
    }
    let mut best = (0usize, (0..n).collect::<Vec<_>>());
    let mut perm: Vec<usize> = (0..n).collect();
    permutations(&mut perm, 0, &mut |p| {
        let hits: usize = (0..n).map(|a| counts[a][p[a]]).sum();
        if hits > best.0 {
            best = (hits, p.to_vec());
        }
    });
    best.1.truncate(n_fit);
    Ok((best.0 as f64 / assigned.len() as f64, best.1))
}

fn permutations(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permutations(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Quartile band of one covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    /// Lower quartile, `z ≤ −z_Q`.
    #[serde(rename = "LQ")]
    Lower,
    /// Upper quartile, `z ≥ z_Q`.
    #[serde(rename = "UQ")]
    Upper,
    /// Inter-quartile range, `|z| < z_Q`.
    #[serde(rename = "IQ")]
    Inter,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Lower => "LQ",
            Band::Upper => "UQ",
            Band::Inter => "IQ",
        }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LQ" | "lq" => Ok(Band::Lower),
            "UQ" | "uq" => Ok(Band::Upper),
            "IQ" | "iq" => Ok(Band::Inter),
            _ => Err(Error::invalid(format!("unknown band {s:?}; expected LQ, UQ or IQ"))),
        }
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Upper quartile point of the standard normal, `Φ̄(z_Q) = ¼`.
pub fn quartile_point() -> f64 {
    standard_normal().inverse_cdf(0.75)
}

/// Where the upper-quartile integral is cut off.
pub const BAND_TAIL: f64 = 8.0;
const BAND_NODES: usize = 64;

/// Covariate interval of the band.
fn band_interval(band: Band) -> (f64, f64) {
    let zq = quartile_point();
    match band {
        Band::Lower => (-BAND_TAIL, -zq),
        Band::Upper => (zq, BAND_TAIL),
        Band::Inter => (-zq, zq),
    }
}

/// Averages `kind` over covariate `covariate_index` drawn from the standard
/// normal restricted to `band`, other covariates held at `base` (all zero when
/// `None`). 64-node Gauss-Legendre on the band.
pub fn band_curve(
    model: &LatentClassModel,
    kind: CurveKind,
    r: usize,
    covariate_index: usize,
    band: Band,
    t_grid: &[f64],
    base: Option<&[f64]>,
) -> Result<Curve> {
    if covariate_index >= model.n_covariates() {
        return Err(Error::invalid(format!("covariate index {covariate_index} out of range")));
    }
    let mut z = match base {
        Some(b) if b.len() == model.n_covariates() => b.to_vec(),
        Some(b) => return Err(Error::Dimension(format!("base covariates have length {}", b.len()))),
        None => vec![0.0; model.n_covariates()],
    };
    let engine = CurveEngine::new(model, t_grid)?;
    let (a, b) = band_interval(band);
    let rule = GaussLegendre::new(BAND_NODES);
    let normal = standard_normal();
    let mut acc = vec![0.0; t_grid.len()];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    // normalised by the rule's own band mass so constants average exactly
    let mut mass = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let zc = mid + half * x;
        z[covariate_index] = zc;
        let weight = half * w * normal.pdf(zc);
        mass += weight;
        for (s, v) in acc.iter_mut().zip(engine.curve(kind, r, &z)?) {
            *s += weight * v;
        }
    }
    acc.iter_mut().for_each(|s| *s /= mass);
    Ok(Curve { t: t_grid.to_vec(), value: acc })
}

/// Band-averaged decontaminated survival of risk `r`, other covariates at
/// zero.
pub fn quantile_band_curve(model: &LatentClassModel, r: usize, covariate_index: usize, band: Band, t_grid: &[f64]) -> Result<Curve> {
    band_curve(model, CurveKind::DecontaminatedSurvival, r, covariate_index, band, t_grid, None)
}

/// Cohort rows whose covariate falls in the empirical quartile band.
pub fn empirical_band_rows(cohort: &Cohort, covariate_index: usize, band: Band) -> Result<Vec<usize>> {
    if covariate_index >= cohort.n_covariates() {
        return Err(Error::invalid(format!("covariate index {covariate_index} out of range")));
    }
    let mut values: Vec<f64> = (0..cohort.len()).map(|i| cohort.covariates(i)[covariate_index]).collect();
    if values.is_empty() {
        return Err(Error::NoRecords);
    }
    values.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (values.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
    };
    let (q1, q3) = (q(0.25), q(0.75));
    Ok((0..cohort.len())
        .filter(|&i| {
            let v = cohort.covariates(i)[covariate_index];
            match band {
                Band::Lower => v <= q1,
                Band::Upper => v >= q3,
                Band::Inter => v > q1 && v < q3,
            }
        })
        .collect())
}

/// Band average over the cohort members in the empirical quartile band.
pub fn empirical_band_curve(
    model: &LatentClassModel,
    kind: CurveKind,
    r: usize,
    cohort: &Cohort,
    covariate_index: usize,
    band: Band,
    t_grid: &[f64],
) -> Result<Curve> {
    let rows = empirical_band_rows(cohort, covariate_index, band)?;
    let engine = CurveEngine::new(model, t_grid)?;
    Ok(Curve { t: t_grid.to_vec(), value: engine.cohort_average(kind, r, cohort, Some(&rows))? })
}

/// `kind` averaged over cohort members (curves averaged, not covariates).
pub fn cohort_average_curve(model: &LatentClassModel, kind: CurveKind, r: usize, cohort: &Cohort, t_grid: &[f64]) -> Result<Curve> {
    let engine = CurveEngine::new(model, t_grid)?;
    Ok(Curve { t: t_grid.to_vec(), value: engine.cohort_average(kind, r, cohort, None)? })
}
