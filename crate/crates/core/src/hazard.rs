//! Base hazards interpolated by normalised Gaussian kernels over `K + 1`
//! equidistant knots:
//!
//! ```text
//! λ(t|ξ) = Σ_k ξ_k exp(-(t - t̃_k)²/2σ²) / Σ_k exp(-(t - t̃_k)²/2σ²),
//! t̃_k = t_min + k (t_max - t_min) / K,   σ = (t_max - t_min) / 2K
//! ```
//!
//! `λ` is a convex combination of the knot values, so it stays within
//! `[min ξ, max ξ]`. Its integral `Λ(t)` uses the composite Gauss-Legendre rule
//! of [`crate::quadrature`]. Because `λ` is linear in `ξ`, so is `Λ`; a
//! [`BasisCache`] stores the per-knot integrals at the data times once and turns
//! every later evaluation of `Λ(t_i)` into a dot product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Knot placement shared by every risk's base hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    /// Number of intervals; there are `k + 1` knots.
    pub k: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, k: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min >= 0.0 && t_max >= t_min) {
            return Err(Error::invalid(format!("bad time bounds [{t_min}, {t_max}]")));
        }
        Ok(TimeGrid { t_min, t_max, k })
    }

    /// Grid spanning the observed times of `cohort`.
    pub fn for_cohort(cohort: &crate::Cohort, k: usize) -> Result<Self> {
        let (lo, hi) = cohort.time_bounds()?;
        Self::new(lo, hi, k)
    }

    pub fn n_knots(&self) -> usize {
        self.k + 1
    }

    pub fn knot_time(&self, k: usize) -> f64 {
        if self.k == 0 {
            return self.t_min;
        }
        self.t_min + (k as f64 / self.k as f64) * (self.t_max - self.t_min)
    }

    /// Kernel width, floored for degenerate (single-time) data.
    pub fn sigma(&self) -> f64 {
        let floor = f64::max(1e-6, 1e-3 * self.t_max);
        if self.k == 0 {
            return floor;
        }
        f64::max((self.t_max - self.t_min) / (2.0 * self.k as f64), floor)
    }

    /// Normalised kernel weights at `t`, written into `out` (length `k + 1`).
    pub fn weights_into(&self, t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_knots());
        if out.len() == 1 {
            out[0] = 1.0;
            return;
        }
        let inv = 1.0 / (2.0 * self.sigma().powi(2));
        let mut max_e = f64::NEG_INFINITY;
        for (k, o) in out.iter_mut().enumerate() {
            let d = t - self.knot_time(k);
            *o = -d * d * inv;
            max_e = max_e.max(*o);
        }
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max_e).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    /// `∫_0^t` of every normalised kernel weight, accumulated into `out`.
    pub fn cumulative_weights_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut w = vec![0.0; self.n_knots()];
        quadrature::for_each_node(t, |s, qw| {
            self.weights_into(s, &mut w);
            for (o, wk) in out.iter_mut().zip(&w) {
                *o += qw * wk;
            }
        });
    }
}

/// A nonnegative base hazard `λ(t|ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseHazard {
    pub grid: TimeGrid,
    /// `ξ_0 … ξ_K`, all `≥ 0`.
    pub knots: Vec<f64>,
}

impl BaseHazard {
    pub fn new(grid: TimeGrid, knots: Vec<f64>) -> Result<Self> {
        if knots.len() != grid.n_knots() {
            return Err(Error::Dimension(format!("{} knot values for K = {}", knots.len(), grid.k)));
        }
        if knots.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("knot values must be finite and nonnegative"));
        }
        Ok(BaseHazard { grid, knots })
    }

    pub fn constant(grid: TimeGrid, rate: f64) -> Self {
        BaseHazard { grid, knots: vec![rate; grid.n_knots()] }
    }

    pub fn rate(&self, t: f64) -> f64 {
        if self.knots.len() == 1 {
            return self.knots[0];
        }
        let mut w = vec![0.0; self.knots.len()];
        self.grid.weights_into(t, &mut w);
        dot(&w, &self.knots)
    }

    pub fn checked_rate(&self, t: f64) -> Result<f64> {
        if t.is_nan() {
            return Err(Error::invalid("NaN time"));
        }
        Ok(self.rate(t))
    }

    /// `Λ(t) = ∫_0^t λ(s) ds`; exactly zero at `t = 0`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if self.knots.len() == 1 {
            return self.knots[0] * t.max(0.0);
        }
        let mut w = vec![0.0; self.knots.len()];
        let mut acc = 0.0;
        quadrature::for_each_node(t, |s, qw| {
            self.grid.weights_into(s, &mut w);
            acc += qw * dot(&w, &self.knots);
        });
        acc
    }

    pub fn min_knot(&self) -> f64 {
        self.knots.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_knot(&self) -> f64 {
        self.knots.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-time kernel weights and their integrals for a fixed list of times.
#[derive(Debug, Clone)]
pub struct BasisCache {
    grid: TimeGrid,
    rate: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BasisCache {
    pub fn new(grid: TimeGrid, times: &[f64]) -> Self {
        let m = grid.n_knots();
        let mut rate = vec![0.0; times.len() * m];
        let mut cumulative = vec![0.0; times.len() * m];
        for (i, &t) in times.iter().enumerate() {
            grid.weights_into(t, &mut rate[i * m..(i + 1) * m]);
            if m == 1 {
                cumulative[i] = t;
            } else {
                grid.cumulative_weights_into(t, &mut cumulative[i * m..(i + 1) * m]);
            }
        }
        BasisCache { grid, rate, cumulative }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.rate.len() / self.grid.n_knots()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    /// `λ(t_i|ξ)`.
    pub fn rate(&self, i: usize, knots: &[f64]) -> f64 {
        let m = knots.len();
        dot(&self.rate[i * m..(i + 1) * m], knots)
    }

    /// `Λ(t_i|ξ)`.
    pub fn cumulative(&self, i: usize, knots: &[f64]) -> f64 {
        let m = knots.len();
        dot(&self.cumulative[i * m..(i + 1) * m], knots)
    }
}
