//! Browser demo: simulate a benchmark cohort, fit a latent-class model to it
//! and compare decontaminated with crude survival.
//!
//! Every exported method returns a JSON string; `www/index.html` draws it.

use hetcr::baselines::kaplan_meier;
use hetcr::cohort::generate_synthetic;
use hetcr::estimation::{fit_map, FitConfig, FitReport};
use hetcr::inference::{band_curve, classification_fraction, class_posterior, cohort_average_curve, uniform_grid, Band, CurveKind};
use hetcr::optimize::geometric_schedule;
use hetcr::{Cohort, Error, Result, SyntheticSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const POINTS: usize = 101;

fn preset(name: &str, n: usize, seed: u64) -> Result<SyntheticSpec> {
    Ok(match name {
        "two-class-a" => SyntheticSpec::two_class_benchmark(None, n, seed),
        "two-class-b" => SyntheticSpec::two_class_benchmark(Some(([3.0, 0.0, 0.0], [0.0; 3])), n, seed),
        "two-class-c" => SyntheticSpec::two_class_benchmark(Some(([-3.0, 0.0, 0.0], [0.0; 3])), n, seed),
        "frailty-offset" => SyntheticSpec::frailty_offset_benchmark(n, 25.0, seed),
        other => return Err(Error::invalid(format!("unknown preset {other:?}"))),
    })
}

#[derive(Serialize)]
struct Line {
    label: String,
    t: Vec<f64>,
    value: Vec<f64>,
}

#[derive(Serialize)]
struct Summary {
    individuals: usize,
    events: Vec<usize>,
    censored: usize,
    t_max: f64,
    curves: Vec<Line>,
}

#[derive(Serialize)]
struct FitSummary {
    classes: usize,
    psi: f64,
    weights: Vec<f64>,
    /// Primary-risk frailty and regression coefficients per class.
    primary: Vec<Vec<f64>>,
    classification_fraction: f64,
    curves: Vec<Line>,
}

/// A simulated cohort and, once fitted, its model.
pub struct Demo {
    cohort: Cohort,
    truth: Vec<usize>,
    grid: Vec<f64>,
    fit: Option<FitReport>,
}

impl Demo {
    pub fn simulate(name: &str, n: usize, seed: u64) -> Result<Self> {
        let (cohort, truth) = generate_synthetic(&preset(name, n, seed)?)?;
        // covariates are standard normal already; the fit expects the normalised scale
        let cohort = cohort.normalized()?;
        let (_, t_max) = cohort.time_bounds()?;
        Ok(Demo { cohort, truth, grid: uniform_grid(t_max, POINTS), fit: None })
    }

    fn km_line(&self, label: &str, cohort: &Cohort) -> Result<Line> {
        let km = kaplan_meier(cohort, 1)?;
        Ok(Line { label: label.into(), t: self.grid.clone(), value: self.grid.iter().map(|&t| km.eval(t)).collect() })
    }

    pub fn summary(&self) -> Result<String> {
        let c = &self.cohort;
        let summary = Summary {
            individuals: c.len(),
            events: (1..=c.n_risks()).map(|r| c.event_count(r)).collect(),
            censored: c.event_count(0),
            t_max: *self.grid.last().unwrap_or(&0.0),
            curves: vec![self.km_line("Kaplan-Meier", c)?],
        };
        to_json(&summary)
    }

    pub fn fit(&mut self, classes: usize, restarts: usize, seed: u64) -> Result<String> {
        let cfg = FitConfig {
            restarts,
            randomization_schedule: geometric_schedule(0.5, 0.5, 3),
            rng_seed: seed,
            compute_error_bars: false,
            ..FitConfig::default()
        };
        let report = fit_map(&self.cohort, classes, 1, &cfg)?;
        let model = &report.model;
        let posterior = class_posterior(model, &self.cohort)?;
        let (fraction, _) = classification_fraction(&posterior.assignment, &self.truth)?;
        let average = |kind: CurveKind, label: &str| -> Result<Line> {
            let c = cohort_average_curve(model, kind, 1, &self.cohort, &self.grid)?;
            Ok(Line { label: label.into(), t: c.t, value: c.value })
        };
        let summary = FitSummary {
            classes,
            psi: report.psi,
            weights: model.weights.clone(),
            primary: (0..classes).map(|l| model.beta(l, 1).to_vec()).collect(),
            classification_fraction: fraction,
            curves: vec![
                self.km_line("Kaplan-Meier", &self.cohort)?,
                average(CurveKind::DecontaminatedSurvival, "decontaminated")?,
                average(CurveKind::CrudeSurvival, "crude")?,
            ],
        };
        self.fit = Some(report);
        to_json(&summary)
    }

    /// Decontaminated and crude survival over the quartile bands of one
    /// covariate (0-based), other covariates at their mean.
    pub fn bands(&self, covariate: usize) -> Result<String> {
        let report = self.fit.as_ref().ok_or_else(|| Error::invalid("fit a model first"))?;
        let mut lines = Vec::new();
        for band in [Band::Lower, Band::Inter, Band::Upper] {
            for (kind, name) in [(CurveKind::DecontaminatedSurvival, "decontaminated"), (CurveKind::CrudeSurvival, "crude")] {
                let c = band_curve(&report.model, kind, 1, covariate, band, &self.grid, None)?;
                lines.push(Line { label: format!("{} {name}", band.label()), t: c.t, value: c.value });
            }
        }
        to_json(&lines)
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::invalid(e.to_string()))
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// JavaScript handle around [`Demo`].
#[wasm_bindgen]
pub struct Session(Demo);

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, n: usize, seed: u32) -> std::result::Result<Session, JsError> {
        Demo::simulate(preset, n, seed as u64).map(Session).map_err(js)
    }

    pub fn summary(&self) -> std::result::Result<String, JsError> {
        self.0.summary().map_err(js)
    }

    pub fn fit(&mut self, classes: usize, restarts: usize, seed: u32) -> std::result::Result<String, JsError> {
        self.0.fit(classes, restarts, seed as u64).map_err(js)
    }

    pub fn bands(&self, covariate: usize) -> std::result::Result<String, JsError> {
        self.0.bands(covariate).map_err(js)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_fit_and_bands() {
        let mut demo = Demo::simulate("two-class-b", 300, 4).unwrap();
        let s: serde_json::Value = serde_json::from_str(&demo.summary().unwrap()).unwrap();
        assert_eq!(s["individuals"], 300);
        assert!(demo.bands(0).is_err());

        let f: serde_json::Value = serde_json::from_str(&demo.fit(2, 1, 1).unwrap()).unwrap();
        assert_eq!(f["weights"].as_array().unwrap().len(), 2);
        assert!(f["classification_fraction"].as_f64().unwrap() > 0.5);
        let curves = f["curves"].as_array().unwrap();
        assert_eq!(curves.len(), 3);
        for c in curves {
            assert_eq!(c["value"][0], 1.0, "{}", c["label"]);
        }

        let b: serde_json::Value = serde_json::from_str(&demo.bands(0).unwrap()).unwrap();
        assert_eq!(b.as_array().unwrap().len(), 6);
        assert!(matches!(Demo::simulate("nope", 10, 1), Err(Error::InvalidInput(_))));
    }
}
