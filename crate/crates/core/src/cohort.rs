//! Survival data: one `(time, event label)` pair plus a covariate vector per
//! individual. Label `0` is end-of-trial censoring, labels `1..=R` are the
//! true risks.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Per-column affine map applied by [`Cohort::normalized`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.sd
    }

    pub fn invert(&self, normalized: f64) -> f64 {
        normalized * self.sd + self.mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    n_risks: usize,
    n_covariates: usize,
    covariate_names: Vec<String>,
    /// Row-major `N × p`.
    covariates: Vec<f64>,
    times: Vec<f64>,
    labels: Vec<usize>,
    normalization: Option<Vec<Standardization>>,
}

impl Cohort {
    /// Builds a cohort from rows of covariates. `n_risks = None` infers `R` as
    /// the largest event label.
    pub fn new(
        covariates: Vec<Vec<f64>>,
        times: Vec<f64>,
        labels: Vec<usize>,
        n_risks: Option<usize>,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::NoRecords);
        }
        if covariates.len() != n || labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} times, {} labels, {} covariate rows",
                n,
                labels.len(),
                covariates.len()
            )));
        }
        let p = covariates[0].len();
        let mut flat = Vec::with_capacity(n * p);
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dimension(format!("row {i} has {} covariates, expected {p}", row.len())));
            }
            flat.extend_from_slice(row);
        }
        let names = (1..=p).map(|j| format!("z{j}")).collect();
        Self::from_flat(flat, p, names, times, labels, n_risks)
    }

    fn from_flat(
        covariates: Vec<f64>,
        p: usize,
        covariate_names: Vec<String>,
        times: Vec<f64>,
        labels: Vec<usize>,
        n_risks: Option<usize>,
    ) -> Result<Self> {
        let max_label = labels.iter().copied().max().unwrap_or(0);
        let n_risks = n_risks.unwrap_or(max_label);
        if max_label > n_risks {
            return Err(Error::invalid(format!("event label {max_label} exceeds R = {n_risks}")));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::invalid(format!("individual {i}: event time {t} is not finite and nonnegative")));
            }
        }
        if let Some(i) = covariates.iter().position(|z| !z.is_finite()) {
            return Err(Error::invalid(format!("individual {}: non-finite covariate", i / p.max(1))));
        }
        Ok(Cohort {
            n_risks,
            n_covariates: p,
            covariate_names,
            covariates,
            times,
            labels,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_risks(&self) -> usize {
        self.n_risks
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.n_covariates..(i + 1) * self.n_covariates]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn normalization(&self) -> Option<&[Standardization]> {
        self.normalization.as_deref()
    }

    /// Number of records with label `r`.
    pub fn event_count(&self, r: usize) -> usize {
        self.labels.iter().filter(|&&l| l == r).count()
    }

    pub fn total_time(&self) -> f64 {
        self.times.iter().sum()
    }

    /// Smallest and largest observed time.
    pub fn time_bounds(&self) -> Result<(f64, f64)> {
        if self.is_empty() {
            return Err(Error::NoRecords);
        }
        let lo = self.times.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }

    /// Overrides `R`, e.g. when a risk has no observed events.
    pub fn with_n_risks(mut self, n_risks: usize) -> Result<Self> {
        if self.labels.iter().any(|&l| l > n_risks) {
            return Err(Error::invalid(format!("event labels exceed R = {n_risks}")));
        }
        self.n_risks = n_risks;
        Ok(self)
    }

    /// Sub-cohort of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut covariates = Vec::with_capacity(rows.len() * self.n_covariates);
        for &i in rows {
            covariates.extend_from_slice(self.covariates(i));
        }
        Cohort {
            n_risks: self.n_risks,
            n_covariates: self.n_covariates,
            covariate_names: self.covariate_names.clone(),
            covariates,
            times: rows.iter().map(|&i| self.times[i]).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            normalization: self.normalization.clone(),
        }
    }

    /// Rescales every covariate column to zero mean and unit population
    /// variance, remembering the map so coefficients can be reported on the raw
    /// scale. Normalising an already normalised cohort composes the maps.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.len() as f64;
        let p = self.n_covariates;
        let mut maps = Vec::with_capacity(p);
        for j in 0..p {
            let column = (0..self.len()).map(|i| self.covariates[i * p + j]);
            let mean = column.clone().sum::<f64>() / n;
            let var = column.map(|z| (z - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if !(sd > 1e-12 * mean.abs().max(1.0)) {
                return Err(Error::ConstantColumn { index: j, name: self.covariate_names[j].clone() });
            }
            maps.push(Standardization { mean, sd });
        }
        let mut covariates = self.covariates.clone();
        for row in covariates.chunks_mut(p.max(1)) {
            for (z, m) in row.iter_mut().zip(&maps) {
                *z = m.apply(*z);
            }
        }
        let composed = match &self.normalization {
            None => maps,
            Some(prev) => prev
                .iter()
                .zip(&maps)
                .map(|(a, b)| Standardization { mean: a.mean + a.sd * b.mean, sd: a.sd * b.sd })
                .collect(),
        };
        Ok(Cohort { covariates, normalization: Some(composed), ..self.clone() })
    }

    /// Applies previously fitted maps to raw covariates, e.g. to score new
    /// individuals under a model fitted on normalised data.
    pub fn standardized_with(&self, maps: &[Standardization]) -> Result<Self> {
        if self.normalization.is_some() {
            return Err(Error::invalid("cohort is already normalised"));
        }
        if maps.len() != self.n_covariates {
            return Err(Error::Dimension(format!("{} maps for {} covariates", maps.len(), self.n_covariates)));
        }
        if let Some(j) = maps.iter().position(|m| !(m.sd > 0.0) || !m.mean.is_finite()) {
            return Err(Error::invalid(format!("map for covariate {j} is degenerate")));
        }
        let p = self.n_covariates;
        let mut covariates = self.covariates.clone();
        for row in covariates.chunks_mut(p.max(1)) {
            for (z, m) in row.iter_mut().zip(maps) {
                *z = m.apply(*z);
            }
        }
        Ok(Cohort { covariates, normalization: Some(maps.to_vec()), ..self.clone() })
    }
}

/// Column mapping for [`load_cohort`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSchema {
    pub time_column: String,
    pub event_column: String,
    /// Explicit covariate columns; `None` takes every other column.
    pub covariates: Option<Vec<String>>,
    /// Columns never used as covariates.
    pub exclude: Vec<String>,
    /// Overrides the inferred number of risks.
    pub n_risks: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            time_column: "time".into(),
            event_column: "event".into(),
            covariates: None,
            exclude: Vec::new(),
            n_risks: None,
        }
    }
}

/// Reads a headed CSV file. Rows keep file order; errors carry the 1-based
/// line number of the offending record.
pub fn load_cohort(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Cohort> {
    let file = std::fs::File::open(path)?;
    read_cohort(file, schema)
}

pub fn read_cohort(reader: impl std::io::Read, schema: &CsvSchema) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column `{name}`") })
    };
    let time_col = find(&schema.time_column)?;
    let event_col = find(&schema.event_column)?;
    let cov_cols: Vec<usize> = match &schema.covariates {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| c != time_col && c != event_col && !schema.exclude.iter().any(|e| e == &headers[c]))
            .collect(),
    };
    let names: Vec<String> = cov_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut times = Vec::new();
    let mut labels = Vec::new();
    let mut covariates = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |c: usize| record.get(c).unwrap_or("");
        let t: f64 = field(time_col)
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("non-numeric time `{}`", field(time_col)) })?;
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Parse { line, message: format!("negative or non-finite time {t}") });
        }
        let raw_label = field(event_col);
        let label: i64 = raw_label
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("event label `{raw_label}` is not an integer") })?;
        if label < 0 || schema.n_risks.is_some_and(|r| label as usize > r) {
            return Err(Error::Parse { line, message: format!("event label {label} outside 0..=R") });
        }
        for &c in &cov_cols {
            let z: f64 = field(c).parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric covariate `{}` in column `{}`", field(c), &headers[c]),
            })?;
            if !z.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite covariate in column `{}`", &headers[c]) });
            }
            covariates.push(z);
        }
        times.push(t);
        labels.push(label as usize);
    }
    if times.is_empty() {
        return Err(Error::NoRecords);
    }
    Cohort::from_flat(covariates, cov_cols.len(), names, times, labels, schema.n_risks)
}

/// Writes the cohort as `time,event,<covariates>`.
pub fn write_cohort(cohort: &Cohort, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "event".to_string()];
    header.extend(cohort.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..cohort.len() {
        let mut row = vec![cohort.time(i).to_string(), cohort.label(i).to_string()];
        row.extend(cohort.covariates(i).iter().map(|z| z.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Generating law of a synthetic cohort: latent classes with per-class,
/// per-risk coefficient vectors `(β⁰, β¹, …, βᵖ)` (frailty first) and constant
/// base rates. Covariates are independent standard normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub class_weights: Vec<f64>,
    /// `betas[class][risk - 1]`, each of length `p + 1`.
    pub betas: Vec<Vec<Vec<f64>>>,
    /// `base_rates[risk - 1] > 0`.
    pub base_rates: Vec<f64>,
    #[serde(default)]
    pub censor_time: Option<f64>,
    pub n_individuals: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SyntheticSpec {
    pub fn n_classes(&self) -> usize {
        self.class_weights.len()
    }

    pub fn n_risks(&self) -> usize {
        self.base_rates.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.betas.first().and_then(|b| b.first()).map_or(0, |v| v.len().saturating_sub(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_weights.is_empty() {
            return Err(Error::invalid("at least one class is required"));
        }
        let total: f64 = self.class_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.class_weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::invalid(format!("class weights must be a probability vector (sum {total})")));
        }
        if self.base_rates.is_empty() || self.base_rates.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("base rates must be finite and positive"));
        }
        if self.betas.len() != self.n_classes() {
            return Err(Error::invalid("one coefficient block per class is required"));
        }
        let width = self.n_covariates() + 1;
        for (l, per_risk) in self.betas.iter().enumerate() {
            if per_risk.len() != self.n_risks() {
                return Err(Error::invalid(format!("class {}: expected {} risks", l + 1, self.n_risks())));
            }
            if per_risk.iter().any(|b| b.len() != width || b.iter().any(|x| !x.is_finite())) {
                return Err(Error::invalid(format!("class {}: coefficient vectors must have length {width}", l + 1)));
            }
        }
        if let Some(c) = self.censor_time {
            if !(c > 0.0) {
                return Err(Error::invalid("censor time must be positive"));
            }
        }
        if self.n_individuals == 0 {
            return Err(Error::invalid("n_individuals must be positive"));
        }
        Ok(())
    }

    /// Two-class benchmark cohort: equal classes, three standard-normal
    /// covariates, zero frailties, primary rate 0.05, secondary rate 0.1,
    /// censoring at `t = 50`. `secondary` gives the secondary-risk regression
    /// vectors of class 1 and class 2, or `None` for a single-risk cohort.
    pub fn two_class_benchmark(secondary: Option<([f64; 3], [f64; 3])>, n: usize, seed: u64) -> Self {
        let with_frailty = |b: [f64; 3]| vec![0.0, b[0], b[1], b[2]];
        let primary = [with_frailty([2.0, 0.0, 0.0]), with_frailty([-2.0, 0.0, 0.0])];
        let (betas, base_rates) = match secondary {
            None => (vec![vec![primary[0].clone()], vec![primary[1].clone()]], vec![0.05]),
            Some((s1, s2)) => (
                vec![vec![primary[0].clone(), with_frailty(s1)], vec![primary[1].clone(), with_frailty(s2)]],
                vec![0.05, 0.1],
            ),
        };
        SyntheticSpec {
            class_weights: vec![0.5, 0.5],
            betas,
            base_rates,
            censor_time: Some(50.0),
            n_individuals: n,
            rng_seed: seed,
        }
    }

    /// Three equal classes, three risks, three covariates; the primary-risk
    /// vectors separate with `rho`, the other risks are covariate-blind.
    pub fn three_class_benchmark(rho: f64, n: usize, seed: u64) -> Self {
        let dirs = [[1.0, 0.0, 1.0], [-1.0, -1.0, 0.0], [0.0, 1.0, -1.0]];
        let betas = dirs
            .iter()
            .map(|d| {
                vec![
                    vec![0.0, 0.5 + rho * d[0], 0.5 + rho * d[1], 0.5 + rho * d[2]],
                    vec![0.0; 4],
                    vec![0.0; 4],
                ]
            })
            .collect();
        SyntheticSpec {
            class_weights: vec![1.0 / 3.0; 3],
            betas,
            base_rates: vec![1.0 / 10.0, 1.0 / 20.0, 1.0 / 30.0],
            censor_time: None,
            n_individuals: n,
            rng_seed: seed,
        }
    }

    /// Two classes, two risks, five covariates, administrative censoring at
    /// `censor_time`. The minority class is almost immune to the primary risk
    /// (frailty offset −4.6) and less exposed to the secondary one, so the
    /// primary-risk-prone individuals are also removed early by the secondary
    /// risk.
    pub fn frailty_offset_benchmark(n: usize, censor_time: f64, seed: u64) -> Self {
        SyntheticSpec {
            class_weights: vec![0.5, 0.5],
            betas: vec![
                vec![vec![0.0, 0.6, 0.3, 0.0, -0.3, 0.0], vec![0.0, 0.2, 0.0, 0.4, 0.0, 0.0]],
                vec![vec![-4.6, 0.6, 0.3, 0.0, -0.3, 0.0], vec![-2.5, 0.2, 0.0, 0.4, 0.0, 0.0]],
            ],
            base_rates: vec![0.06, 0.05],
            censor_time: Some(censor_time),
            n_individuals: n,
            rng_seed: seed,
        }
    }
}

/// Draws a cohort from `spec`. Returns the cohort and the 0-based generating
/// class of every individual.
///
/// Per individual, in this order: a uniform for the class, `p` standard
/// normals for the covariates, one uniform `u_r` per risk giving the latent
/// time `-τ_r log u_r` with `τ_r = exp(-β_r·z) / λ_r`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Cohort, Vec<usize>)> {
    spec.validate()?;
    let p = spec.n_covariates();
    let n_risks = spec.n_risks();
    let mut rng = rng::seeded(spec.rng_seed);
    let mut covariates = Vec::with_capacity(spec.n_individuals * p);
    let mut times = Vec::with_capacity(spec.n_individuals);
    let mut labels = Vec::with_capacity(spec.n_individuals);
    let mut classes = Vec::with_capacity(spec.n_individuals);
    let mut z = vec![0.0; p];
    for _ in 0..spec.n_individuals {
        let u: f64 = rng.random();
        let mut class = spec.n_classes() - 1;
        let mut acc = 0.0;
        for (l, &w) in spec.class_weights.iter().enumerate() {
            acc += w;
            if u < acc {
                class = l;
                break;
            }
        }
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        let mut best = (f64::INFINITY, 0usize);
        for r in 0..n_risks {
            let beta = &spec.betas[class][r];
            let lin = beta[0] + beta[1..].iter().zip(&z).map(|(b, x)| b * x).sum::<f64>();
            let tau = (-lin).exp() / spec.base_rates[r];
            // (0, 1] keeps the log finite
            let u: f64 = 1.0 - rng.random::<f64>();
            let t = -tau * u.ln();
            if t < best.0 {
                best = (t, r + 1);
            }
        }
        if let Some(c) = spec.censor_time {
            if c < best.0 {
                best = (c, 0);
            }
        }
        covariates.extend_from_slice(&z);
        times.push(best.0);
        labels.push(best.1);
        classes.push(class);
    }
    let names = (1..=p).map(|j| format!("z{j}")).collect();
    let cohort = Cohort::from_flat(covariates, p, names, times, labels, Some(n_risks))?;
    Ok((cohort, classes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_row_csv() {
        let csv = "t,r,z1\n1.0,1,0.5\n2.0,0,-0.5\n0.5,2,1.0\n";
        let schema = CsvSchema { time_column: "t".into(), event_column: "r".into(), ..Default::default() };
        let c = read_cohort(csv.as_bytes(), &schema).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.n_risks(), 2);
        assert_eq!(c.n_covariates(), 1);
        assert_eq!(c.label(1), 0);
        assert_eq!(c.covariates(2), &[1.0]);
        assert_eq!(c.time(0), 1.0);
    }

    #[test]
    fn empty_file_has_no_records() {
        let err = read_cohort("time,event,z\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert_eq!(err.to_string(), "no records");
    }

    #[test]
    fn negative_label_names_line() {
        let csv = "time,event,z\n1.0,1,0.0\n2.0,-1,0.3\n";
        let err = read_cohort(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_time_and_text_covariate() {
        let err = read_cohort("time,event,z\n-1.0,1,0.0\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_cohort("time,event,z\n1.0,1,abc\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn label_above_configured_r_is_rejected() {
        let schema = CsvSchema { n_risks: Some(1), ..Default::default() };
        let err = read_cohort("time,event\n1.0,2\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn normalizes_with_population_variance() {
        let c = Cohort::new(vec![vec![1.0], vec![2.0], vec![3.0]], vec![1.0; 3], vec![1; 3], None).unwrap();
        let n = c.normalized().unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((n.covariates(0)[0] + expected).abs() < 1e-15);
        assert!(n.covariates(1)[0].abs() < 1e-15);
        assert!((n.covariates(2)[0] - expected).abs() < 1e-15);
        assert!((expected - 1.224_744_871_391_589).abs() < 1e-12);

        let again = n.normalized().unwrap();
        for i in 0..3 {
            assert!((again.covariates(i)[0] - n.covariates(i)[0]).abs() < 1e-12);
        }
        let map = again.normalization().unwrap()[0];
        assert!((map.mean - 2.0).abs() < 1e-12);
        assert!((map.sd - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stored_maps_reproduce_normalization() {
        let c = Cohort::new(vec![vec![1.0], vec![2.0], vec![4.0]], vec![1.0; 3], vec![1; 3], None).unwrap();
        let n = c.normalized().unwrap();
        let again = c.standardized_with(n.normalization().unwrap()).unwrap();
        assert_eq!(n, again);
        assert!(n.standardized_with(n.normalization().unwrap()).is_err());
        assert!(c.standardized_with(&[]).is_err());
    }

    #[test]
    fn constant_column_is_an_error() {
        let c = Cohort::new(vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]], vec![1.0; 3], vec![1; 3], None)
            .unwrap();
        match c.normalized().unwrap_err() {
            Error::ConstantColumn { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let spec = SyntheticSpec::two_class_benchmark(Some(([3.0, 0.0, 0.0], [0.0; 3])), 200, 11);
        let (a, ca) = generate_synthetic(&spec).unwrap();
        let (b, cb) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        let (c, _) = generate_synthetic(&SyntheticSpec { rng_seed: 12, ..spec }).unwrap();
        assert_ne!(a.times(), c.times());
    }

    #[test]
    fn exponential_mean_is_recovered() {
        let spec = SyntheticSpec {
            class_weights: vec![1.0],
            betas: vec![vec![vec![0.0]]],
            base_rates: vec![1.0],
            censor_time: None,
            n_individuals: 20_000,
            rng_seed: 3,
        };
        let (c, _) = generate_synthetic(&spec).unwrap();
        let mean = c.total_time() / c.len() as f64;
        let se = 1.0 / (c.len() as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}");
        assert_eq!(c.event_count(1), c.len());
    }

    #[test]
    fn spec_validation() {
        let mut spec = SyntheticSpec::two_class_benchmark(None, 10, 0);
        spec.class_weights = vec![0.5, 0.6];
        assert!(spec.validate().is_err());
        let mut spec = SyntheticSpec::two_class_benchmark(None, 10, 0);
        spec.base_rates = vec![0.0];
        assert!(spec.validate().is_err());
    }
}
