//! Run configuration. A single TOML document; every table is optional and
//! unknown keys are rejected. Command-line flags override file values.
//!
//! ```toml
//! seed = 7
//! out = "results"
//! threads = 4
//! free_censoring = false
//!
//! [data]
//! path = "cohort.csv"
//! time_column = "time"
//! event_column = "event"
//! covariates = ["z1", "z2"]   # default: every other column
//! exclude = ["id"]
//! n_risks = 2                 # default: largest event label
//! normalize = true
//!
//! [simulate]
//! preset = "two-class-b"         # or give the law explicitly:
//! class_weights = [0.5, 0.5]
//! betas = [[[0, 2, 0, 0]], [[0, -2, 0, 0]]]
//! base_rates = [0.05]
//! censor_time = 50.0
//! n_individuals = 1600
//! rho = 4.0                   # three-class preset only
//!
//! [fit]
//! model = "latent"            # or "gaussian"
//! classes = 2
//! k = 1
//! restarts = 16
//! randomization_schedule = [0.5, 0.25]
//! init_noise = 0.05
//! max_iter = 10000
//! tolerance = 1e-8
//! step = 0.1
//! error_bars = true
//! prior_sd = 1.0
//! mc_samples = 2000           # gaussian: Monte-Carlo refinement at the optimum
//!
//! [select]
//! classes = [1, 2, 3]
//! k = [1]
//! warm_start = false
//!
//! [predict]
//! model = "model.json"
//! risk = 1
//! kinds = ["decontaminated-survival", "crude-survival", "cumulative-incidence"]
//! t_max = 50.0
//! points = 101
//! z = [0.0, 0.0]              # raw covariate values
//! band = "UQ"                 # or a quartile band of one covariate
//! covariate = 1               # 1-based
//! empirical = false           # average over cohort members in the band
//! cohort_average = false      # average over all cohort members
//!
//! [classify]
//! model = "model.json"
//! truth = "truth.csv"
//!
//! [baseline]
//! risk = 1
//! gamma_frailty_k = 1         # also fit the gamma-frailty model
//! ```

use std::path::{Path, PathBuf};

use hetcr::estimation::FitConfig;
use hetcr::likelihood::PenaltyConfig;
use hetcr::{CsvSchema, SyntheticSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub free_censoring: Option<bool>,
    pub data: DataSection,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub select: SelectSection,
    pub predict: PredictSection,
    pub classify: ClassifySection,
    pub baseline: BaselineSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub time_column: String,
    pub event_column: String,
    pub covariates: Option<Vec<String>>,
    pub exclude: Vec<String>,
    pub n_risks: Option<usize>,
    pub normalize: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        let s = CsvSchema::default();
        DataSection {
            path: None,
            time_column: s.time_column,
            event_column: s.event_column,
            covariates: None,
            exclude: Vec::new(),
            n_risks: None,
            normalize: true,
        }
    }
}

impl DataSection {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            time_column: self.time_column.clone(),
            event_column: self.event_column.clone(),
            covariates: self.covariates.clone(),
            exclude: self.exclude.clone(),
            n_risks: self.n_risks,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub preset: Option<String>,
    pub rho: Option<f64>,
    pub class_weights: Option<Vec<f64>>,
    pub betas: Option<Vec<Vec<Vec<f64>>>>,
    pub base_rates: Option<Vec<f64>>,
    pub censor_time: Option<f64>,
    pub n_individuals: Option<usize>,
}

impl SimulateSection {
    /// The generating law, from a preset or from explicit fields.
    pub fn spec(&self, seed: u64) -> CliResult<SyntheticSpec> {
        let spec = match self.preset.as_deref() {
            Some(name) => {
                if self.class_weights.is_some() || self.betas.is_some() || self.base_rates.is_some() {
                    return Err(CliError::usage("simulate: give either `preset` or an explicit law, not both"));
                }
                let mut spec = match name.to_ascii_lowercase().as_str() {
                    "two-class-a" => SyntheticSpec::two_class_benchmark(None, 1600, seed),
                    "two-class-b" => SyntheticSpec::two_class_benchmark(Some(([3.0, 0.0, 0.0], [0.0; 3])), 1600, seed),
                    "two-class-c" => SyntheticSpec::two_class_benchmark(Some(([-3.0, 0.0, 0.0], [0.0; 3])), 1600, seed),
                    "three-class" => SyntheticSpec::three_class_benchmark(self.rho.unwrap_or(4.0), 9600, seed),
                    "frailty-offset" => SyntheticSpec::frailty_offset_benchmark(2000, 25.0, seed),
                    other => {
                        return Err(CliError::usage(format!(
                            "simulate: unknown preset {other:?} (two-class-a, two-class-b, two-class-c, three-class, frailty-offset)"
                        )))
                    }
                };
                if self.rho.is_some() && name != "three-class" {
                    return Err(CliError::usage("simulate: `rho` applies to the three-class preset only"));
                }
                if let Some(n) = self.n_individuals {
                    spec.n_individuals = n;
                }
                if let Some(t) = self.censor_time {
                    spec.censor_time = Some(t);
                }
                spec
            }
            None => {
                let missing = |field: &str| CliError::usage(format!("simulate: missing `{field}`"));
                SyntheticSpec {
                    class_weights: self.class_weights.clone().ok_or_else(|| missing("class_weights"))?,
                    betas: self.betas.clone().ok_or_else(|| missing("betas"))?,
                    base_rates: self.base_rates.clone().ok_or_else(|| missing("base_rates"))?,
                    censor_time: self.censor_time,
                    n_individuals: self.n_individuals.ok_or_else(|| missing("n_individuals"))?,
                    rng_seed: seed,
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    #[default]
    Latent,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub model: ModelChoice,
    pub classes: usize,
    pub k: usize,
    pub restarts: Option<usize>,
    pub randomization_schedule: Option<Vec<f64>>,
    pub init_noise: Option<f64>,
    pub max_iter: Option<usize>,
    pub tolerance: Option<f64>,
    pub step: Option<f64>,
    pub error_bars: bool,
    pub prior_sd: Option<f64>,
    pub mc_samples: Option<usize>,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            model: ModelChoice::Latent,
            classes: 2,
            k: 1,
            restarts: None,
            randomization_schedule: None,
            init_noise: None,
            max_iter: None,
            tolerance: None,
            step: None,
            error_bars: true,
            prior_sd: None,
            mc_samples: None,
        }
    }
}

impl FitSection {
    pub fn fit_config(&self, seed: u64, free_censoring: bool) -> CliResult<FitConfig> {
        let d = FitConfig::default();
        let cfg = FitConfig {
            restarts: self.restarts.unwrap_or(d.restarts),
            simplex_max_iter: self.max_iter.unwrap_or(d.simplex_max_iter),
            simplex_tolerance: self.tolerance.unwrap_or(d.simplex_tolerance),
            simplex_step: self.step.unwrap_or(d.simplex_step),
            randomization_schedule: self.randomization_schedule.clone().unwrap_or(d.randomization_schedule),
            init_coefficient_noise: self.init_noise.unwrap_or(d.init_coefficient_noise),
            rng_seed: seed,
            free_censoring,
            penalty: PenaltyConfig { prior_sd: self.prior_sd.unwrap_or(d.penalty.prior_sd), ..d.penalty },
            compute_error_bars: self.error_bars,
            warm_start: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectSection {
    pub classes: Vec<usize>,
    pub k: Vec<usize>,
    pub warm_start: bool,
}

impl Default for SelectSection {
    fn default() -> Self {
        SelectSection { classes: vec![1, 2, 3], k: vec![1], warm_start: false }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub model: Option<PathBuf>,
    pub risk: usize,
    pub kinds: Vec<String>,
    pub t_max: Option<f64>,
    pub points: usize,
    pub z: Option<Vec<f64>>,
    pub band: Option<String>,
    pub covariate: Option<usize>,
    pub empirical: bool,
    pub cohort_average: bool,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection {
            model: None,
            risk: 1,
            kinds: vec![
                "decontaminated-survival".into(),
                "decontaminated-hazard".into(),
                "crude-survival".into(),
                "crude-hazard".into(),
                "cumulative-incidence".into(),
            ],
            t_max: None,
            points: 101,
            z: None,
            band: None,
            covariate: None,
            empirical: false,
            cohort_average: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub model: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub risk: usize,
    pub gamma_frailty_k: Option<usize>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection { risk: 1, gamma_frailty_k: None }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
