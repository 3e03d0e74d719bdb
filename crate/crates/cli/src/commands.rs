use std::path::{Path, PathBuf};
use std::str::FromStr;

use hetcr::baselines::{cox_fit, fit_gamma_frailty, kaplan_meier, CoxConfig};
use hetcr::cohort::{generate_synthetic, load_cohort, write_cohort};
use hetcr::estimation::{fit_gaussian, fit_map, select_model, FitReport};
use hetcr::inference::{
    band_curve, class_posterior, classification_fraction, cohort_average_curve, effective_classes,
    empirical_band_curve, uniform_grid, Band, CurveEngine, CurveKind,
};
use hetcr::model::linear_predictor;
use hetcr::{Cohort, LatentClassModel};
use serde::Serialize;

use crate::args::{Cli, Command};
use crate::config::{ModelChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::model_file::{ErrorBarsFile, FitMeta, LoadedModel, ModelFile};
use crate::output::{curve_csv, short_hash, to_json, Staged};

pub const TOOL_VERSION: &str = concat!("hetcr ", env!("CARGO_PKG_VERSION"));
const DEFAULT_SEED: u64 = 1;

/// Runs one subcommand and writes its outputs. Returns the written paths.
pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.common.seed.is_some() {
        cfg.seed = cli.common.seed;
    }
    if cli.common.out.is_some() {
        cfg.out = cli.common.out.clone();
    }
    if cli.common.threads.is_some() {
        cfg.threads = cli.common.threads;
    }
    if cli.common.free_censoring {
        cfg.free_censoring = Some(true);
    }
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let staged = match cli.command {
        Command::Simulate { preset, n, rho } => {
            if preset.is_some() {
                cfg.simulate.preset = preset;
            }
            if n.is_some() {
                cfg.simulate.n_individuals = n;
            }
            if rho.is_some() {
                cfg.simulate.rho = rho;
            }
            simulate(&cfg)?
        }
        Command::Fit { data, classes, k, restarts, gaussian, no_error_bars } => {
            override_path(&mut cfg.data.path, data);
            if let Some(l) = classes {
                cfg.fit.classes = l;
            }
            if let Some(k) = k {
                cfg.fit.k = k;
            }
            if restarts.is_some() {
                cfg.fit.restarts = restarts;
            }
            if gaussian {
                cfg.fit.model = ModelChoice::Gaussian;
            }
            if no_error_bars {
                cfg.fit.error_bars = false;
            }
            fit(&cfg)?
        }
        Command::Select { data, classes, k, restarts, warm_start } => {
            override_path(&mut cfg.data.path, data);
            if let Some(l) = classes {
                cfg.select.classes = l;
            }
            if let Some(k) = k {
                cfg.select.k = k;
            }
            if restarts.is_some() {
                cfg.fit.restarts = restarts;
            }
            cfg.select.warm_start |= warm_start;
            select(&cfg)?
        }
        Command::Predict { model, data, risk, z, band, covariate, empirical, cohort_average, kinds, t_max, points } => {
            let p = &mut cfg.predict;
            override_path(&mut p.model, model);
            if let Some(r) = risk {
                p.risk = r;
            }
            if z.is_some() {
                p.z = z;
            }
            if band.is_some() {
                p.band = band;
            }
            if covariate.is_some() {
                p.covariate = covariate;
            }
            p.empirical |= empirical;
            p.cohort_average |= cohort_average;
            if let Some(k) = kinds {
                p.kinds = k;
            }
            if t_max.is_some() {
                p.t_max = t_max;
            }
            if let Some(n) = points {
                p.points = n;
            }
            override_path(&mut cfg.data.path, data);
            predict(&cfg)?
        }
        Command::Classify { model, data, truth } => {
            override_path(&mut cfg.classify.model, model);
            override_path(&mut cfg.classify.truth, truth);
            override_path(&mut cfg.data.path, data);
            classify(&cfg)?
        }
        Command::Baseline { data, risk, gamma_frailty_k } => {
            override_path(&mut cfg.data.path, data);
            if let Some(r) = risk {
                cfg.baseline.risk = r;
            }
            if gamma_frailty_k.is_some() {
                cfg.baseline.gamma_frailty_k = gamma_frailty_k;
            }
            baseline(&cfg)?
        }
    };
    log::info!("writing {} to {}", staged.names().collect::<Vec<_>>().join(", "), out.display());
    staged.commit(&out)
}

fn override_path(slot: &mut Option<PathBuf>, flag: Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(DEFAULT_SEED)
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    path.as_deref().ok_or_else(|| CliError::usage(format!("missing {what}")))
}

/// Reads the cohort, normalising it when configured.
fn load_data(cfg: &RunConfig) -> CliResult<Cohort> {
    let path = require(&cfg.data.path, "data file (--data or [data] path)")?;
    let cohort = load_cohort(path, &cfg.data.schema())
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    log::info!("{}: {} individuals, {} risks, {} covariates", path.display(), cohort.len(), cohort.n_risks(), cohort.n_covariates());
    Ok(if cfg.data.normalize { cohort.normalized()? } else { cohort })
}

/// Reads the cohort on the covariate scale of `model`.
fn load_data_for(cfg: &RunConfig, model: &ModelFile) -> CliResult<Cohort> {
    let path = require(&cfg.data.path, "data file (--data or [data] path)")?;
    let mut schema = cfg.data.schema();
    if schema.covariates.is_none() {
        schema.covariates = Some(model.covariate_names.clone());
    }
    if schema.n_risks.is_none() {
        schema.n_risks = Some(model.dims.risks);
    }
    let cohort = load_cohort(path, &schema).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if cohort.n_covariates() != model.dims.covariates || cohort.n_risks() != model.dims.risks {
        return Err(CliError::usage(format!(
            "{} has {} covariates and {} risks; the model expects {} and {}",
            path.display(),
            cohort.n_covariates(),
            cohort.n_risks(),
            model.dims.covariates,
            model.dims.risks
        )));
    }
    Ok(match &model.normalization {
        Some(maps) => cohort.standardized_with(maps)?,
        None => cohort,
    })
}

fn latent_model(cfg_path: &Option<PathBuf>) -> CliResult<(ModelFile, LatentClassModel, String)> {
    let path = require(cfg_path, "model file (--model)")?;
    let bytes = std::fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{} is not UTF-8", path.display())))?;
    let file = ModelFile::parse(&text)?;
    let hash = short_hash(text.as_bytes());
    match file.model()? {
        LoadedModel::Latent(m) => Ok((file, m, hash)),
        LoadedModel::Gaussian(_) => Err(CliError::usage("this subcommand needs a latent-class model")),
    }
}

#[derive(Serialize)]
struct SimulationEcho<'a> {
    tool_version: &'static str,
    spec: &'a hetcr::SyntheticSpec,
    /// Observed events per label `0..=R`.
    events: Vec<usize>,
}

fn simulate(cfg: &RunConfig) -> CliResult<Staged> {
    let spec = cfg.simulate.spec(seed(cfg))?;
    let (cohort, classes) = generate_synthetic(&spec)?;
    let mut csv = Vec::new();
    write_cohort(&cohort, &mut csv)?;
    let mut truth = String::from("id,class");
    for r in 1..=spec.n_risks() {
        truth.push_str(&format!(",lp_{r}"));
    }
    truth.push('\n');
    for (i, &c) in classes.iter().enumerate() {
        truth.push_str(&format!("{},{}", i + 1, c + 1));
        for r in 1..=spec.n_risks() {
            truth.push_str(&format!(",{}", linear_predictor(&spec.betas[c][r - 1], cohort.covariates(i))));
        }
        truth.push('\n');
    }
    let events: Vec<usize> = (0..=cohort.n_risks()).map(|r| cohort.event_count(r)).collect();
    println!("simulated {} individuals; events per label 0..=R: {:?}", cohort.len(), events);
    let mut staged = Staged::default();
    staged.add("cohort.csv", csv);
    staged.add("truth.csv", truth);
    staged.add("simulation.json", to_json(&SimulationEcho { tool_version: TOOL_VERSION, spec: &spec, events })?);
    Ok(staged)
}

#[derive(Serialize)]
struct FitReportFile {
    model: &'static str,
    classes: usize,
    k: usize,
    psi: f64,
    loglik: f64,
    n_par: usize,
    effective_classes: Option<f64>,
    /// Largest censoring-risk regression coefficient; only meaningful with
    /// free censoring, where it should come out near zero.
    max_censoring_regression: Option<f64>,
    per_restart_psis: Vec<f64>,
    initial_psis: Vec<f64>,
    restart_histories: Vec<Vec<f64>>,
    evaluations: Option<usize>,
    loglik_monte_carlo: Option<(f64, f64)>,
    wall_time_seconds: f64,
    error_bars: Option<ErrorBarsFile>,
}

fn latent_report(r: &FitReport) -> FitReportFile {
    FitReportFile {
        model: "latent",
        classes: r.n_classes,
        k: r.k,
        psi: r.psi,
        loglik: r.loglik,
        n_par: r.n_par,
        effective_classes: Some(r.effective_classes()),
        max_censoring_regression: r.model.free_censoring.then(|| r.model.max_censoring_regression()),
        per_restart_psis: r.per_restart_psis.clone(),
        initial_psis: r.initial_psis.clone(),
        restart_histories: r.restart_histories.clone(),
        evaluations: Some(r.evaluations),
        loglik_monte_carlo: None,
        wall_time_seconds: r.wall_time.as_secs_f64(),
        error_bars: r.error_bars.as_ref().map(Into::into),
    }
}

fn latent_model_file(r: &FitReport, cohort: &Cohort, seed: u64) -> ModelFile {
    let mut mf = ModelFile::from_latent(&r.model, cohort.covariate_names().to_vec(), cohort.normalization().map(<[_]>::to_vec));
    mf.fit = Some(FitMeta { psi: r.psi, loglik: r.loglik, n_par: r.n_par, seed, tool_version: TOOL_VERSION.into() });
    mf.error_bars = r.error_bars.as_ref().map(Into::into);
    mf
}

fn fit(cfg: &RunConfig) -> CliResult<Staged> {
    let cohort = load_data(cfg)?;
    let seed = seed(cfg);
    let fit_cfg = cfg.fit.fit_config(seed, cfg.free_censoring.unwrap_or(false))?;
    let mut staged = Staged::default();
    match cfg.fit.model {
        ModelChoice::Latent => {
            let report = fit_map(&cohort, cfg.fit.classes, cfg.fit.k, &fit_cfg)?;
            println!("L={} K={}: Ψ={:.4}, log-likelihood {:.4}, effective classes {:.3}", report.n_classes, report.k, report.psi, report.loglik, report.effective_classes());
            if report.model.free_censoring {
                println!("largest censoring regression coefficient {:.4}", report.model.max_censoring_regression());
            }
            staged.add("model.json", latent_model_file(&report, &cohort, seed).to_json()?);
            staged.add("fit_report.json", to_json(&latent_report(&report))?);
        }
        ModelChoice::Gaussian => {
            if cfg.free_censoring == Some(true) {
                return Err(CliError::usage("--free-censoring applies to latent-class models only"));
            }
            let report = fit_gaussian(&cohort, cfg.fit.k, &fit_cfg, cfg.fit.mc_samples)?;
            println!("Gaussian K={}: Ψ (lower bound) {:.4}", report.k, report.psi_lower_bound);
            let mut mf = ModelFile::from_gaussian(&report.model, cohort.covariate_names().to_vec(), cohort.normalization().map(<[_]>::to_vec));
            mf.fit = Some(FitMeta {
                psi: report.psi_lower_bound,
                loglik: report.loglik_lower_bound,
                n_par: report.n_par,
                seed,
                tool_version: TOOL_VERSION.into(),
            });
            staged.add("model.json", mf.to_json()?);
            let file = FitReportFile {
                model: "gaussian",
                classes: 0,
                k: report.k,
                psi: report.psi_lower_bound,
                loglik: report.loglik_lower_bound,
                n_par: report.n_par,
                effective_classes: None,
                max_censoring_regression: None,
                per_restart_psis: report.per_restart_psis.clone(),
                initial_psis: Vec::new(),
                restart_histories: Vec::new(),
                evaluations: None,
                loglik_monte_carlo: report.loglik_mc.map(|m| (m.value, m.std_error)),
                wall_time_seconds: report.wall_time.as_secs_f64(),
                error_bars: None,
            };
            staged.add("fit_report.json", to_json(&file)?);
        }
    }
    Ok(staged)
}

#[derive(Serialize)]
struct SelectionCellFile {
    classes: usize,
    k: usize,
    psi: Option<f64>,
    loglik: Option<f64>,
    n_par: Option<usize>,
    effective_classes: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SelectionFile {
    individuals: usize,
    cells: Vec<SelectionCellFile>,
    chosen_classes: usize,
    chosen_k: usize,
    delta_psi_per_individual: Option<f64>,
    likelihood_ratio: Option<f64>,
}

fn select(cfg: &RunConfig) -> CliResult<Staged> {
    if cfg.fit.model == ModelChoice::Gaussian {
        return Err(CliError::usage("select scores latent-class models; use fit for the Gaussian model"));
    }
    let cohort = load_data(cfg)?;
    let seed = seed(cfg);
    let mut fit_cfg = cfg.fit.fit_config(seed, cfg.free_censoring.unwrap_or(false))?;
    fit_cfg.warm_start = cfg.select.warm_start;
    let report = select_model(&cohort, &cfg.select.classes, &cfg.select.k, &fit_cfg)?;
    let cells = report
        .cells
        .iter()
        .map(|c| match &c.outcome {
            Ok(r) => SelectionCellFile {
                classes: c.n_classes,
                k: c.k,
                psi: Some(r.psi),
                loglik: Some(r.loglik),
                n_par: Some(r.n_par),
                effective_classes: Some(r.effective_classes()),
                error: None,
            },
            Err(e) => SelectionCellFile {
                classes: c.n_classes,
                k: c.k,
                psi: None,
                loglik: None,
                n_par: None,
                effective_classes: None,
                error: Some(e.clone()),
            },
        })
        .collect::<Vec<_>>();
    for c in &cells {
        match (c.psi, &c.error) {
            (Some(psi), _) => println!("L={} K={}: Ψ={psi:.4}", c.classes, c.k),
            (None, Some(e)) => println!("L={} K={}: failed: {e}", c.classes, c.k),
            _ => {}
        }
    }
    let (l, k) = report.chosen_dims();
    println!("chosen L={l} K={k}");
    let file = SelectionFile {
        individuals: cohort.len(),
        cells,
        chosen_classes: l,
        chosen_k: k,
        delta_psi_per_individual: report.delta_psi_per_individual,
        likelihood_ratio: report.likelihood_ratio.filter(|x| x.is_finite()),
    };
    let mut staged = Staged::default();
    staged.add("selection.json", to_json(&file)?);
    staged.add("model.json", latent_model_file(report.best(), &cohort, seed).to_json()?);
    Ok(staged)
}

fn predict(cfg: &RunConfig) -> CliResult<Staged> {
    let p = &cfg.predict;
    let (file, model, hash) = latent_model(&p.model)?;
    if p.risk == 0 || p.risk > model.n_risks() {
        return Err(CliError::usage(format!("risk must be in 1..={}", model.n_risks())));
    }
    if p.points < 2 {
        return Err(CliError::usage("points must be at least 2"));
    }
    let t_max = p.t_max.unwrap_or(file.time_bounds[1]);
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::usage("t_max must be positive"));
    }
    let kinds = p.kinds.iter().map(|k| CurveKind::from_str(k)).collect::<hetcr::Result<Vec<_>>>()?;
    let modes = [p.z.is_some(), p.band.is_some(), p.cohort_average].iter().filter(|x| **x).count();
    if modes > 1 {
        return Err(CliError::usage("choose one of z, band and cohort_average"));
    }
    if p.empirical && p.band.is_none() {
        return Err(CliError::usage("empirical applies to band curves"));
    }
    let grid = uniform_grid(t_max, p.points);
    let mut header = vec![("model-hash", hash), ("risk", p.risk.to_string())];
    let mut staged = Staged::default();
    let suffix;
    let curves: Vec<(CurveKind, Vec<f64>)> = if let Some(band) = &p.band {
        let band = Band::from_str(band)?;
        let cov = p.covariate.unwrap_or(1);
        if cov == 0 || cov > model.n_covariates() {
            return Err(CliError::usage(format!("covariate must be in 1..={}", model.n_covariates())));
        }
        header.push(("band", format!("{} of covariate {cov} ({})", band.label(), file.covariate_names[cov - 1])));
        suffix = format!("_{}_cov{cov}", band.label().to_ascii_lowercase());
        if p.empirical {
            header.push(("average", "cohort members in the empirical band".into()));
            let cohort = load_data_for(cfg, &file)?;
            kinds
                .iter()
                .map(|&k| Ok((k, empirical_band_curve(&model, k, p.risk, &cohort, cov - 1, band, &grid)?.value)))
                .collect::<CliResult<_>>()?
        } else {
            header.push(("average", "standard normal on the band, other covariates at their mean".into()));
            kinds
                .iter()
                .map(|&k| Ok((k, band_curve(&model, k, p.risk, cov - 1, band, &grid, None)?.value)))
                .collect::<CliResult<_>>()?
        }
    } else if p.cohort_average {
        let cohort = load_data_for(cfg, &file)?;
        header.push(("average", format!("all {} cohort members", cohort.len())));
        suffix = "_cohort".into();
        kinds
            .iter()
            .map(|&k| Ok((k, cohort_average_curve(&model, k, p.risk, &cohort, &grid)?.value)))
            .collect::<CliResult<_>>()?
    } else {
        let z = match &p.z {
            Some(raw) => {
                header.push(("z", raw.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")));
                file.model_scale(raw)?
            }
            None => {
                header.push(("z", "covariate means".into()));
                vec![0.0; model.n_covariates()]
            }
        };
        suffix = String::new();
        let engine = CurveEngine::new(&model, &grid)?;
        kinds.iter().map(|&k| Ok((k, engine.curve(k, p.risk, &z)?))).collect::<CliResult<_>>()?
    };
    for (kind, values) in curves {
        let mut h = header.clone();
        h.insert(2, ("curve", kind.name().into()));
        staged.add(format!("{}_risk{}{suffix}.csv", kind.name(), p.risk), curve_csv(&h, &grid, &values));
    }
    Ok(staged)
}

#[derive(Serialize)]
struct ClassificationFile {
    individuals: usize,
    classes: usize,
    effective_classes: f64,
    /// Individuals assigned to each class.
    counts: Vec<usize>,
    /// Fraction of individuals assigned to their generating class under the
    /// best relabeling; present when a truth file was given.
    fraction: Option<f64>,
    /// `permutation[fitted class] = true class`, 1-based.
    permutation: Option<Vec<usize>>,
    max_censoring_regression: Option<f64>,
}

fn read_truth(path: &Path, n: usize) -> CliResult<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::usage(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "class")
        .ok_or_else(|| CliError::usage(format!("{} has no `class` column", path.display())))?;
    let mut out = Vec::with_capacity(n);
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::usage(e.to_string()))?;
        let c: usize = rec
            .get(col)
            .and_then(|v| v.trim().parse().ok())
            .filter(|c| *c >= 1)
            .ok_or_else(|| CliError::usage(format!("{}: line {}: bad class label", path.display(), line + 2)))?;
        out.push(c - 1);
    }
    if out.len() != n {
        return Err(CliError::usage(format!("{} has {} rows, the cohort {n}", path.display(), out.len())));
    }
    Ok(out)
}

fn classify(cfg: &RunConfig) -> CliResult<Staged> {
    let (file, model, _) = latent_model(&cfg.classify.model)?;
    let cohort = load_data_for(cfg, &file)?;
    let post = class_posterior(&model, &cohort)?;
    let l = post.n_classes();
    let mut csv = String::from("id");
    for c in 1..=l {
        csv.push_str(&format!(",p_{c}"));
    }
    csv.push_str(",argmax\n");
    for (i, row) in post.probabilities.iter().enumerate() {
        csv.push_str(&(i + 1).to_string());
        for p in row {
            csv.push_str(&format!(",{p}"));
        }
        csv.push_str(&format!(",{}\n", post.assignment[i] + 1));
    }
    let mut counts = vec![0; l];
    for &a in &post.assignment {
        counts[a] += 1;
    }
    let (fraction, permutation) = match &cfg.classify.truth {
        Some(path) => {
            let truth = read_truth(path, cohort.len())?;
            let (f, perm) = classification_fraction(&post.assignment, &truth)?;
            println!("classification fraction f = {f:.4}");
            (Some(f), Some(perm.into_iter().map(|c| c + 1).collect()))
        }
        None => (None, None),
    };
    let summary = ClassificationFile {
        individuals: cohort.len(),
        classes: l,
        effective_classes: effective_classes(&model.weights),
        counts,
        fraction,
        permutation,
        max_censoring_regression: model.free_censoring.then(|| model.max_censoring_regression()),
    };
    let mut staged = Staged::default();
    staged.add("posterior.csv", csv);
    staged.add("classification.json", to_json(&summary)?);
    Ok(staged)
}

#[derive(Serialize)]
struct CoxFile<'a> {
    risk: usize,
    covariates: &'a [String],
    coefficients: &'a [f64],
    std_errors: &'a [f64],
    partial_loglik: f64,
    iterations: usize,
    normalization: Option<&'a [hetcr::Standardization]>,
    /// Breslow increments `(t, ΔΛ)`.
    breslow_baseline: &'a [(f64, f64)],
}

#[derive(Serialize)]
struct GammaFile<'a> {
    risk: usize,
    alpha: f64,
    coefficients: &'a [f64],
    time_bounds: [f64; 2],
    knots: &'a [f64],
}

fn baseline(cfg: &RunConfig) -> CliResult<Staged> {
    let cohort = load_data(cfg)?;
    let r = cfg.baseline.risk;
    let km = kaplan_meier(&cohort, r)?;
    let mut csv = String::from("t,value,std_error,at_risk,events\n");
    for j in 0..km.times.len() {
        let t = km.times[j];
        csv.push_str(&format!("{t},{},{},{},{}\n", km.values[j], km.std_error(t), km.at_risk[j], km.events[j]));
    }
    let cox = cox_fit(&cohort, r, &CoxConfig::default())?;
    println!("Cox risk {r}: β = {:?}", cox.coefficients);
    let mut staged = Staged::default();
    staged.add(format!("km_risk{r}.csv"), csv);
    staged.add(
        format!("cox_risk{r}.json"),
        to_json(&CoxFile {
            risk: r,
            covariates: cohort.covariate_names(),
            coefficients: &cox.coefficients,
            std_errors: &cox.std_errors,
            partial_loglik: cox.partial_loglik,
            iterations: cox.iterations,
            normalization: cohort.normalization(),
            breslow_baseline: &cox.breslow_baseline,
        })?,
    );
    if let Some(k) = cfg.baseline.gamma_frailty_k {
        let g = fit_gamma_frailty(&cohort, r, k, seed(cfg))?;
        println!("gamma frailty risk {r}: α = {:.4}", g.alpha);
        staged.add(
            format!("gamma_frailty_risk{r}.json"),
            to_json(&GammaFile {
                risk: r,
                alpha: g.alpha,
                coefficients: &g.coefficients,
                time_bounds: [g.base.grid.t_min, g.base.grid.t_max],
                knots: &g.base.knots,
            })?,
        );
    }
    Ok(staged)
}
