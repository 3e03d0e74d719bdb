//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `HETCR_ACCEPTANCE=1,4` restricts the run to the listed criteria.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use hetcr::baselines::kaplan_meier;
use hetcr::cohort::{generate_synthetic, SyntheticSpec};
use hetcr::estimation::{fit_map, select_model, FitConfig};
use hetcr::inference::{
    band_curve, class_posterior, classification_fraction, cohort_average_curve, empirical_band_rows, Band,
    CurveKind,
};
use hetcr::{Cohort, LatentClassModel};

const SEED_A: u64 = 11;
const SEED_B: u64 = 11;
const SEED_C: u64 = 11;

fn two_class(name: char) -> SyntheticSpec {
    let secondary = match name {
        'A' => None,
        'B' => Some(([3.0, 0.0, 0.0], [0.0; 3])),
        _ => Some(([-3.0, 0.0, 0.0], [0.0; 3])),
    };
    let seed = match name {
        'A' => SEED_A,
        'B' => SEED_B,
        _ => SEED_C,
    };
    SyntheticSpec::two_class_benchmark(secondary, 1600, seed)
}

fn two_class_config(seed: u64) -> FitConfig {
    FitConfig {
        restarts: 2,
        randomization_schedule: vec![0.5, 0.25, 0.125, 0.0625],
        rng_seed: seed,
        compute_error_bars: false,
        ..Default::default()
    }
}

/// Largest errors of `fit` against `truth` under the best class relabeling:
/// regression coefficients with nonzero and with zero generating value (the
/// quantities tabulated for these data sets), class weights, and, for
/// information only, the frailty offsets.
fn recovery_errors(fit: &LatentClassModel, truth: &SyntheticSpec) -> (f64, f64, f64, f64) {
    let l = truth.n_classes();
    let perms: Vec<Vec<usize>> = if l == 2 { vec![vec![0, 1], vec![1, 0]] } else { vec![(0..l).collect()] };
    let mut best = (f64::INFINITY, (0.0, 0.0, 0.0, 0.0));
    for perm in perms {
        let (mut nonzero, mut zero, mut frailty, mut dist) = (0.0f64, 0.0f64, 0.0f64, 0.0);
        let mut weight = 0.0f64;
        for (true_class, &fit_class) in perm.iter().enumerate() {
            weight = weight.max((fit.weights[fit_class] - truth.class_weights[true_class]).abs());
            for r in 1..=truth.n_risks() {
                for (mu, &b) in truth.betas[true_class][r - 1].iter().enumerate() {
                    let e = (fit.beta(fit_class, r)[mu] - b).abs();
                    dist += e * e;
                    if mu == 0 {
                        frailty = frailty.max(e);
                    } else if b == 0.0 {
                        zero = zero.max(e);
                    } else {
                        nonzero = nonzero.max(e);
                    }
                }
            }
        }
        if dist < best.0 {
            best = (dist, (nonzero, zero, weight, frailty));
        }
    }
    best.1
}

fn criterion_1() -> CheckResult {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ['A', 'B', 'C'] {
        let start = Instant::now();
        let spec = two_class(name);
        let (cohort, _) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
        let report = select_model(&cohort, &[1, 2, 3], &[1], &two_class_config(7)).map_err(|e| e.to_string())?;
        let chosen = &report.cells[report.chosen];
        let fit = report.best();
        let (nonzero, zero, weight, frailty) = recovery_errors(&fit.model, &spec);
        let good = chosen.n_classes == 2 && nonzero <= 0.25 && zero <= 0.20 && weight <= 0.05;
        ok &= good;
        let psis: Vec<String> = report.cells.iter().map(|c| format!("{:.1}", c.psi().unwrap_or(f64::NAN))).collect();
        lines.push(format!(
            "{name}: L={} (Ψ {}), nonzero err {nonzero:.3}, zero err {zero:.3}, weight err {weight:.3} (frailty offset err {frailty:.3}), {:.0}s",
            chosen.n_classes,
            psis.join("/"),
            start.elapsed().as_secs_f64()
        ));
    }
    finish(ok, lines.join("; "))
}

/// True decontaminated primary survival of the two benchmark classes at `z_1`.
fn two_class_survival(z1: f64, t: f64) -> f64 {
    0.5 * (-(t / 20.0) * (2.0 * z1).exp()).exp() + 0.5 * (-(t / 20.0) * (-2.0 * z1).exp()).exp()
}

fn analytic_band(band: Band, t: f64) -> f64 {
    let zq = 0.674_489_750_196_081_7;
    let (a, b, mass) = match band {
        Band::Lower => (-8.0, -zq, 0.25),
        Band::Upper => (zq, 8.0, 0.25),
        Band::Inter => (-zq, zq, 0.5),
    };
    simpson(a, b, 4000, |z| normal_pdf(z) * two_class_survival(z, t)) / mass
}

fn criterion_2() -> CheckResult {
    let t_grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.5).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ['B', 'C'] {
        let spec = two_class(name);
        let (cohort, _) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
        let fit = fit_map(&cohort, 2, 1, &two_class_config(7)).map_err(|e| e.to_string())?;
        let m = &fit.model;
        let mut worst: f64 = 0.0;
        if name == 'B' {
            for band in [Band::Lower, Band::Upper, Band::Inter] {
                let c = band_curve(m, CurveKind::DecontaminatedSurvival, 1, 0, band, &t_grid, None).map_err(|e| e.to_string())?;
                for (t, v) in t_grid.iter().zip(&c.value) {
                    worst = worst.max((v - analytic_band(band, *t)).abs());
                }
            }
            ok &= worst <= 0.05;
        }
        let at = [25.0];
        let crude = band_curve(m, CurveKind::CrudeSurvival, 1, 0, Band::Upper, &at, None).map_err(|e| e.to_string())?.value[0];
        let decon = band_curve(m, CurveKind::DecontaminatedSurvival, 1, 0, Band::Upper, &at, None).map_err(|e| e.to_string())?.value[0];
        let km = upper_band_km(&cohort, 25.0)?;
        let ordered = if name == 'B' { crude > decon } else { crude < decon };
        ok &= ordered;
        lines.push(format!(
            "{name}: {}UQ at t=25 crude {crude:.3} vs decontaminated {decon:.3} (Kaplan-Meier {km:.3}, true {:.3})",
            if name == 'B' { format!("max band deviation {worst:.3}, ") } else { String::new() },
            analytic_band(Band::Upper, 25.0)
        ));
    }
    finish(ok, lines.join("; "))
}

fn upper_band_km(cohort: &Cohort, t: f64) -> Result<f64, String> {
    let rows = empirical_band_rows(cohort, 0, Band::Upper).map_err(|e| e.to_string())?;
    let km = kaplan_meier(&cohort.subset(&rows), 1).map_err(|e| e.to_string())?;
    Ok(km.eval(t))
}

fn criterion_3() -> CheckResult {
    let mut fs = Vec::new();
    for rho in 0..=4 {
        let start = Instant::now();
        let spec = SyntheticSpec::three_class_benchmark(rho as f64, 9600, 5);
        let (cohort, truth) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
        let cfg = FitConfig {
            restarts: 1,
            randomization_schedule: vec![0.5, 0.25],
            rng_seed: 3,
            compute_error_bars: false,
            ..Default::default()
        };
        let fit = fit_map(&cohort, 3, 1, &cfg).map_err(|e| e.to_string())?;
        let post = class_posterior(&fit.model, &cohort).map_err(|e| e.to_string())?;
        let (f, _) = classification_fraction(&post.assignment, &truth).map_err(|e| e.to_string())?;
        eprintln!("  ρ={rho}: f={f:.3} ({:.0}s)", start.elapsed().as_secs_f64());
        fs.push(f);
    }
    let monotone = fs.windows(2).all(|w| w[1] >= w[0] - 0.02);
    let ok = (0.70..=0.80).contains(&fs[4]) && (0.28..=0.38).contains(&fs[0]) && monotone;
    let list: Vec<String> = fs.iter().map(|f| format!("{f:.3}")).collect();
    finish(ok, format!("f over ρ=0..4: {}", list.join(", ")))
}

fn criterion_4() -> CheckResult {
    let start = Instant::now();
    let checks = [
        ("data probability", check_data_probability_routes()),
        ("rate link", check_individual_rate_link()),
        ("gamma frailty", check_gamma_frailty()),
        ("gaussian bound", check_gaussian_bound()),
        ("invariances", check_invariances()),
    ];
    let ok = checks.iter().all(|(_, c)| c.is_ok()) && start.elapsed().as_secs() < 60;
    let lines: Vec<String> = checks
        .iter()
        .map(|(name, c)| match c {
            Ok(d) => format!("{name}: {d}"),
            Err(d) => format!("{name} FAILED: {d}"),
        })
        .collect();
    finish(ok, format!("{} ({:.1}s)", lines.join("; "), start.elapsed().as_secs_f64()))
}

fn criterion_5() -> CheckResult {
    let quad = check_quadratic_objective();
    let hess = check_curvature_matches_hessian();
    let (cox, latent) = homogeneous_coverage(50)?;
    let ok = quad.is_ok() && hess.is_ok() && cox >= 0.9 && latent >= 0.9;
    let show = |c: &CheckResult| match c {
        Ok(d) => d.clone(),
        Err(d) => format!("FAILED {d}"),
    };
    finish(
        ok,
        format!(
            "quadratic: {}; curvature: {}; 2σ coverage Cox {cox:.2}, single class {latent:.2}",
            show(&quad),
            show(&hess)
        ),
    )
}

fn criterion_6() -> CheckResult {
    let spec = SyntheticSpec::frailty_offset_benchmark(2000, 25.0, 3);
    let (cohort, _) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let censored = cohort.event_count(0) as f64 / cohort.len() as f64;
    let cfg = FitConfig {
        restarts: 2,
        randomization_schedule: vec![0.5, 0.25, 0.125],
        rng_seed: 7,
        compute_error_bars: false,
        ..Default::default()
    };
    let report = select_model(&cohort, &[1, 2, 3], &[1], &cfg).map_err(|e| e.to_string())?;
    let chosen = report.cells[report.chosen].n_classes;
    let fit = report.best();
    let t_grid: Vec<f64> = (1..=50).map(|k| k as f64 * 0.5).collect();
    let decon = cohort_average_curve(&fit.model, CurveKind::DecontaminatedSurvival, 1, &cohort, &t_grid).map_err(|e| e.to_string())?;
    let crude = cohort_average_curve(&fit.model, CurveKind::CrudeSurvival, 1, &cohort, &t_grid).map_err(|e| e.to_string())?;
    let below = decon.value.iter().zip(&crude.value).all(|(d, c)| d < c);
    let psis: Vec<String> = report.cells.iter().map(|c| format!("{:.1}", c.psi().unwrap_or(f64::NAN))).collect();
    let offsets: Vec<String> = (0..fit.model.n_classes()).map(|l| format!("{:.2}", fit.model.beta(l, 1)[0])).collect();
    finish(
        chosen == 2 && below,
        format!(
            "censored {:.0}%, L={chosen} (Ψ {}), primary offsets [{}], at t=25 decontaminated {:.3} vs crude {:.3}",
            100.0 * censored,
            psis.join("/"),
            offsets.join(", "),
            decon.value.last().unwrap(),
            crude.value.last().unwrap()
        ),
    )
}

fn finish(ok: bool, detail: String) -> CheckResult {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let selected: Option<Vec<usize>> = std::env::var("HETCR_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> CheckResult); 6] = [
        (1, "parameter recovery on data sets A, B, C", criterion_1),
        (2, "analytic decontamination of quartile bands", criterion_2),
        (3, "retrospective classification fraction", criterion_3),
        (4, "identity and property suite", criterion_4),
        (5, "optimizer and error-bar calibration", criterion_5),
        (6, "heavily censored frailty-offset scenario", criterion_6),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {id} ({title}) [{secs:.0}s]: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {id} ({title}) [{secs:.0}s]: {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
