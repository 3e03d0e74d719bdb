mod common;

use common::{random_cohort, random_model, rng};
use hetcr::estimation::{fit_map, FitConfig};
use hetcr::inference::{class_posterior, cumulative_incidence, decontaminated_hazard, decontaminated_survival};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn survival_is_monotone_and_bounded(seed in any::<u64>(), z0 in -3.0..3.0f64, z1 in -3.0..3.0f64) {
        let m = random_model(&mut rng(seed), 3, 2, 2, 3, false);
        let mut prev = 1.0;
        for k in 0..=40 {
            let s = decontaminated_survival(&m, 1, &[z0, z1], k as f64 * 0.3);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev + 1e-15);
            prev = s;
        }
    }

    #[test]
    fn mixture_hazard_within_class_extremes(seed in any::<u64>(), z0 in -3.0..3.0f64, z1 in -3.0..3.0f64, t in 0.0..10.0f64) {
        let m = random_model(&mut rng(seed), 3, 2, 2, 3, false);
        let z = [z0, z1];
        let rate = m.base_hazards[1].rate(t);
        let class_rates: Vec<f64> = (0..3).map(|l| rate * m.linear_predictor(l, 1, &z).exp()).collect();
        let lo = class_rates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = class_rates.iter().copied().fold(0.0, f64::max);
        let h = decontaminated_hazard(&m, 1, &z, t);
        prop_assert!(h >= lo * (1.0 - 1e-12) && h <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn incidences_are_monotone_and_sum_below_one(seed in any::<u64>(), z0 in -2.0..2.0f64) {
        let m = random_model(&mut rng(seed), 2, 2, 1, 2, false);
        let mut prev = [0.0; 2];
        for k in 1..=20 {
            let t = k as f64 * 0.5;
            let f = [cumulative_incidence(&m, 1, &[z0], t), cumulative_incidence(&m, 2, &[z0], t)];
            prop_assert!(f[0] >= prev[0] - 1e-12 && f[1] >= prev[1] - 1e-12);
            prop_assert!(f[0] + f[1] <= 1.0 + 1e-9);
            prev = f;
        }
    }

    #[test]
    fn posterior_rows_lie_on_simplex(seed in any::<u64>(), free in any::<bool>()) {
        let mut g = rng(seed);
        let m = random_model(&mut g, 3, 2, 2, 2, free);
        let cohort = random_cohort(&mut g, 30, 2, 2, 10.0);
        let post = class_posterior(&m, &cohort).unwrap();
        for (i, row) in post.probabilities.iter().enumerate() {
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let best = row.iter().copied().fold(0.0, f64::max);
            prop_assert_eq!(row[post.assignment[i]], best);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn restart_histories_never_increase(seed in any::<u64>()) {
        let mut g = rng(seed);
        let cohort = random_cohort(&mut g, 60, 1, 1, 10.0);
        let cfg = FitConfig {
            restarts: 2,
            randomization_schedule: vec![0.3, 0.1],
            rng_seed: seed,
            compute_error_bars: false,
            ..Default::default()
        };
        let fit = fit_map(&cohort, 2, 1, &cfg).unwrap();
        for (history, initial) in fit.restart_histories.iter().zip(&fit.initial_psis) {
            prop_assert!(history[0] <= *initial);
            prop_assert!(history.windows(2).all(|w| w[1] <= w[0]));
        }
        prop_assert!(fit.per_restart_psis.iter().all(|p| fit.psi <= *p));
    }
}
