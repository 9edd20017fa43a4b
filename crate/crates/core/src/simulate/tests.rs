use super::*;
use crate::logistic_analytics::{mean_t0, LogisticModel};
use crate::mechanisms::{BranchingMechanism, CompetitionSpec, EnvironmentSpec, LevyMeasure};
use approx::assert_relative_eq;
use proptest::prelude::*;

fn model(b: f64, gamma: f64, sigma: f64, competition: CompetitionSpec) -> ModelSpec {
    ModelSpec::new(BranchingMechanism::diffusive(b, gamma).unwrap(), EnvironmentSpec::brownian(0.0, sigma).unwrap(), competition).unwrap()
}

fn cfg(dt: f64, t_max: f64, n_paths: usize, seed: u64) -> SimConfig {
    SimConfig { dt, t_max, n_paths, seed, ..SimConfig::default() }
}

fn terminal(paths: &[PathSample]) -> Vec<f64> {
    paths.iter().map(|p| *p.values.last().unwrap()).collect()
}

#[test]
fn zero_start_stays_at_zero() {
    let m = model(1.0, 1.0, 0.5, CompetitionSpec::Logistic { c: 1.0 });
    let p = simulate_path(&m, 0.0, &cfg(1e-2, 1.0, 1, 3)).unwrap();
    assert!(p.values.iter().all(|&v| v == 0.0));
    assert_eq!(p.absorbed_at, Some(0.0));
}

#[test]
fn deterministic_logistic_is_first_order() {
    let m = model(1.0, 0.0, 0.0, CompetitionSpec::Logistic { c: 1.0 });
    let exact = 1.0 / (1.0 + (-1.0f64).exp());
    let err = |dt: f64| (simulate_path(&m, 0.5, &cfg(dt, 1.0, 1, 0)).unwrap().values.last().unwrap() - exact).abs();
    let (e1, e2) = (err(1e-2), err(5e-3));
    assert!(e1 < 1e-2, "{e1}");
    let ratio = e1 / e2;
    assert!((1.8..2.2).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn feller_mean_grows_like_exp_bt() {
    let m = model(1.0, 1.0, 0.0, CompetitionSpec::None);
    let paths = simulate_paths(&m, 1.0, &cfg(1e-3, 1.0, 100_000, 11)).unwrap();
    let est = Estimate::from_samples(terminal(&paths));
    assert!(est.covers(std::f64::consts::E, 3.0), "{est:?}");
}

#[test]
fn critical_feller_in_environment_is_a_martingale() {
    let m = model(0.0, 1.0, 0.7, CompetitionSpec::None);
    let paths = simulate_paths(&m, 2.0, &cfg(1e-3, 1.0, 40_000, 5)).unwrap();
    let est = Estimate::from_samples(terminal(&paths));
    assert!(est.covers(2.0, 3.0), "{est:?}");
}

#[test]
fn compensated_jumps_keep_the_mean() {
    // big branching jumps balanced by the drift; small environment jumps compensated
    let br = BranchingMechanism::new(-1.0, 0.5, LevyMeasure::atoms(&[(2.0, 0.5), (0.3, 2.0)]).unwrap()).unwrap();
    let env = EnvironmentSpec::new(0.0, 0.0, LevyMeasure::atoms(&[(-0.5, 1.0), (0.4, 0.5)]).unwrap()).unwrap();
    let m = ModelSpec::new(br, env, CompetitionSpec::None).unwrap();
    let paths = simulate_paths(&m, 1.0, &cfg(1e-3, 1.0, 40_000, 9)).unwrap();
    let est = Estimate::from_samples(terminal(&paths));
    assert!(est.covers(1.0, 3.0), "{est:?}");
}

#[test]
fn identical_seeds_are_bit_identical_across_worker_counts() {
    let m = model(0.5, 1.0, 0.5, CompetitionSpec::Logistic { c: 1.0 });
    let run = |threads| simulate_paths(&m, 1.0, &SimConfig { threads: Some(threads), ..cfg(1e-2, 2.0, 64, 42) }).unwrap();
    assert_eq!(run(1), run(4));
    let other = simulate_paths(&m, 1.0, &cfg(1e-2, 2.0, 64, 43)).unwrap();
    assert_ne!(run(1), other);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn paths_are_non_negative_and_absorbing(seed in 0u64..1000, x0 in 0.01f64..3.0) {
        let m = model(0.0, 1.5, 1.0, CompetitionSpec::Logistic { c: 1.0 });
        let p = simulate_path(&m, x0, &cfg(1e-2, 3.0, 1, seed)).unwrap();
        prop_assert!(p.values.iter().all(|&v| v >= 0.0));
        prop_assert!(p.times.windows(2).all(|w| w[0] < w[1]));
        if let Some(a) = p.absorbed_at {
            prop_assert!(p.times.iter().zip(&p.values).filter(|(&t, _)| t >= a).all(|(_, &v)| v == 0.0));
        }
    }

    #[test]
    fn laplace_bounds_are_ordered_probabilities(seed in 0u64..100) {
        let m = model(0.0, 1.0, 0.0, CompetitionSpec::Logistic { c: 1.0 });
        let est = estimate_hitting(&m, 1.0, 0.0, &[0.0, 0.5, 1.0, 4.0], &cfg(1e-2, 1.0, 50, seed)).unwrap();
        for l in &est.laplace {
            prop_assert!(0.0 <= l.lower.value && l.lower.value <= l.upper.value && l.upper.value <= 1.0);
        }
        for w in est.laplace.windows(2) {
            prop_assert!(w[1].lower.value <= w[0].lower.value && w[1].upper.value <= w[0].upper.value);
        }
        prop_assert!((0.0..=1.0).contains(&est.p_hit_by_tmax.value));
    }
}

#[test]
fn hitting_at_the_start_is_immediate() {
    let m = model(0.0, 1.0, 0.0, CompetitionSpec::Logistic { c: 1.0 });
    let est = estimate_hitting(&m, 1.0, 1.0, &[0.5, 2.0], &cfg(1e-2, 1.0, 20, 0)).unwrap();
    for l in est.laplace {
        assert_eq!((l.lower.value, l.upper.value), (1.0, 1.0));
    }
    assert_eq!(est.mean_t.value, 0.0);
}

#[test]
fn laplace_at_zero_is_the_hitting_probability() {
    let m = model(0.0, 1.0, 0.0, CompetitionSpec::Logistic { c: 1.0 });
    let short = estimate_hitting(&m, 1.0, 0.0, &[0.0], &cfg(1e-2, 0.5, 400, 1)).unwrap();
    assert_eq!(short.laplace[0].lower.value, short.p_hit_by_tmax.value);
    let long = estimate_hitting(&m, 1.0, 0.0, &[0.0], &cfg(1e-2, 30.0, 400, 1)).unwrap();
    assert!(long.p_hit_by_tmax.value > short.p_hit_by_tmax.value);
    assert_eq!(long.p_hit_by_tmax.value, 1.0);
}

#[test]
fn all_censored_runs_warn() {
    let m = model(0.0, 1.0, 0.0, CompetitionSpec::Logistic { c: 1.0 });
    let est = estimate_hitting(&m, 5.0, 0.0, &[1.0], &cfg(1e-2, 0.01, 10, 0)).unwrap();
    assert!(est.warning.is_some());
    assert_eq!(est.censored_fraction, 1.0);
}

#[test]
fn feller_logistic_mean_extinction_time() {
    let m = model(0.0, 1.0, 0.0, CompetitionSpec::Logistic { c: 1.0 });
    let analytic = mean_t0(&LogisticModel::new(BranchingMechanism::diffusive(0.0, 1.0).unwrap(), 1.0, 0.0).unwrap(), 1.0).unwrap();
    let est = estimate_hitting(&m, 1.0, 0.0, &[], &cfg(1e-3, 40.0, 10_000, 2024)).unwrap();
    assert_eq!(est.censored_fraction, 0.0);
    assert!(est.mean_t.covers(analytic, 3.0), "{:?} vs {analytic}", est.mean_t);
}

#[test]
fn gamblers_ruin_on_a_linear_scale() {
    let m = model(0.0, 1.0, 1.0, CompetitionSpec::None);
    let est = estimate_exit(&m, 1.0, 0.0, 2.0, &cfg(1e-3, 100.0, 4_000, 77)).unwrap();
    assert_eq!(est.censored_fraction, 0.0);
    assert!(est.p_lower.covers(0.5, 3.0), "{est:?}");
}

#[test]
fn coupling_of_equal_starts_is_identical() {
    let m = model(0.5, 1.0, 0.5, CompetitionSpec::Logistic { c: 1.0 });
    let (a, b) = coupled_pair(&m, 1.0, 1.0, &cfg(1e-2, 2.0, 1, 8)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn coupling_keeps_the_order() {
    let m = model(0.5, 1.0, 0.5, CompetitionSpec::Logistic { c: 1.0 });
    let rep = coupling_check(&m, None, 1.0, 2.0, &cfg(1e-2, 2.0, 1000, 8)).unwrap();
    assert_eq!(rep.violations_beyond_tolerance, 0, "{rep:?}");
    assert!(rep.grid_points > 1000);
}

#[test]
fn competition_free_process_dominates() {
    let logistic = model(0.5, 1.0, 0.5, CompetitionSpec::Logistic { c: 1.0 });
    let free = model(0.5, 1.0, 0.5, CompetitionSpec::None);
    let rep = coupling_check(&logistic, Some(&free), 1.0, 1.0, &cfg(1e-2, 2.0, 300, 8)).unwrap();
    assert_eq!(rep.violations_beyond_tolerance, 0, "{rep:?}");
}

#[test]
fn jumps_are_nested_under_coupling() {
    let br = BranchingMechanism::new(0.0, 0.5, LevyMeasure::atoms(&[(1.5, 2.0)]).unwrap()).unwrap();
    let m = ModelSpec::new(br, EnvironmentSpec::default(), CompetitionSpec::Logistic { c: 1.0 }).unwrap();
    let rep = coupling_check(&m, None, 0.5, 1.5, &cfg(1e-2, 2.0, 300, 4)).unwrap();
    assert_eq!(rep.violations_beyond_tolerance, 0, "{rep:?}");
}

#[test]
fn constant_path_time_change_is_exact() {
    let r = PathSample::constant(2.0, 5.0, 0.01);
    let tc = time_change(&r).unwrap();
    for &(s, e) in &tc.eta {
        assert_relative_eq!(e, s / 2.0, max_relative = 1e-12, epsilon = 1e-15);
    }
    let (z, back) = lamperti_round_trip(&r).unwrap();
    assert!(z.values.iter().all(|&v| v == 2.0));
    assert_relative_eq!(*z.times.last().unwrap(), 2.5, max_relative = 1e-12);
    assert!(round_trip_error(&r, &back) < 1e-12);
    assert_relative_eq!(tc.c_at(1.0).unwrap(), 2.0, max_relative = 1e-12);
}

#[test]
fn absorbed_r_gives_extinction_at_eta_infinity() {
    let r = PathSample { times: vec![0.0, 1.0, 2.0, 3.0], values: vec![1.0, 0.5, 0.25, 0.0], absorbed_at: Some(3.0), exploded: false };
    let (z, _) = lamperti_round_trip(&r).unwrap();
    let eta_inf = 0.5 * (1.0 + 2.0) + 0.5 * (2.0 + 4.0) + 4.0;
    assert_eq!(z.absorbed_at, Some(eta_inf));
    assert_eq!(*z.values.last().unwrap(), 0.0);
    assert_eq!(z.value_at(eta_inf + 1.0), 0.0);
}

#[test]
fn degenerate_windows_are_rejected() {
    let r = PathSample { times: vec![0.0, 1.0], values: vec![1.0, 0.0], absorbed_at: Some(1.0), exploded: false };
    assert!(lamperti_round_trip(&r).is_err());
    assert!(time_change(&PathSample::constant(0.0, 1.0, 0.1)).is_err());
}

#[test]
fn cbi_round_trip() {
    let br = BranchingMechanism::diffusive(1.0, 0.0).unwrap();
    let m = ModelSpec::new(br, EnvironmentSpec::brownian(0.0, 1.0).unwrap(), CompetitionSpec::Logistic { c: 1.0 }).unwrap();
    let dt = 1e-3;
    for seed in 0..5 {
        let r = simulate_sde1(&m, 1.0, &cfg(dt, 10.0, 1, seed)).unwrap();
        assert!(r.absorbed_at.is_none());
        let (_, back) = lamperti_round_trip(&r).unwrap();
        let err = round_trip_error(&r, &back);
        assert!(err <= 5.0 * dt.sqrt(), "seed {seed}: {err}");
    }
}

#[test]
fn config_validation_and_defaults() {
    assert!(SimConfig { dt: 0.0, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { n_paths: 0, ..SimConfig::default() }.validate().is_err());
    let c: SimConfig = serde_json::from_str(r#"{"dt": 0.01, "t_max": 1, "n_paths": 5}"#).unwrap();
    assert_eq!((c.record_stride, c.seed, c.jump_cutoff_eps), (1, 0, None));
    let heavy = ModelSpec::new(
        BranchingMechanism::new(0.0, 1.0, LevyMeasure::power_law(1.0, 1.5, 0.0, Some(1.0), crate::mechanisms::Side::Positive).unwrap()).unwrap(),
        EnvironmentSpec::default(),
        CompetitionSpec::None,
    )
    .unwrap();
    let eps = default_jump_cutoff(&heavy);
    // ∫_0^ε z²·z^{-2.5} dz = ε^{1/2}/0.5 must stay below 2e-4
    assert!(2.0 * eps.sqrt() <= 2e-4 && 2.0 * (10.0 * eps).sqrt() > 2e-4, "{eps}");
}
