use super::*;
use crate::diffusion_scale::{laplace_ta_diffusion, DiffusionModel};
use crate::mechanisms::{LevyMeasure, Side};
use approx::assert_relative_eq;

fn diffusive(b: f64, gamma: f64, c: f64, sigma: f64) -> LogisticModel {
    LogisticModel::new(BranchingMechanism::diffusive(b, gamma).unwrap(), c, sigma).unwrap()
}

fn feller() -> LogisticModel {
    diffusive(0.0, 1.0, 1.0, 0.0)
}

/// ψ = ω = u + u²/2, so `m(u) = u`.
fn m_equals_u() -> LogisticModel {
    diffusive(-1.0, 0.5f64.sqrt(), 1.0, 1.0)
}

fn subordinator(delta: f64, mu: LevyMeasure, c: f64, sigma: f64) -> LogisticModel {
    let small = mu.moment(1.0, Interval::open(0.0, 1.0));
    let br = BranchingMechanism::new(delta + small, 0.0, mu).unwrap().into_subordinator().unwrap();
    LogisticModel::new(br, c, sigma).unwrap()
}

fn compound_poisson() -> LevyMeasure {
    LevyMeasure::atoms(&[(0.5, 1.0), (2.0, 0.5)]).unwrap()
}

#[test]
fn m_closed_form_for_pure_drift_subordinator() {
    let m = subordinator(2.0, LevyMeasure::empty(), 1.0, 2f64.sqrt());
    assert_eq!(m.m(0.0).unwrap(), 0.0);
    for l in [0.1, 1.0, 7.5, 300.0] {
        assert_relative_eq!(m.m(l).unwrap(), -2.0 * (1.0 + l).ln(), max_relative = 1e-10);
    }
    assert_relative_eq!(m.m(1.0).unwrap(), -1.3862944, epsilon = 1e-7);
}

#[test]
fn m_agrees_with_the_levy_representation() {
    let model = subordinator(1.0, compound_poisson(), 1.0, 1.0);
    let law = invariant_law(&model).unwrap();
    for l in [0.5, 1.0, 3.0, 20.0] {
        let direct = model.m(l).unwrap();
        let dual = law.m_from_pi(l);
        assert!((direct - dual).abs() <= 1e-8 * direct.abs().max(1.0), "λ={l}: {direct} vs {dual}");
    }
}

#[test]
fn i_varphi_and_r_for_linear_psi() {
    let model = diffusive(-1.0, 0.0, 1.0, 0.0);
    let iv = i_and_varphi(&model).unwrap();
    assert_eq!(iv.i(0.0), 0.0);
    assert_eq!(iv.varphi(0.0).unwrap(), 0.0);
    for l in [1e-6, 0.01, 0.5, 1.0, 3.0, 20.0] {
        assert_relative_eq!(model.m(l).unwrap(), l, max_relative = 1e-10);
        assert_relative_eq!(iv.i(l), l.exp_m1(), max_relative = 1e-9);
    }
    for z in [1e-4, 0.3, 1.0, 10.0, 1e4] {
        assert_relative_eq!(iv.varphi(z).unwrap(), z.ln_1p(), max_relative = 1e-9);
        assert_relative_eq!(iv.r(z).unwrap(), 1.0 / ((1.0 + z) * z.ln_1p().sqrt()), max_relative = 1e-8);
    }
}

#[test]
fn varphi_inverts_i() {
    let model = m_equals_u();
    let iv = i_and_varphi(&model).unwrap();
    for l in [1e-3, 0.2, 1.0, 4.0, 25.0, 200.0] {
        let z = iv.i(l);
        assert!((iv.varphi(z).unwrap() - l).abs() <= 1e-9 * l.max(1.0));
        assert!((iv.varphi_ln(iv.ln_i(l)).unwrap() - l).abs() <= 1e-9 * l.max(1.0));
    }
}

#[test]
fn non_general_mechanism_is_rejected() {
    let model = subordinator(1.0, LevyMeasure::empty(), 1.0, 1.0);
    assert!(matches!(i_and_varphi(&model), Err(CbreError::RegimeMismatch(_))));
    assert!(matches!(mean_t0(&model, 1.0), Err(CbreError::RegimeMismatch(_))));
}

#[test]
fn riccati_solution_properties() {
    let model = feller();
    let sol = riccati_solve(&model, 1.0).unwrap();
    assert!(sol.max_scaled_residual <= 1e-8, "residual {}", sol.max_scaled_residual);
    assert!(sol.bounds_hold);
    assert!(sol.y.iter().all(|&y| y >= 0.0));
    assert!(sol.integral.unwrap().is_finite());
    let n = sol.grid.len();
    let k = n / 10;
    for i in (0..k).chain(n - k..n) {
        assert!(sol.y[i] <= sol.r[i] * (1.0 + 1e-9));
    }
    let shape = riccati_shape(&sol);
    assert!(shape.decreasing_initially && shape.decreasing_ultimately);

    let zero = riccati_solve(&model, 0.0).unwrap();
    assert!(zero.y.iter().all(|&y| y == 0.0));
    assert_eq!(zero.integral, Some(0.0));
}

#[test]
fn h_at_zero_two_routes() {
    for model in [feller(), m_equals_u()] {
        for l in [0.5, 1.0, 2.0] {
            let h = h_lambda_fn(&model, l).unwrap();
            let a = h.at_zero().unwrap();
            let b = h.at_zero_by_quadrature().unwrap();
            assert!(a > 1.0);
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }
}

#[test]
fn h_limits() {
    let model = feller();
    assert_relative_eq!(h_lambda(&model, 1.0, 1e-8).unwrap(), 1.0, epsilon = 1e-6);
    assert_relative_eq!(h_lambda(&model, 1e6, 1.0).unwrap(), 1.0, epsilon = 1e-4);
}

#[test]
fn laplace_agrees_with_the_scale_function_route() {
    let model = diffusive(0.0, 1.0, 1.0, 1.0);
    let dm = DiffusionModel::new(0.0, 1.0, 1.0, CompetitionSpec::Logistic { c: 1.0 }).unwrap();
    for l in [0.5, 1.0, 2.0] {
        let a = laplace_ta_logistic(&model, 1.0, 0.0, l).unwrap();
        let b = laplace_ta_diffusion(&dm, 1.0, 0.0, l).unwrap();
        assert!((a - b).abs() <= 1e-6, "λ={l}: {a} vs {b}");
        let a2 = laplace_ta_logistic(&model, 2.0, 0.5, l).unwrap();
        let b2 = laplace_ta_diffusion(&dm, 2.0, 0.5, l).unwrap();
        assert!((a2 - b2).abs() <= 1e-6, "λ={l}: {a2} vs {b2}");
    }
}

#[test]
fn laplace_monotone_and_trivial() {
    let model = feller();
    assert_eq!(laplace_ta_logistic(&model, 1.5, 1.5, 1.0).unwrap(), 1.0);
    let mut prev = 1.0;
    for l in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let v = laplace_ta_logistic(&model, 1.0, 0.0, l).unwrap();
        assert!(v > 0.0 && v < prev);
        prev = v;
    }
    let mut prev = 1.0;
    for x in [0.1, 0.5, 1.0, 3.0, 10.0] {
        let v = laplace_ta_logistic(&model, x, 0.0, 1.0).unwrap();
        assert!(v < prev);
        prev = v;
    }
}

#[test]
fn mean_t0_matches_oracles() {
    let cases: [(LogisticModel, [f64; 5]); 2] = [
        (feller(), [0.909937960325419, 1.23542392141540, 1.52531359138024, 1.86935255610380, 1.96870124321530]),
        (m_equals_u(), [0.867342795749467, 1.09352724877692, 1.28730437490871, 1.54054536334872, 1.63169146234970]),
    ];
    for (model, want) in cases {
        for (x, w) in [0.5, 1.0, 2.0, 10.0, f64::INFINITY].into_iter().zip(want) {
            assert_relative_eq!(mean_t0(&model, x).unwrap(), w, max_relative = 1e-8);
        }
    }
}

#[test]
fn mean_t0_shape() {
    let model = feller();
    assert_eq!(mean_t0(&model, 0.0).unwrap(), 0.0);
    let xs = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 1e6];
    let v: Vec<f64> = xs.iter().map(|&x| mean_t0(&model, x).unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] > w[0]));
    assert!(v[6].is_finite() && v[6] <= mean_t0(&model, f64::INFINITY).unwrap());
}

#[test]
fn generator_on_exponentials() {
    let model = LogisticModel::new(BranchingMechanism::new(0.3, 0.8, compound_poisson()).unwrap(), 1.5, 0.7).unwrap();
    let one = TestFunction { f: &|_| 1.0, df: &|_| 0.0, d2f: &|_| 0.0 };
    for x in [0.0, 0.5, 3.0] {
        assert_eq!(generator_apply(&model, &one, x).unwrap(), 0.0);
    }
    for lt in [0.3, 1.0, 4.0] {
        let f = move |x: f64| (-lt * x).exp();
        let df = move |x: f64| -lt * (-lt * x).exp();
        let d2f = move |x: f64| lt * lt * (-lt * x).exp();
        let tf = TestFunction { f: &f, df: &df, d2f: &d2f };
        for x in [0.2, 1.0, 2.5] {
            let want = (model.psi(lt) * x + model.omega(lt) * x * x) * f(x);
            assert_relative_eq!(generator_apply(&model, &tf, x).unwrap(), want, max_relative = 1e-9, epsilon = 1e-13);
        }
    }
}

#[test]
fn h_is_an_eigenfunction_of_the_generator() {
    let model = LogisticModel::new(BranchingMechanism::new(0.0, 1.0, compound_poisson()).unwrap(), 1.0, 0.5).unwrap();
    let lambda = 1.0;
    let h = h_lambda_fn(&model, lambda).unwrap();
    let f = |y: f64| h.value(y).unwrap();
    let df = |y: f64| h.derivatives(y).unwrap()[1];
    let d2f = |y: f64| h.derivatives(y).unwrap()[2];
    let tf = TestFunction { f: &f, df: &df, d2f: &d2f };
    for x in [0.5, 1.0, 2.0] {
        let u = generator_apply(&model, &tf, x).unwrap();
        let want = lambda * h.value(x).unwrap();
        assert!(((u - want) / want).abs() <= 1e-4, "x={x}: {u} vs {want}");
    }
}

#[test]
fn duhalde_ratio_closed_form_and_ell_invariance() {
    // δ = σ = c = λ = 1 without jumps: f_1(x) ∝ 1/x
    let model = subordinator(1.0, LevyMeasure::empty(), 1.0, 1.0);
    let base = f_lambda_and_duhalde(&model, 2.0, 1.0, 1.0, None).unwrap();
    assert_relative_eq!(base.ratio, 0.5, max_relative = 1e-9);
    for ell in [0.5, 2.0] {
        let r = f_lambda_and_duhalde(&model, 2.0, 1.0, 1.0, Some(ell)).unwrap();
        assert!((r.ratio - base.ratio).abs() <= 1e-8);
    }
    assert_eq!(f_lambda_and_duhalde(&model, 1.0, 1.0, 1.0, None).unwrap().ratio, 1.0);

    let jumps = subordinator(1.0, compound_poisson(), 1.0, 1.0);
    let r: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&e| f_lambda_and_duhalde(&jumps, 3.0, 1.0, 0.7, Some(e)).unwrap().ratio).collect();
    assert!(r[0] > 0.0 && r[0] < 1.0);
    assert!((r[0] - r[1]).abs() <= 1e-8 && (r[2] - r[1]).abs() <= 1e-8);
    let further = f_lambda_and_duhalde(&jumps, 5.0, 1.0, 0.7, None).unwrap().ratio;
    let heavier = f_lambda_and_duhalde(&jumps, 3.0, 1.0, 1.4, None).unwrap().ratio;
    assert!(further < r[1] && heavier < r[1]);
}

#[test]
fn invariant_law_gamma_case() {
    let model = subordinator(2.0, LevyMeasure::empty(), 1.0, 2f64.sqrt());
    let law = invariant_law(&model).unwrap();
    assert_relative_eq!(law.rho_normalizer.unwrap(), 1.0, max_relative = 1e-8);
    assert_relative_eq!(law.rho_mean().unwrap(), 1.0, max_relative = 1e-8);
    for l in [0.0, 0.5, 1.0, 4.0] {
        assert_relative_eq!(law.nu_laplace(l).unwrap(), (1.0 + l).powi(-2), max_relative = 1e-10);
        // stationary density z^{2b/σ²-2} e^{-2cz/σ²} = e^{-z}, normalised
        assert_relative_eq!(law.rho_laplace(l).unwrap(), 1.0 / (1.0 + l), max_relative = 1e-8);
    }
    // Gamma(2, 1) Lévy density 2e^{-z}/z
    assert_relative_eq!(law.pi_density(0.7), 2.0 * (-0.7f64).exp() / 0.7, max_relative = 1e-12);
    let (small, large) = law.pi_mass_checks();
    assert_relative_eq!(small, 2.0 * (1.0 - (-1.0f64).exp()), max_relative = 1e-8);
    assert!(large.is_finite() && large > 0.0);
}

#[test]
fn invariant_law_critical_case_has_infinite_normalizer() {
    let model = subordinator(1.0, LevyMeasure::empty(), 1.0, 2f64.sqrt());
    let law = invariant_law(&model).unwrap();
    assert_relative_eq!(law.nu_laplace(3.0).unwrap(), 0.25, max_relative = 1e-10);
    assert!(law.rho_normalizer.is_none());
    assert_eq!(law.normalizer_check.verdict, Verdict::Fails);
}

#[test]
fn invariant_law_with_jumps() {
    let model = subordinator(1.5, compound_poisson(), 1.0, 1.0);
    let law = invariant_law(&model).unwrap();
    let mut prev = 1.0;
    for l in [0.1, 0.5, 1.0, 5.0, 50.0] {
        let v = law.nu_laplace(l).unwrap();
        assert!(v > 0.0 && v <= prev);
        prev = v;
    }
    let (small, large) = law.pi_mass_checks();
    assert!(small.is_finite() && large.is_finite());
    assert!(law.rho_normalizer.is_some());
}

#[test]
fn subordinator_regimes() {
    let pos = subordinator_classify(&subordinator(2.0, LevyMeasure::empty(), 1.0, 2f64.sqrt())).unwrap();
    assert_eq!(pos.regime, SubordinatorRegime::PositiveRecurrent);
    assert!(pos.zero_polar);
    assert_relative_eq!(pos.rho_normalizer.unwrap(), 1.0, max_relative = 1e-8);

    let low = subordinator_classify(&subordinator(0.1, LevyMeasure::empty(), 1.0, 2f64.sqrt())).unwrap();
    assert_eq!(low.regime, SubordinatorRegime::ConvergesToZero);
    assert!(!low.zero_polar);

    let null = subordinator_classify(&subordinator(1.0, compound_poisson(), 1.0, 2f64.sqrt())).unwrap();
    assert_eq!(null.regime, SubordinatorRegime::NullRecurrent);
    assert_eq!(null.adh.unwrap().verdict, AdhVerdict::EthHolds);
    assert!(null.rho_normalizer.is_none());
}

#[test]
fn adh_compound_poisson_and_empty() {
    let cp = adh_estimate(&subordinator(1.0, compound_poisson(), 1.0, 2f64.sqrt()), 3).unwrap();
    assert_eq!((cp.k, cp.verdict), (1, AdhVerdict::EthHolds));
    assert!(cp.inf_estimate <= cp.sup_estimate);
    let empty = adh_estimate(&subordinator(1.0, LevyMeasure::empty(), 1.0, 2f64.sqrt()), 3).unwrap();
    assert_eq!((empty.k, empty.verdict, empty.sup_estimate), (1, AdhVerdict::EthHolds, 0.0));
}

/// Density `A(ln z + 2)/(z² ln³ z)` on `(0, 0.1]`, so that
/// `∫_0^z μ̄ ≈ A/|ln z|`.
/// Density `a(ln z + 2)/(z² ln³ z)` on `[1e-150, 0.1]`, for which
/// `|ln z|·Ī(z) = a(1 - |ln z|/|ln 1e-150|) + O(1/|ln z|²)`.
pub(crate) fn heavy_small_jumps(a: f64) -> LevyMeasure {
    let n = 120;
    let (lo, hi) = (1e-150f64.ln(), 0.1f64.ln());
    let z: Vec<f64> = (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect();
    let d: Vec<f64> = z.iter().map(|&z| a * (z.ln() + 2.0) / (z * z * z.ln().powi(3))).collect();
    LevyMeasure::tabulated(z, d, Side::Positive).unwrap()
}

#[test]
fn adh_partial_for_heavy_small_jumps() {
    let model = subordinator(1.0, heavy_small_jumps(1.5), 1.0, 2f64.sqrt());
    let est = adh_estimate(&model, 3).unwrap();
    assert_eq!((est.k, est.verdict), (1, AdhVerdict::PartialHolds), "{est:?}");
    let rep = subordinator_classify(&model).unwrap();
    assert_eq!(rep.regime, SubordinatorRegime::PositiveRecurrent);
}


