//! The validation matrix: each row pits an analytic route against an
//! independent one (closed form, second analytic route, or Monte Carlo)
//! at a fixed tolerance.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use super::config::{AnalyticsSpec, RowParams, RowRequest, SCHEMA_VERSION};
use super::reports::simulate_summary;
use crate::diffusion_scale::{hitting_prob, laplace_ta_diffusion, riccati_bar_solve, DiffusionModel};
use crate::logistic_analytics::{
    f_lambda_and_duhalde, generator_apply, h_lambda_fn, invariant_law, laplace_ta_logistic, mean_t0, riccati_solve, LogisticModel, TestFunction,
};
use crate::mechanisms::{bound_constants, BranchingMechanism, CompetitionSpec, EnvironmentSpec, LevyMeasure, ModelSpec};
use crate::quadrature::{integrate_improper, Hints, Tolerance};
use crate::riccati::RiccatiSolution;
use crate::simulate::{
    coupling_check, estimate_exit, estimate_hitting, estimate_path_integral_laplace, lamperti_round_trip, round_trip_error, occupation_samples, simulate_sde1, LaplaceEstimate, PathSample, SimConfig,
};
use crate::{CbreError, Result};

/// Row identifiers in matrix order.
pub const ROWS: [&str; 12] = [
    "gamblers_ruin",
    "stationary_law",
    "closed_form_m",
    "mean_extinction_time",
    "laplace_two_routes",
    "riccati_defect",
    "eigenfunction",
    "comparison_coupling",
    "path_integral_laplace",
    "lamperti_round_trip",
    "comes_down_from_infinity",
    "determinism",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    Fail,
    Skipped,
}

/// One comparison inside a row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|measured - reference| <= tolerance`.
    pub fn near(name: impl Into<String>, measured: f64, reference: f64, tolerance: f64) -> Self {
        let d = (measured - reference).abs();
        Self { name: name.into(), measured, reference, discrepancy: d, tolerance, pass: d <= tolerance }
    }

    /// `measured <= limit`.
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), measured, reference: limit, discrepancy: measured, tolerance: limit, pass: measured <= limit }
    }

    /// `measured > floor`; the discrepancy is the margin.
    pub fn above(name: impl Into<String>, measured: f64, floor: f64) -> Self {
        Self { name: name.into(), measured, reference: floor, discrepancy: measured - floor, tolerance: 0.0, pass: measured > floor }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub id: usize,
    pub row: String,
    pub status: RowStatus,
    pub checks: Vec<Check>,
    pub message: Option<String>,
    pub elapsed_s: f64,
}

impl RowReport {
    /// One line: status, id, name and the worst check.
    pub fn summary_line(&self) -> String {
        let tag = match self.status {
            RowStatus::Pass => "PASS",
            RowStatus::Fail => "FAIL",
            RowStatus::Skipped => "SKIP",
        };
        let detail = match (&self.message, self.checks.iter().find(|c| !c.pass).or(self.checks.first())) {
            (Some(m), _) => m.clone(),
            (None, Some(c)) => format!("{}: measured {:.6e}, reference {:.6e}, discrepancy {:.3e}, tolerance {:.3e}", c.name, c.measured, c.reference, c.discrepancy, c.tolerance),
            (None, None) => String::new(),
        };
        format!("[{tag}] {:>2} {:<26} ({} checks, {:.1}s) {detail}", self.id, self.row, self.checks.len(), self.elapsed_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub rows: Vec<RowReport>,
    pub all_pass: bool,
}

enum Outcome {
    Checks(Vec<Check>),
    Skipped(String),
}

type RowFn = fn(&RowParams, Option<usize>) -> Result<Outcome>;

fn row_fn(name: &str) -> Option<(usize, RowFn)> {
    let f: RowFn = match name {
        "gamblers_ruin" => gamblers_ruin,
        "stationary_law" => stationary_law,
        "closed_form_m" => closed_form_m,
        "mean_extinction_time" => mean_extinction_time,
        "laplace_two_routes" => laplace_two_routes,
        "riccati_defect" => riccati_defect,
        "eigenfunction" => eigenfunction,
        "comparison_coupling" => comparison_coupling,
        "path_integral_laplace" => path_integral_laplace,
        "lamperti_round_trip" => lamperti_row,
        "comes_down_from_infinity" => comes_down,
        "determinism" => determinism,
        _ => return None,
    };
    Some((ROWS.iter().position(|r| *r == name).unwrap() + 1, f))
}

/// Run one row, turning errors and panics into failures.
pub fn run_row(req: &RowRequest, threads: Option<usize>) -> RowReport {
    let name = req.name().to_string();
    let Some((id, f)) = row_fn(&name) else {
        return RowReport { id: 0, row: name.clone(), status: RowStatus::Fail, checks: vec![], message: Some(format!("unknown row `{name}`; known rows: {}", ROWS.join(", "))), elapsed_s: 0.0 };
    };
    let params = req.params();
    let start = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(|| f(&params, threads)));
    let elapsed_s = start.elapsed().as_secs_f64();
    let (status, checks, message) = match res {
        Ok(Ok(Outcome::Checks(c))) => (if c.iter().all(|c| c.pass) { RowStatus::Pass } else { RowStatus::Fail }, c, None),
        Ok(Ok(Outcome::Skipped(m))) => (RowStatus::Skipped, vec![], Some(m)),
        Ok(Err(e)) => (RowStatus::Fail, vec![], Some(e.to_string())),
        Err(p) => {
            let m = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into());
            (RowStatus::Fail, vec![], Some(format!("panicked: {m}")))
        }
    };
    RowReport { id, row: name, status, checks, message, elapsed_s }
}

/// Run the requested rows, or all of them when `rows` is empty.
pub fn run_matrix(rows: &[RowRequest], threads: Option<usize>) -> ValidationReport {
    let all: Vec<RowRequest> = if rows.is_empty() { ROWS.iter().map(|r| RowRequest::Name(r.to_string())).collect() } else { rows.to_vec() };
    let rows: Vec<RowReport> = all.iter().map(|r| run_row(r, threads)).collect();
    let all_pass = rows.iter().all(|r| r.status == RowStatus::Pass);
    ValidationReport { schema_version: SCHEMA_VERSION, rows, all_pass }
}

fn sim(p: &RowParams, dt: f64, t_max: f64, n_paths: usize, seed: u64, threads: Option<usize>) -> SimConfig {
    SimConfig {
        dt: p.dt.unwrap_or(dt),
        t_max: p.t_max.unwrap_or(t_max),
        n_paths: p.n_paths.unwrap_or(n_paths),
        seed: p.seed.unwrap_or(seed),
        threads,
        ..SimConfig::default()
    }
}

fn competition(c: f64) -> CompetitionSpec {
    if c > 0.0 { CompetitionSpec::Logistic { c } } else { CompetitionSpec::None }
}

/// Jump-free model from the row defaults and overrides.
fn diffusive(p: &RowParams, b: f64, gamma: f64, sigma: f64, c: f64) -> Result<ModelSpec> {
    let br = BranchingMechanism::diffusive(p.b.unwrap_or(b), p.gamma.unwrap_or(gamma))?;
    ModelSpec::new(br, EnvironmentSpec::brownian(0.0, p.sigma.unwrap_or(sigma))?, competition(p.c.unwrap_or(c)))
}

/// Pure-drift subordinator `ψ(u) = -δu` with logistic competition.
fn drift_subordinator(p: &RowParams, delta: f64, sigma: f64, c: f64) -> Result<std::result::Result<ModelSpec, String>> {
    if p.gamma.is_some_and(|g| g != 0.0) {
        return Ok(Err("this row needs γ = 0 (subordinator case)".into()));
    }
    let sigma = p.sigma.unwrap_or(sigma);
    if sigma <= 0.0 {
        return Ok(Err("this row needs an environment with σ > 0".into()));
    }
    let br = BranchingMechanism::diffusive(p.b.unwrap_or(delta), 0.0)?.into_subordinator()?;
    Ok(Ok(ModelSpec::new(br, EnvironmentSpec::brownian(0.0, sigma)?, CompetitionSpec::Logistic { c: p.c.unwrap_or(c) })?))
}

fn needs_gamma(m: &ModelSpec) -> Option<Outcome> {
    (m.branching.gamma <= 0.0).then(|| Outcome::Skipped(format!("this row needs branching noise γ > 0 (got γ = 0, σ = {})", m.environment.sigma)))
}

fn runtime(limit: f64, start: Instant) -> Check {
    Check::at_most("runtime_s", start.elapsed().as_secs_f64(), limit)
}

/// Exit of `(0, 2)` from 1 against the scale-function probability.
fn gamblers_ruin(p: &RowParams, threads: Option<usize>) -> Result<Outcome> {
    let start = Instant::now();
    let m = diffusive(p, 0.0, 1.0, 1.0, 0.0)?;
    if let Some(s) = needs_gamma(&m) {
        return Ok(s);
    }
    let analytic = hitting_prob(&DiffusionModel::from_model(&m)?, 1.0, 2.0)?;
    let est = estimate_exit(&m, 1.0, 0.0, 2.0, &sim(p, 1e-3, 200.0, 10_000, 1, threads))?;
    Ok(Outcome::Checks(vec![
        Check::near("p_exit_at_0_vs_scale", est.p_lower.value, analytic, 3.0 * est.p_lower.stderr),
        Check::at_most("censored_fraction", est.censored_fraction, 0.0),
        runtime(120.0, start),
    ]))
}

/// Kolmogorov distance of a sample from a continuous law.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Occupation law of the stochastic logistic equation against `ρ` and the
/// stationary Fokker–Planck density `z^{2b/σ²-2} e^{-2cz/σ²}`.
fn stationary_law(p: &RowParams, threads: Option<usize>) -> Result<Outcome> {
    let start = Instant::now();
    let m = match drift_subordinator(p, 2.0, 2f64.sqrt(), 1.0)? {
        Ok(m) => m,
        Err(why) => return Ok(Outcome::Skipped(why)),
    };
    let (b, s2) = (m.branching.b, m.environment.sigma.powi(2));
    let c = m.competition.logistic_c().unwrap_or(0.0);
    let shape = 2.0 * b / s2 - 1.0;
    let rate = 2.0 * c / s2;
    if !(shape > 0.0) {
        return Ok(Outcome::Skipped(format!("no stationary law: needs 2b > σ², got b = {b}, σ² = {s2}")));
    }
    let mut checks = Vec::new();
    // Fokker–Planck density by quadrature against ρ from the invariant law
    let density = |z: f64| z.powf(shape - 1.0) * (-rate * z).exp();
    let tol = Tolerance::new(1e-13, 0.0);
    let hints = Hints { singular_at_a: shape < 1.0, ..Hints::exponential() };
    let norm = integrate_improper(density, 0.0, f64::INFINITY, hints, tol).value;
    let law = invariant_law(&LogisticModel::from_model(&m)?)?;
    for l in [0.5, 1.0, 2.0] {
        let fp = integrate_improper(|z| density(z) * (-l * z).exp(), 0.0, f64::INFINITY, hints, tol).value / norm;
        let rho = law.rho_laplace(l).ok_or_else(|| CbreError::Divergence("ρ is not normalisable".into()))?;
        checks.push(Check::near(format!("rho_laplace_vs_fokker_planck(λ={l})"), rho, fp, 1e-8));
    }
    let cfg = SimConfig { record_stride: 100, ..sim(p, 1e-3, 250.0, 16, 3, threads) };
    let samples = occupation_samples(&m, 1.0, 50.0, &cfg)?;
    let gamma = Gamma::new(shape, rate).map_err(|e| CbreError::Domain(e.to_string()))?;
    checks.push(Check::at_most("ks_distance", ks_distance(samples, |x| gamma.cdf(x)), 0.05));
    checks.push(runtime(300.0, start));
    Ok(Outcome::Checks(checks))
}

/// `m(λ) = -(2δ/σ²) ln(1 + σ²λ/(2c))` for the pure-drift subordinator.
fn closed_form_m(p: &RowParams, _: Option<usize>) -> Result<Outcome> {
    let m = match drift_subordinator(p, 2.0, 2f64.sqrt(), 1.0)? {
        Ok(m) => m,
        Err(why) => return Ok(Outcome::Skipped(why)),
    };
    let lm = LogisticModel::from_model(&m)?;
    let (d, s2, c) = (lm.branching().delta(), lm.sigma().powi(2), lm.c());
    let mut checks = Vec::new();
    for l in [0.1, 1.0, 10.0] {
        checks.push(Check::near(format!("m({l})"), lm.m(l)?, -(2.0 * d / s2) * (0.5 * s2 * l / c).ln_1p(), 1e-8));
    }
    Ok(Outcome::Checks(checks))
}

/// `E_1[T_0]` by quadrature against Monte Carlo.
fn mean_extinction_time(p: &RowParams, threads: Option<usize>) -> Result<Outcome> {
    let start = Instant::now();
    let m = diffusive(p, 0.0, 1.0, 0.0, 1.0)?;
    if let Some(s) = needs_gamma(&m) {
        return Ok(s);
    }
    let analytic = mean_t0(&LogisticModel::from_model(&m)?, 1.0)?;
    let est = estimate_hitting(&m, 1.0, 0.0, &[], &sim(p, 1e-3, 40.0, 10_000, 2024, threads))?;
    let uncensored = (1.0 - est.censored_fraction) * est.n_paths as f64;
    Ok(Outcome::Checks(vec![
        Check::near("mean_t0_vs_mc", est.mean_t.value, analytic, 3.0 * est.mean_t.stderr),
        Check::above("uncensored_paths", uncensored, 9_999.0),
        runtime(300.0, start),
    ]))
}

fn row5_model(p: &RowParams) -> Result<ModelSpec> {
    diffusive(p, 0.0, 1.0, 1.0, 1.0)
}

/// Scale-function route against the `h_λ` route and the Monte Carlo bounds.
fn laplace_two_routes(p: &RowParams, threads: Option<usize>) -> Result<Outcome> {
    let m = row5_model(p)?;
    if let Some(s) = needs_gamma(&m) {
        return Ok(s);
    }
    let dm = DiffusionModel::from_model(&m)?;
    let lm = LogisticModel::from_model(&m)?;
    let lambdas = [0.5, 1.0, 2.0];
    let est = estimate_hitting(&m, 1.0, 0.0, &lambdas, &sim(p, 1e-3, 50.0, 10_000, 5, threads))?;
    let mut checks = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        let d = laplace_ta_diffusion(&dm, 1.0, 0.0, l)?;
        let g = laplace_ta_logistic(&lm, 1.0, 0.0, l)?;
        checks.push(Check::near(format!("scale_vs_h_route(λ={l})"), d, g, 1e-6));
        checks.push(bracket(format!("mc_bracket(λ={l})"), d, &est.laplace[i]));
    }
    Ok(Outcome::Checks(checks))
}

/// Analytic value inside the censored Monte Carlo bracket widened by three
/// standard errors on each side; the discrepancy is the distance outside.
fn bracket(name: impl Into<String>, analytic: f64, e: &LaplaceEstimate) -> Check {
    let lo = e.lower.value - 3.0 * e.lower.stderr;
    let hi = e.upper.value + 3.0 * e.upper.stderr;
    let outside = (lo - analytic).max(analytic - hi).max(0.0);
    Check { name: name.into(), measured: analytic, reference: 0.5 * (e.lower.value + e.upper.value), discrepancy: outside, tolerance: 0.0, pass: e.brackets(analytic, 3.0) }
}

fn compound_poisson() -> Result<LevyMeasure> {
    LevyMeasure::atoms(&[(0.5, 1.0), (2.0, 0.5)])
}

fn row7_model(p: &RowParams) -> Result<LogisticModel> {
    let br = BranchingMechanism::new(p.b.unwrap_or(0.0), p.gamma.unwrap_or(1.0), compound_poisson()?)?;
    LogisticModel::new(br, p.c.unwrap_or(1.0), p.sigma.unwrap_or(0.5))
}

fn riccati_checks(tag: &str, sol: &RiccatiSolution, checks: &mut Vec<Check>) {
    let l = sol.lambda;
    checks.push(Check::at_most(format!("{tag}_residual(λ={l})"), sol.max_scaled_residual, 1e-8));
    let worst = sol.y.iter().zip(&sol.r).map(|(y, r)| y - l.sqrt() * r).fold(f64::NEG_INFINITY, f64::max);
    let ok = sol.bounds_hold;
    checks.push(Check { name: format!("{tag}_end_bounds(λ={l})"), measured: worst, reference: 0.0, discrepancy: worst.max(0.0), tolerance: 0.0, pass: ok });
}

/// Residual and end bounds of every Riccati solve used by the suite.
fn riccati_defect(p: &RowParams, _: Option<usize>) -> Result<Outcome> {
    let m = row5_model(p)?;
    if let Some(s) = needs_gamma(&m) {
        return Ok(s);
    }
    let dm = DiffusionModel::from_model(&m)?;
    let lm = LogisticModel::from_model(&m)?;
    let jm = row7_model(p)?;
    let mut checks = Vec::new();
    for l in [0.5, 1.0, 2.0] {
        riccati_checks("scale_route", &riccati_bar_solve(&dm, l)?, &mut checks);
        riccati_checks("h_route", &riccati_solve(&lm, l)?, &mut checks);
        riccati_checks("h_route_jumps", &riccati_solve(&jm, l)?, &mut checks);
    }
    Ok(Outcome::Checks(checks))
}

/// `𝒰h_λ = λh_λ` with compound-Poisson branching jumps.
fn eigenfunction(p: &RowParams, _: Option<usize>) -> Result<Outcome> {
    let model = row7_model(p)?;
    if model.branching().gamma <= 0.0 {
        return Ok(Outcome::Skipped("this row needs branching noise γ > 0".into()));
    }
    let lambda = 1.0;
    let h = h_lambda_fn(&model, lambda)?;
    let f = |y: f64| h.value(y).unwrap_or(f64::NAN);
    let df = |y: f64| h.derivatives(y).map_or(f64::NAN, |d| d[1]);
    let d2f = |y: f64| h.derivatives(y).map_or(f64::NAN, |d| d[2]);
    let tf = TestFunction { f: &f, df: &df, d2f: &d2f };
    let mut checks = Vec::new();
    for x in [0.5, 1.0, 2.0] {
        let u = generator_apply(&model, &tf, x)?;
        let want = lambda * h.value(x)?;
        let rel = ((u - want) / want).abs();
        checks.push(Check { name: format!("generator_over_lambda_h(x={x})"), measured: u, reference: want, discrepancy: rel, tolerance: 1e-4, pass: rel <= 1e-4 });
    }
    Ok(Outcome::Checks(checks))
}

/// Shared-noise pairs from 1 and 2 stay ordered.
fn comparison_coupling(p: &RowParams, threads: Option<usize>) -> Result<Outcome> {
    let m = diffusive(p, 0.5, 1.0, 0.5, 1.0)?;
    let cfg = sim(p, 1e-3, 5.0, 1_000, 11, threads);
    let rep = coupling_check(&m, None, 1.0, 2.0, &cfg)?;
    Ok(Outcome::Checks(vec![
        Check::at_most("violations_beyond_dt_sqrt", rep.violations_beyond_tolerance as f64, 0.0),
        Check::above("pairs", rep.n_pairs as f64, 999.0),
        Check { name: "max_violation".into(), measured: rep.max_violation, reference: 0.0, discrepancy: rep.max_violation, tolerance: cfg.dt.sqrt(), pass: rep.max_violation <= cfg.dt.sqrt() },
    ]))
}

/// `f_λ(x)/f_λ(a)` under changes of `ℓ` and against Monte Carlo.
fn path_integral_laplace(p: &RowParams, threads: Option<usize>) -> Result<Outcome> {
    let m = match drift_subordinator(p, 1.0, 1.0, 1.0)? {
        Ok(m) => m,
        Err(why) => return Ok(Outcome::Skipped(why)),
    };
    let lm = LogisticModel::from_model(&m)?;
    let (x, a, lambda) = (2.0, 1.0, 1.0);
    let base = f_lambda_and_duhalde(&lm, x, a, lambda, Some(1.0))?.ratio;
    let mut checks = Vec::new();
    for ell in [0.5, 2.0] {
        let r = f_lambda_and_duhalde(&lm, x, a, lambda, Some(ell))?.ratio;
        checks.push(Check::near(format!("ratio_ell_{ell}_vs_ell_1"), r, base, 1e-8));
    }
    let est = estimate_path_integral_laplace(&m, x, a, &[lambda], &sim(p, 1e-3, 50.0, 10_000, 9, threads))?;
    checks.push(bracket("ratio_vs_mc_bracket", base, &est[0]));
    Ok(Outcome::Checks(checks))
}

/// Simulated CBI path through the time change and back.
fn lamperti_row(p: &RowParams, _: Option<usize>) -> Result<Outcome> {
    let m = match drift_subordinator(p, 1.0, 1.0, 1.0)? {
        Ok(m) => m,
        Err(why) => return Ok(Outcome::Skipped(why)),
    };
    let base = sim(p, 1e-3, 10.0, 1, 0, None);
    let tol = 5.0 * base.dt.sqrt();
    let mut checks = Vec::new();
    for k in 0..5 {
        let r = simulate_sde1(&m, 1.0, &SimConfig { seed: base.seed + k, ..base.clone() })?;
        let (_, back) = lamperti_round_trip(&r)?;
        checks.push(Check::at_most(format!("sup_error(seed={})", base.seed + k), round_trip_error(&r, &back), tol));
    }
    let c = PathSample::constant(2.0, 5.0, 0.01);
    let (z, back) = lamperti_round_trip(&c)?;
    checks.push(Check::at_most("constant_path_error", round_trip_error(&c, &back), 0.0));
    // Z_t = 2 on [0, 5/2] for R ≡ 2 on [0, 5]
    checks.push(Check::near("constant_path_clock", *z.times.last().unwrap(), 2.5, 1e-12));
    Ok(Outcome::Checks(checks))
}

/// `E_x[T_0]` increases in `x` and stays below its `x = ∞` value and the
/// constructive bound.
fn comes_down(p: &RowParams, _: Option<usize>) -> Result<Outcome> {
    let m = diffusive(p, 0.0, 1.0, 0.0, 1.0)?;
    if let Some(s) = needs_gamma(&m) {
        return Ok(s);
    }
    let lm = LogisticModel::from_model(&m)?;
    let xs = [1.0, 10.0, 1e3, 1e6];
    let vals = xs.iter().map(|&x| mean_t0(&lm, x)).collect::<Result<Vec<f64>>>()?;
    let inf = mean_t0(&lm, f64::INFINITY)?;
    let mut checks = Vec::new();
    for i in 1..xs.len() {
        checks.push(Check::above(format!("increase_{}_to_{}", xs[i - 1], xs[i]), vals[i] - vals[i - 1], 0.0));
    }
    checks.push(Check::above("sup_minus_mean_t0(1e6)", inf - vals[3], 0.0));
    let Some(bound) = bound_constants(&m)?.sup_mean_t0_bound else {
        return Ok(Outcome::Skipped("the constructive bound needs a deterministic environment (σ = 0)".into()));
    };
    checks.push(Check::above("bound_minus_max_mean_t0", bound - vals[3], 0.0));
    checks.push(Check::above("bound_minus_mean_t0(inf)", bound - inf, 0.0));
    Ok(Outcome::Checks(checks))
}

/// Byte-identical summaries for repeated runs and worker counts.
fn determinism(p: &RowParams, _: Option<usize>) -> Result<Outcome> {
    let m = diffusive(p, 0.0, 1.0, 0.5, 1.0)?;
    let points = AnalyticsSpec { lambdas: vec![0.5, 1.0], levels: vec![0.0, 0.5], x0s: vec![1.0] };
    let run = |threads| -> Result<String> {
        let cfg = sim(p, 1e-3, 20.0, 2_000, 42, Some(threads));
        Ok(serde_json::to_string(&simulate_summary(&m, &cfg, &points)?)?)
    };
    let a = run(1)?;
    let b = run(1)?;
    let c = run(4)?;
    let diff = |x: &str, y: &str| if x == y { 0.0 } else { 1.0 };
    Ok(Outcome::Checks(vec![Check::at_most("repeat_run_differs", diff(&a, &b), 0.0), Check::at_most("threads_1_vs_4_differs", diff(&a, &c), 0.0)]))
}
