//! Constructive constants behind the uniform bound on `E_x[T_0]`.

use serde::{Deserialize, Serialize};

use super::conditions::{condition_report, flow_time, grey_root};
use super::{Interval, ModelSpec};
use crate::error::{CbreError, Result};
use crate::quadrature::{integrate_improper, integrate_log, Hints, Tolerance};

/// Threshold constants and the resulting mean hitting-time bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `θ = -ψ′(0+) + d` (the search below uses `max(θ, 0)`).
    pub theta: f64,
    /// Rate `A > θ(e-1)` with `C(A) > 0`.
    pub a: f64,
    /// Threshold level `M`.
    pub m: f64,
    pub c_of_a: f64,
    /// Level beyond which `g(y) - θy > 0`.
    pub a0: f64,
    /// `(1/C(A))∫_{M/e}^∞ dw/(g(w) - θw)`, a bound on `sup_x E_x[T_M]`.
    pub sup_mean_tm_bound: f64,
    /// `(t0 + sup E[T_M]) / p(t0)` minimised over the trial time `t0`, where
    /// `p(t0)` bounds from below the extinction probability by `t0` from `M`.
    /// Only available for a deterministic environment.
    pub sup_mean_t0_bound: Option<f64>,
    pub trial_time: Option<f64>,
    pub trial_extinction_prob: Option<f64>,
}

const E: f64 = std::f64::consts::E;

struct BoundInputs {
    theta: f64,
    gamma2: f64,
    sigma2: f64,
    mu_small_z2: f64,
    mu_big_z: f64,
    pi_bar_1: f64,
    pi_small_z2: f64,
}

impl BoundInputs {
    fn closed_form(model: &ModelSpec) -> Self {
        let mu = &model.branching.mu;
        let pi = &model.environment.pi;
        Self {
            theta: model.theta().max(0.0),
            gamma2: model.branching.gamma.powi(2),
            sigma2: model.environment.sigma.powi(2),
            mu_small_z2: mu.moment(2.0, Interval::open(0.0, 1.0)),
            mu_big_z: mu.moment(1.0, Interval::open(1.0, f64::INFINITY)),
            pi_bar_1: pi.tail(1.0),
            pi_small_z2: pi.moment(2.0, Interval::open(-1.0, 1.0)),
        }
    }

    /// Same inputs through generic quadrature, for cross-checking.
    fn by_quadrature(model: &ModelSpec) -> Self {
        let mu = &model.branching.mu;
        let pi = &model.environment.pi;
        Self {
            theta: model.theta().max(0.0),
            gamma2: model.branching.gamma.powi(2),
            sigma2: model.environment.sigma.powi(2),
            mu_small_z2: mu.integrate(|z| z * z, Interval::open(0.0, 1.0)).value,
            mu_big_z: mu.integrate(|z| z, Interval::open(1.0, f64::INFINITY)).value,
            pi_bar_1: pi.integrate(|_| 1.0, Interval::open(1.0, f64::INFINITY)).value,
            pi_small_z2: pi.integrate(|z| z * z, Interval::open(-1.0, 1.0)).value,
        }
    }

    fn c(&self, a: f64) -> f64 {
        let t = self.theta;
        1.0 - (t * (2.0 * self.gamma2 + self.sigma2) / (2.0 * a * a)
            + t / (a * (a - t)) * self.mu_small_z2
            + (self.mu_big_z + self.pi_bar_1) / a
            + (t / (a * a) + t / (a * (a - t * (E - 1.0)))) * self.pi_small_z2)
    }
}

/// `C(A)`; `-inf` when `A <= θ(e-1)`.
pub fn c_of_a(model: &ModelSpec, a: f64) -> f64 {
    let inputs = BoundInputs::closed_form(model);
    if a <= inputs.theta * (E - 1.0) {
        return f64::NEG_INFINITY;
    }
    inputs.c(a)
}

fn excess(model: &ModelSpec, theta: f64, y: f64) -> f64 {
    model.g(y) - theta * y
}

fn tail_integral(model: &ModelSpec, theta: f64, from: f64) -> f64 {
    let r = integrate_improper(|w| 1.0 / excess(model, theta, w), from, f64::INFINITY, Hints::default(), Tolerance::default());
    if r.converged { r.value } else { f64::INFINITY }
}

/// Sampled check of `g(y) - θy >= Ay` for `y >= from`.
fn linear_domination(model: &ModelSpec, theta: f64, a: f64, from: f64) -> bool {
    (0..=60 * 16).all(|k| {
        let y = from * 2f64.powf(k as f64 / 16.0);
        excess(model, theta, y) >= a * y
    })
}

/// Compute `θ`, `A`, `a0`, `M`, `C(A)` and the mean hitting-time bounds.
pub fn bound_constants(model: &ModelSpec) -> Result<BoundConstants> {
    if !model.first_moment_regime() {
        return Err(CbreError::RegimeMismatch("bound constants need ∫_[1,∞) zμ(dz) < ∞".into()));
    }
    if !model.competition.is_non_decreasing() {
        return Err(CbreError::RegimeMismatch("bound constants need a non-decreasing competition map".into()));
    }
    let report = condition_report(model);
    if !report.h2_competition.holds() {
        return Err(CbreError::RegimeMismatch(format!("bound constants need ∫^∞ dy/g(y) < ∞ (verdict {:?})", report.h2_competition.verdict)));
    }
    let inputs = BoundInputs::closed_form(model);
    let theta = inputs.theta;
    let (a, c) = (0..=40)
        .map(|j| 2f64.powi(j))
        .filter(|&a| a > theta * (E - 1.0))
        .map(|a| (a, inputs.c(a)))
        .find(|&(_, c)| c > 0.0)
        .ok_or_else(|| CbreError::SearchExhausted("no A in 2^0..2^40 gives C(A) > 0".into()))?;

    // a0: first point of a fine grid past the last non-positive excess
    let grid = |k: i32| 2f64.powf(k as f64 / 8.0);
    let last_bad = (-160..=480).rev().find(|&k| excess(model, theta, grid(k)) <= 0.0);
    let a0 = match last_bad {
        None => grid(-160),
        Some(480) => return Err(CbreError::SearchExhausted("g(y) - θy stays non-positive up to 2^60".into())),
        Some(k) => grid(k + 1),
    };

    let feasible = |m: f64| tail_integral(model, theta, m / E) <= 1.0 / a && linear_domination(model, theta, a, m / E);
    let m_min = (a0 + 1.0) * E * (1.0 + 1e-12);
    let mut hi = m_min;
    let mut lo = m_min;
    let mut found = feasible(hi);
    let mut doublings = 0;
    while !found {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(CbreError::SearchExhausted("no threshold M satisfies both threshold inequalities".into()));
        }
        found = feasible(hi);
    }
    if hi > m_min {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
    }
    let m = hi;
    let sup_mean_tm_bound = tail_integral(model, theta, m / E) / c;

    let (sup_mean_t0_bound, trial_time, trial_extinction_prob) = match extinction_trial(model, m, sup_mean_tm_bound) {
        Some((b, t, p)) => (Some(b), Some(t), Some(p)),
        None => (None, None, None),
    };
    Ok(BoundConstants {
        theta: model.theta(),
        a,
        m,
        c_of_a: c,
        a0,
        sup_mean_tm_bound,
        sup_mean_t0_bound,
        trial_time,
        trial_extinction_prob,
    })
}

/// Geometric-trial bound `(t0 + B)/p(t0)`, with `p(t0) = exp(-M v̄(t0))` the
/// extinction probability by `t0` from `M` of the competition-free process,
/// whose mechanism is `ψ(u) - du` in a deterministic environment;
/// `v̄(t)` solves `∫_{v̄}^∞ du/(ψ(u) - du) = t`.
fn extinction_trial(model: &ModelSpec, m: f64, tm_bound: f64) -> Option<(f64, f64, f64)> {
    if !model.environment.is_deterministic() {
        return None;
    }
    let d = model.environment.d;
    let br = &model.branching;
    let psi = |u: f64| br.psi(u) - d * u;
    let root = grey_root(psi)?;
    let objective = |v: f64| {
        let t = flow_time(&psi, v);
        (t + tm_bound) * (m * v).exp()
    };
    let base = root.max(0.0);
    let mut best = (f64::INFINITY, base);
    for j in -40..=20 {
        let v = base + 2f64.powf(j as f64 / 2.0) / m;
        let f = objective(v);
        if f < best.0 {
            best = (f, v);
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    // golden-section refinement on the bracketing grid cell
    let (mut lo, mut hi) = ((best.1 - base) / 2f64.sqrt() + base, (best.1 - base) * 2f64.sqrt() + base);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = hi - r * (hi - lo);
        let x2 = lo + r * (hi - lo);
        if objective(x1) <= objective(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let v = 0.5 * (lo + hi);
    let (f, v) = if objective(v) < best.0 { (objective(v), v) } else { best };
    Some((f, flow_time(&psi, v), (-m * v).exp()))
}

/// Re-verify the threshold inequalities and `C(A) > 0` through a separate
/// evaluation path (generic quadrature, logarithmic substitution, a shifted
/// sampling grid).
pub fn check_bound_constants(model: &ModelSpec, bc: &BoundConstants) -> bool {
    let inputs = BoundInputs::by_quadrature(model);
    let theta = inputs.theta;
    if !(bc.a > theta * (E - 1.0) && inputs.c(bc.a) > 0.0) {
        return false;
    }
    if bc.m <= (bc.a0 + 1.0) * E {
        return false;
    }
    let from = bc.m / E;
    let tail = integrate_log(|w| 1.0 / excess(model, theta, w), from, f64::INFINITY, Tolerance::default());
    if !(tail.value <= (1.0 + 1e-9) / bc.a) {
        return false;
    }
    (0..4000).all(|k| {
        let y = from * (1.0 + k as f64 * 0.013).powf(1.7);
        excess(model, theta, y) >= bc.a * y * (1.0 - 1e-12)
    })
}
