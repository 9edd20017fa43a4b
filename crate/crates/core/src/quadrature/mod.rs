//! Numerical engines shared by the analytic modules: adaptive improper
//! quadrature, an embedded Runge–Kutta integrator and monotone inversion.

mod gk;
mod invert;
mod ode;

pub use gk::{gauss10, integrate};
pub use invert::invert_monotone;
pub use ode::{solve_ode, solve_ode_system, OdeFailure, OdeOptions, OdeSolution};

use serde::{Deserialize, Serialize};

/// Outcome of an adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl IntegralResult {
    pub fn exact(value: f64) -> Self {
        Self { value, abs_error_estimate: 0.0, converged: true, evaluations: 0 }
    }

    /// Sum of independent pieces; converged only if every piece converged.
    pub fn combine(parts: &[IntegralResult]) -> Self {
        let mut out = Self::exact(0.0);
        for p in parts {
            out.value += p.value;
            out.abs_error_estimate += p.abs_error_estimate;
            out.converged &= p.converged;
            out.evaluations += p.evaluations;
        }
        out
    }

    pub fn scaled(self, k: f64) -> Self {
        Self { value: self.value * k, abs_error_estimate: self.abs_error_estimate * k.abs(), ..self }
    }
}

/// Tolerances for the adaptive routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_subdivisions: 2000 }
    }
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    /// Looser setting for inner loops of nested integrals.
    pub fn inner() -> Self {
        Self { rtol: 1e-6, atol: 1e-14, max_subdivisions: 500 }
    }
}

/// How the integrand decays at an infinite upper limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Decay {
    /// Power-law tails; an extra exponential substitution is applied.
    #[default]
    Algebraic,
    /// Exponential or faster; the plain rational map suffices.
    Exponential,
}

/// Structural hints for [`integrate_improper`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Hints {
    /// Integrable (at most inverse-square-root-like) singularity at `a`.
    pub singular_at_a: bool,
    pub decay: Decay,
}

impl Hints {
    pub fn singular() -> Self {
        Self { singular_at_a: true, ..Self::default() }
    }
    pub fn exponential() -> Self {
        Self { decay: Decay::Exponential, ..Self::default() }
    }
}

/// Integrate `f` over `[a, b]` where `b` may be `+inf`.
///
/// Infinite upper limits use `z = a + t/(1-t)` (preceded by `z = a + e^w - 1`
/// for algebraic decay); an endpoint singularity at `a` uses `z = a + t^2`.
pub fn integrate_improper<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, hints: Hints, tol: Tolerance) -> IntegralResult {
    assert!(!a.is_nan() && !b.is_nan(), "NaN integration limit");
    if b < a {
        return integrate_improper(f, b, a, hints, tol).scaled(-1.0);
    }
    if a == b {
        return IntegralResult::exact(0.0);
    }
    if b.is_finite() {
        if hints.singular_at_a {
            let tmax = (b - a).sqrt();
            return integrate(|t| 2.0 * t * f(a + t * t), 0.0, tmax, tol);
        }
        return integrate(f, a, b, tol);
    }
    if hints.singular_at_a {
        let near = integrate(|t| 2.0 * t * f(a + t * t), 0.0, 1.0, tol);
        let far = integrate_improper(f, a + 1.0, b, Hints { singular_at_a: false, ..hints }, tol);
        return IntegralResult::combine(&[near, far]);
    }
    match hints.decay {
        Decay::Exponential => integrate(
            |t| {
                let s = 1.0 - t;
                let v = f(a + t / s);
                if v == 0.0 { 0.0 } else { v / (s * s) }
            },
            0.0,
            1.0,
            tol,
        ),
        Decay::Algebraic => integrate(
            |t| {
                let s = 1.0 - t;
                let w = t / s;
                let ew = w.exp();
                if !ew.is_finite() {
                    return 0.0;
                }
                let v = f(a + w.exp_m1());
                if v == 0.0 { 0.0 } else { v * ew / (s * s) }
            },
            0.0,
            1.0,
            tol,
        ),
    }
}

/// Integrate `f(z) dz` over `(lo, hi)` with `0 <= lo < hi <= inf` in the
/// logarithmic variable `z = e^t`; suited to power-law behaviour at 0 and ∞.
pub fn integrate_log<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> IntegralResult {
    assert!(lo >= 0.0 && hi > lo, "integrate_log needs 0 <= lo < hi");
    let mut g = move |t: f64| {
        let z = t.exp();
        if z == 0.0 || !z.is_finite() {
            return 0.0;
        }
        let v = f(z);
        if v == 0.0 { 0.0 } else { v * z }
    };
    let tl = if lo == 0.0 { f64::NEG_INFINITY } else { lo.ln() };
    let th = if hi.is_infinite() { f64::INFINITY } else { hi.ln() };
    integrate_line(&mut g, tl, th, tol)
}

/// Integrate over an interval of the extended real line.
pub fn integrate_line<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: Tolerance) -> IntegralResult {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate(|t| f(t), a, b, tol),
        (true, false) => integrate_improper(|t| f(t), a, f64::INFINITY, Hints::exponential(), tol),
        (false, true) => integrate_improper(|s| f(b - s), 0.0, f64::INFINITY, Hints::exponential(), tol),
        (false, false) => {
            let r = integrate_improper(|t| f(t), 0.0, f64::INFINITY, Hints::exponential(), tol);
            let l = integrate_improper(|s| f(-s), 0.0, f64::INFINITY, Hints::exponential(), tol);
            IntegralResult::combine(&[l, r])
        }
    }
}

/// `e^{-x} - 1 + x`, accurate for small `x`.
pub fn exp_neg_m1_plus(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0)
    } else {
        (-x).exp_m1() + x
    }
}

/// `(1 - e^{-x}) / x`, equal to 1 at 0.
pub fn one_minus_exp_over(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}
