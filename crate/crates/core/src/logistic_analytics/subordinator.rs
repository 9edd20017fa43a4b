//! Subordinator branching: the functional `f_λ`, the invariant laws `ν`
//! and `ρ`, the recurrence taxonomy and the `(∂)/(ð)` estimates.

use serde::{Deserialize, Serialize};

use super::table::U_LO;
use super::LogisticModel;
use crate::error::{CbreError, Result};
use crate::mechanisms::{decade_test, ConditionCheck, Interval, Verdict};
use crate::quadrature::{gauss10, integrate, integrate_improper, integrate_log, Hints, Tolerance};

fn require_subordinator(model: &LogisticModel) -> Result<()> {
    if model.branching.is_subordinator {
        Ok(())
    } else {
        Err(CbreError::RegimeMismatch("this analysis needs a subordinator branching mechanism (γ = 0, ∫(1∧z)μ < ∞, δ >= 0)".into()))
    }
}

fn require_sigma(model: &LogisticModel) -> Result<()> {
    if model.sigma > 0.0 {
        Ok(())
    } else {
        Err(CbreError::RegimeMismatch("this analysis needs a non-degenerate environment, σ > 0".into()))
    }
}

/// `f_λ(x)/f_λ(a)` together with both logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhaldeResult {
    pub lambda: f64,
    pub ell: f64,
    pub x: f64,
    pub a: f64,
    /// `ln f_λ(x)`, with the normalisation fixed by `ℓ`.
    pub ln_f_x: f64,
    /// `ln f_λ(a)`; `+inf` when the integral diverges at `a = 0`.
    pub ln_f_a: f64,
    /// `E_x[exp(-λ∫_0^{T_a} Z_s ds)]`, or the escape probability for `λ = 0`.
    pub ratio: f64,
}

/// `L(z) = ∫ du/ω(u)` up to a constant.
fn log_omega_primitive(model: &LogisticModel, z: f64) -> f64 {
    let c = model.c;
    let s2 = model.sigma * model.sigma;
    if s2 > 0.0 {
        (z / (c + 0.5 * s2 * z)).ln() / c
    } else {
        z.ln() / c
    }
}

/// `ln f_λ(x)` for `f_λ(x) = ∫_0^∞ ω(z)^{-1} exp{-xz + ∫_ℓ^z (λ - ψ)/ω} dz`.
/// Returns `+inf` when the integral diverges at infinity (only possible
/// for `x = 0`) and an error when it diverges at the origin.
pub fn ln_f_lambda(model: &LogisticModel, x: f64, lambda: f64, ell: f64) -> Result<f64> {
    require_subordinator(model)?;
    if !(x >= 0.0 && lambda >= 0.0 && ell > 0.0 && ell.is_finite()) {
        return Err(CbreError::Domain(format!("f_λ needs x >= 0, λ >= 0, ℓ > 0; got x={x}, λ={lambda}, ℓ={ell}")));
    }
    let tab = model.table();
    let base = lambda * log_omega_primitive(model, ell) - tab.mrel(ell);
    let exponent = |z: f64, mrel: f64| lambda * log_omega_primitive(model, z) - mrel - base - x * z - model.omega(z).ln();
    // local slope d ln g / d ln z
    let slope = |z: f64| {
        let w = model.omega(z);
        z * (lambda - model.psi(z)) / w - x * z - z * (model.c + model.sigma * model.sigma * z) / w
    };
    let nodes = &tab.nodes;
    let lg: Vec<f64> = nodes.iter().map(|&z| exponent(z, tab.mrel(z))).collect();
    let shift = lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(CbreError::Divergence("f_λ integrand is not finite on the grid".into()));
    }

    let s_lo = slope(U_LO);
    if !(s_lo + 1.0 > 1e-3) {
        return Err(CbreError::Divergence(format!("f_λ integral diverges at the origin (local exponent {s_lo:.4})")));
    }
    let mut sum = (lg[0] - shift).exp() * U_LO / (s_lo + 1.0);
    for k in 0..nodes.len() - 1 {
        if lg[k].max(lg[k + 1]) - shift < -800.0 {
            continue;
        }
        sum += gauss10(|z| (exponent(z, tab.mrel(z)) - shift).exp(), nodes[k], nodes[k + 1]);
    }
    let z_hi = tab.u_hi();
    let g_hi = (lg[nodes.len() - 1] - shift).exp();
    if x * z_hi > 50.0 {
        sum += g_hi / x;
    } else {
        let s_hi = slope(z_hi);
        if s_hi < -1.001 {
            sum += g_hi * z_hi / (-s_hi - 1.0);
        } else {
            return Ok(f64::INFINITY);
        }
    }
    Ok(shift + sum.ln())
}

/// `f_λ(x)/f_λ(a)` with normalising point `ℓ` (default 1).
pub fn f_lambda_and_duhalde(model: &LogisticModel, x: f64, a: f64, lambda: f64, ell: Option<f64>) -> Result<DuhaldeResult> {
    require_subordinator(model)?;
    if !(0.0 <= a && a <= x) {
        return Err(CbreError::Domain(format!("f_λ ratio needs 0 <= a <= x, got a={a}, x={x}")));
    }
    let ell = ell.unwrap_or(1.0);
    let ln_f_x = ln_f_lambda(model, x, lambda, ell)?;
    let ln_f_a = if a == x { ln_f_x } else { ln_f_lambda(model, a, lambda, ell)? };
    let ratio = if a == x {
        1.0
    } else if ln_f_a == f64::INFINITY {
        0.0
    } else {
        (ln_f_x - ln_f_a).exp()
    };
    Ok(DuhaldeResult { lambda, ell, x, a, ln_f_x, ln_f_a, ratio })
}

/// Invariant laws of the subordinator case: `ν` with Laplace transform
/// `e^m` and Lévy density `Π`, and its size-biased version `ρ`.
#[derive(Clone, Debug)]
pub struct InvariantLaw {
    model: LogisticModel,
    /// `ϱ = ∫ s^{-1}ν(ds) = ∫_0^∞ e^{m}`, `None` when infinite.
    pub rho_normalizer: Option<f64>,
    pub normalizer_check: ConditionCheck,
}

pub fn invariant_law(model: &LogisticModel) -> Result<InvariantLaw> {
    require_subordinator(model)?;
    require_sigma(model)?;
    model.require_log_moment()?;
    let tab = model.table();
    let i = |u: f64| tab.ln_i(u).exp();
    let check = decade_test(
        |lo, hi| i(hi) - i(lo),
        |lo| integrate_improper(|u| tab.m(u).exp(), lo, f64::INFINITY, Hints::default(), Tolerance::new(1e-10, 1e-300)),
        1.0,
    );
    let rho_normalizer = check.value.map(|v| v + i(1.0));
    Ok(InvariantLaw { model: model.clone(), rho_normalizer, normalizer_check: check })
}

impl InvariantLaw {
    pub fn m(&self, lambda: f64) -> Result<f64> {
        self.model.m(lambda)
    }

    /// `∫e^{-λz}ν(dz) = e^{m(λ)}`.
    pub fn nu_laplace(&self, lambda: f64) -> Result<f64> {
        Ok(self.model.m(lambda)?.exp())
    }

    /// Density of `Π`:
    /// `(2/(σ²z)) e^{-Kz}(δ + ∫_0^z e^{Kv} μ̄(v) dv)` with `K = 2c/σ²`.
    pub fn pi_density(&self, z: f64) -> f64 {
        if !(z > 0.0) {
            return 0.0;
        }
        let br = &self.model.branching;
        let s2 = self.model.sigma * self.model.sigma;
        let k = 2.0 * self.model.c / s2;
        let mut inner = br.delta() * (-k * z).exp();
        if br.has_jumps() {
            // ∫_0^z e^{K(v-z)} μ̄(v) dv = ∫ (e^{K(min(s,z)-z)} - e^{-Kz})/K μ(ds)
            let kern = |s: f64| ((k * (s.min(z) - z)).exp() - (-k * z).exp()) / k;
            let r = br.mu.integrate_tol(&mut |s| kern(s), Interval::open(0.0, f64::INFINITY), Tolerance::new(1e-11, 1e-300));
            inner += r.value;
        }
        2.0 * inner / (s2 * z)
    }

    /// `-∫(1 - e^{-λz})Π(dz)`, an independent route to `m(λ)`.
    pub fn m_from_pi(&self, lambda: f64) -> f64 {
        -integrate_log(|z| -(-lambda * z).exp_m1() * self.pi_density(z), 0.0, f64::INFINITY, Tolerance::new(1e-11, 1e-300)).value
    }

    /// `(∫_0^1 zΠ(dz), ∫_1^∞ Π(dz))`, both finite for a genuine Lévy measure.
    pub fn pi_mass_checks(&self) -> (f64, f64) {
        let small = integrate_log(|z| z * self.pi_density(z), 0.0, 1.0, Tolerance::new(1e-10, 1e-300)).value;
        let large = integrate_improper(|z| self.pi_density(z), 1.0, f64::INFINITY, Hints::exponential(), Tolerance::new(1e-10, 1e-300)).value;
        (small, large)
    }

    /// `∫e^{-λz}ρ(dz) = ϱ^{-1}∫_λ^∞ e^m`.
    pub fn rho_laplace(&self, lambda: f64) -> Option<f64> {
        let rn = self.rho_normalizer?;
        let tab = self.model.table();
        if lambda <= 1.0 {
            Some(1.0 - tab.ln_i(lambda).exp() / rn)
        } else {
            let r = integrate_improper(|u| tab.m(u).exp(), lambda, f64::INFINITY, Hints::default(), Tolerance::new(1e-10, 1e-300));
            Some(r.value / rn)
        }
    }

    /// Mean of `ρ`, equal to `1/ϱ`.
    pub fn rho_mean(&self) -> Option<f64> {
        self.rho_normalizer.map(|r| 1.0 / r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdhVerdict {
    PartialHolds,
    EthHolds,
    Undecided,
}

/// Running extremes of `I^{(k)}(z)` on `z = 10^{-j}`. An estimate from
/// finitely many samples, never a proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdhEstimate {
    /// Depth at which the verdict was reached (or the deepest tried).
    pub k: usize,
    pub inf_estimate: f64,
    pub sup_estimate: f64,
    pub verdict: AdhVerdict,
    /// `(z, I^{(k)}(z))` for every sample point where it is defined.
    pub samples: Vec<(f64, f64)>,
}

/// Sample points `10^{-j}`, `j = 1..12`; extremes use `j >= 6` only.
const ADH_J: std::ops::RangeInclusive<i32> = 1..=12;
const ADH_WINDOW_FROM: i32 = 6;
const ADH_MARGIN: f64 = 0.1;

/// Estimate `Adh(I^{(k)})` for depths `1..=depth` and stop at the first
/// depth whose estimates separate from `σ²/2` by the relative margin.
pub fn adh_estimate(model: &LogisticModel, depth: usize) -> Result<AdhEstimate> {
    require_subordinator(model)?;
    if depth == 0 {
        return Err(CbreError::Domain("adherence depth must be at least 1".into()));
    }
    let br = &model.branching;
    let half = 0.5 * model.sigma * model.sigma;
    let ibar = |z: f64| br.mu.moment(1.0, Interval::open_closed(0.0, z)) + z * br.mu_bar(z);
    let base: Vec<(i32, f64, f64)> = ADH_J.map(|j| {
        let z = 10f64.powi(-j);
        (j, z, ibar(z))
    }).collect();
    let mut last = None;
    for k in 1..=depth {
        let mut samples = Vec::new();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(j, z, ib) in &base {
            let mut l = z.ln().abs();
            let mut v = l * ib;
            let mut defined = true;
            for _ in 2..=k {
                l = l.ln();
                if !(l > 0.0) {
                    defined = false;
                    break;
                }
                v = l * (v - half);
            }
            if !defined {
                continue;
            }
            samples.push((z, v));
            if j >= ADH_WINDOW_FROM {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            break;
        }
        let verdict = if lo > (1.0 + ADH_MARGIN) * half {
            AdhVerdict::PartialHolds
        } else if hi < (1.0 - ADH_MARGIN) * half {
            AdhVerdict::EthHolds
        } else {
            AdhVerdict::Undecided
        };
        let est = AdhEstimate { k, inf_estimate: lo, sup_estimate: hi, verdict, samples };
        if verdict != AdhVerdict::Undecided {
            return Ok(est);
        }
        last = Some(est);
    }
    last.ok_or_else(|| CbreError::Divergence("I^(k) is undefined on every sample point".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubordinatorRegime {
    /// `2δ < σ²`: `Z_t → 0` with positive probability.
    ConvergesToZero,
    PositiveRecurrent,
    /// Null recurrent, converging to 0 in probability.
    NullRecurrent,
    /// `Z_t → ∞`; escape probabilities via `f_0`.
    Transient,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorReport {
    pub regime: SubordinatorRegime,
    pub zero_polar: bool,
    pub delta: f64,
    pub sigma2: f64,
    /// Divergence test of `∫_0^1 z^{-1} exp{-∫_z^1 ∫(1 - e^{-us})μ(ds)/ω(u) du} dz`
    /// in `t = -ln z`; divergence means recurrence.
    pub recurrence_check: Option<ConditionCheck>,
    pub log_moment: bool,
    pub adh: Option<AdhEstimate>,
    /// `∫ s^{-1}ν(ds)`; finite exactly in the positive-recurrent regimes.
    pub rho_normalizer: Option<f64>,
    /// Decision rule that fired.
    pub rule: String,
}

/// Decision tree of the subordinator case.
pub fn subordinator_classify(model: &LogisticModel) -> Result<SubordinatorReport> {
    require_subordinator(model)?;
    require_sigma(model)?;
    let delta = model.branching.delta();
    let s2 = model.sigma * model.sigma;
    let log_moment = model.conditions().log_moment.holds();
    let mut rep = SubordinatorReport {
        regime: SubordinatorRegime::Undecided,
        zero_polar: false,
        delta,
        sigma2: s2,
        recurrence_check: None,
        log_moment,
        adh: None,
        rho_normalizer: None,
        rule: String::new(),
    };
    let equal = (2.0 * delta - s2).abs() <= 1e-12 * s2.max(2.0 * delta);
    if 2.0 * delta < s2 && !equal {
        rep.regime = SubordinatorRegime::ConvergesToZero;
        rep.rule = "2δ < σ²: zero is not polar and Z converges to 0 with positive probability".into();
        return Ok(rep);
    }
    rep.zero_polar = true;
    let rec = recurrence_check(model, log_moment);
    let recurrent = rec.verdict == Verdict::Fails;
    let inconclusive = rec.verdict == Verdict::Inconclusive;
    rep.recurrence_check = Some(rec);
    if inconclusive {
        rep.rule = "2δ >= σ²: zero is polar; the recurrence integral test is inconclusive".into();
        return Ok(rep);
    }
    if !recurrent {
        rep.regime = SubordinatorRegime::Transient;
        rep.rule = "2δ >= σ² and the recurrence integral converges: transient, Z → ∞".into();
        return Ok(rep);
    }
    if log_moment {
        rep.rho_normalizer = invariant_law(model)?.rho_normalizer;
    }
    if !equal {
        rep.regime = SubordinatorRegime::PositiveRecurrent;
        rep.rule = "2δ > σ² and the recurrence integral diverges: positive recurrent".into();
        return Ok(rep);
    }
    if !log_moment {
        rep.rule = "2δ = σ² without the log-moment condition: not covered by the adherence tests".into();
        return Ok(rep);
    }
    let adh = adh_estimate(model, 3)?;
    (rep.regime, rep.rule) = match adh.verdict {
        AdhVerdict::PartialHolds => (SubordinatorRegime::PositiveRecurrent, format!("2δ = σ² and the lower adherence estimate of I^({}) exceeds σ²/2: positive recurrent", adh.k)),
        AdhVerdict::EthHolds => (SubordinatorRegime::NullRecurrent, format!("2δ = σ² and the upper adherence estimate of I^({}) is below σ²/2: null recurrent, Z → 0 in probability", adh.k)),
        AdhVerdict::Undecided => (SubordinatorRegime::Undecided, "2δ = σ² and the adherence estimates do not separate from σ²/2".into()),
    };
    rep.adh = Some(adh);
    Ok(rep)
}

/// Recurrence integral in `t = -ln z`. Under the log-moment condition the
/// inner integral stays bounded, so the test diverges by construction.
fn recurrence_check(model: &LogisticModel, log_moment: bool) -> ConditionCheck {
    let br = &model.branching;
    let delta = br.delta();
    let jump_part = |u: f64| (-br.psi(u) - delta * u).max(0.0) / model.omega(u);
    if log_moment || !br.has_jumps() {
        return ConditionCheck {
            verdict: Verdict::Fails,
            value: None,
            lower_limit: 0.0,
            witness: None,
            note: Some("the log-moment condition bounds the inner integral, so the outer one diverges".into()),
        };
    }
    let tol = Tolerance::new(1e-10, 1e-300);
    let inner = |t: f64| integrate_log(jump_part, (-t).exp(), 1.0, tol).value;
    let outer = |t: f64| (-inner(t)).exp();
    decade_test(
        |lo, hi| integrate(outer, lo, hi, tol).value,
        |lo| integrate_improper(outer, lo, f64::INFINITY, Hints::default(), tol),
        5e-6,
    )
}
