use serde::{Deserialize, Serialize};

use super::{Interval, ModelSpec};
use crate::quadrature::{integrate, integrate_improper, invert_monotone, Hints, IntegralResult, Tolerance};

/// Outcome of a yes/no integral test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// Evidence of divergence: the truncated integral at the last cutoff and
/// the ratio of its last two decade increments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub cutoff: f64,
    pub truncated_value: f64,
    pub increment_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub verdict: Verdict,
    /// Finite integral value, present exactly when the verdict is `holds`.
    pub value: Option<f64>,
    /// Lower integration limit actually used.
    pub lower_limit: f64,
    pub witness: Option<DivergenceWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionCheck {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
    pub fn fails(&self) -> bool {
        self.verdict == Verdict::Fails
    }
    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub grey: ConditionCheck,
    pub log_moment: ConditionCheck,
    pub first_moment: ConditionCheck,
    pub h2_competition: ConditionCheck,
}

const DECADES: usize = 8;

/// Decide whether `∫_{u0}^∞` of a non-negative integrand is finite.
///
/// `piece(lo, hi)` integrates over `[lo, hi]` and `tail(lo)` over `[lo, ∞)`.
/// With decade increments `Δ_k` over `[u0·10^{k-1}, u0·10^k]`, `k = 1..8`,
/// partial sums `I_k` and ratios `q_k = Δ_k/Δ_{k-1}`:
/// holds when `Δ_8 <= 1e-8·I_8` or `q_6..q_8 <= 0.8` with `|q_8 - q_7| <= 0.05`;
/// fails when `q_6..q_8 >= 0.95` or an increment is infinite;
/// inconclusive otherwise.
pub fn decade_test<P, T>(mut piece: P, mut tail: T, u0: f64) -> ConditionCheck
where
    P: FnMut(f64, f64) -> f64,
    T: FnMut(f64) -> IntegralResult,
{
    let mut inc = [0.0; DECADES + 1];
    let mut total = 0.0;
    for k in 1..=DECADES {
        let lo = u0 * 10f64.powi(k as i32 - 1);
        let hi = u0 * 10f64.powi(k as i32);
        let d = piece(lo, hi);
        if !(d < f64::INFINITY) {
            return ConditionCheck {
                verdict: Verdict::Fails,
                value: None,
                lower_limit: u0,
                witness: Some(DivergenceWitness { cutoff: hi, truncated_value: f64::INFINITY, increment_ratio: f64::INFINITY }),
                note: None,
            };
        }
        inc[k] = d.max(0.0);
        total += inc[k];
    }
    let cutoff = u0 * 10f64.powi(DECADES as i32);
    let ratio = |k: usize| if inc[k] == 0.0 { 0.0 } else { inc[k] / inc[k - 1] };
    let q = [ratio(DECADES - 2), ratio(DECADES - 1), ratio(DECADES)];
    let mut holds_value = |q8: f64| {
        let t = tail(cutoff);
        let rest = if t.converged && t.value.is_finite() {
            t.value
        } else {
            inc[DECADES] * q8 / (1.0 - q8).max(1e-3)
        };
        total + rest
    };
    if total == 0.0 {
        return ConditionCheck { verdict: Verdict::Holds, value: Some(holds_value(0.0)), lower_limit: u0, witness: None, note: None };
    }
    if inc[DECADES] <= 1e-8 * total || (q.iter().all(|&x| x <= 0.8) && (q[2] - q[1]).abs() <= 0.05) {
        return ConditionCheck { verdict: Verdict::Holds, value: Some(holds_value(q[2].min(0.8))), lower_limit: u0, witness: None, note: None };
    }
    let witness = Some(DivergenceWitness { cutoff, truncated_value: total, increment_ratio: q[2] });
    let verdict = if q.iter().all(|&x| x >= 0.95) { Verdict::Fails } else { Verdict::Inconclusive };
    ConditionCheck { verdict, value: None, lower_limit: u0, witness, note: None }
}

/// Integrate `f` over `[u0, ∞)` via [`decade_test`] with plain quadrature.
pub(crate) fn decade_test_fn<F: Fn(f64) -> f64>(f: F, u0: f64) -> ConditionCheck {
    let tol = Tolerance::default();
    decade_test(
        |lo, hi| {
            let r = integrate(&f, lo, hi, tol);
            r.value
        },
        |lo| integrate_improper(&f, lo, f64::INFINITY, Hints::default(), tol),
        u0,
    )
}

/// Largest root `ϑ` of ψ (so that ψ > 0 on `(ϑ, ∞)`), or `None` when ψ is
/// not positive anywhere up to `2^60`.
pub fn grey_root(psi: impl Fn(f64) -> f64) -> Option<f64> {
    let mut last_nonpos: Option<f64> = None;
    for j in -20..=60 {
        let u = 2f64.powi(j);
        if psi(u) <= 0.0 {
            last_nonpos = Some(u);
        }
    }
    match last_nonpos {
        None => Some(0.0),
        Some(u) if u >= 2f64.powi(60) => None,
        Some(u) => {
            // ψ is convex with ψ(0) = 0: a single sign change on (u, 2u]
            let mut lo = u;
            let mut hi = 2.0 * u;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if psi(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * hi {
                    break;
                }
            }
            Some(hi)
        }
    }
}

/// Grey's condition `∫^∞ du/ψ(u) < ∞`, started at `max(1, 2ϑ)`.
pub(crate) fn grey_check(psi: impl Fn(f64) -> f64) -> ConditionCheck {
    let Some(root) = grey_root(&psi) else {
        let cutoff = 2f64.powi(60);
        return ConditionCheck {
            verdict: Verdict::Fails,
            value: None,
            lower_limit: cutoff,
            witness: Some(DivergenceWitness { cutoff, truncated_value: f64::INFINITY, increment_ratio: f64::INFINITY }),
            note: Some("psi is not positive up to 2^60".into()),
        };
    };
    let u0 = (2.0 * root).max(1.0);
    decade_test_fn(|u| 1.0 / psi(u), u0)
}

fn h2_check(model: &ModelSpec, z0_override: Option<f64>) -> ConditionCheck {
    let g = |z: f64| model.g(z);
    let z0 = z0_override.or_else(|| (0..=60).map(|j| 2f64.powi(j)).find(|&z| g(z) > 0.0));
    let Some(z0) = z0 else {
        let cutoff = 2f64.powi(60);
        return ConditionCheck {
            verdict: Verdict::Fails,
            value: None,
            lower_limit: cutoff,
            witness: Some(DivergenceWitness { cutoff, truncated_value: f64::INFINITY, increment_ratio: f64::INFINITY }),
            note: Some("g has no positive value on the grid 2^0..2^60".into()),
        };
    };
    let check = decade_test_fn(|y| 1.0 / g(y), z0);
    match (check.verdict, model.competition.inverse_tail(z0)) {
        (Verdict::Holds, Some(exact)) if exact.is_finite() => ConditionCheck { value: Some(exact), ..check },
        _ => check,
    }
}

/// Run the four integral tests on `model`.
pub fn condition_report(model: &ModelSpec) -> ConditionReport {
    condition_report_with(model, None)
}

/// As [`condition_report`] with an explicit `z0` for the competition test.
pub fn condition_report_with(model: &ModelSpec, z0: Option<f64>) -> ConditionReport {
    let br = &model.branching;
    let mut grey = grey_check(|u| br.psi(u));
    if !br.has_jumps() && br.gamma == 0.0 && !grey.fails() {
        // ψ is linear: the integral is harmonic or ψ never turns positive
        grey.verdict = Verdict::Fails;
        grey.value = None;
        grey = grey.with_note("linear psi without jumps");
    }
    let mu = &br.mu;
    let measure_test = |f: fn(f64) -> f64| {
        decade_test(
            |lo, hi| mu.integrate(f, Interval::closed_open(lo, hi)).value,
            |lo| mu.integrate(f, Interval::closed_open(lo, f64::INFINITY)),
            1.0,
        )
    };
    let log_moment = measure_test(|z: f64| z.ln());
    let first_moment = measure_test(|z: f64| z);
    let h2_competition = h2_check(model, z0);
    ConditionReport { grey, log_moment, first_moment, h2_competition }
}

/// Time for the dominating branching flow to fall from `∞` to `v`:
/// `t(v) = ∫_v^∞ du/ψ(u)` for `v` above the largest root of ψ.
pub(crate) fn flow_time(psi: &impl Fn(f64) -> f64, v: f64) -> f64 {
    let r = integrate_improper(|u| 1.0 / psi(u), v, f64::INFINITY, Hints::default(), Tolerance::default());
    if r.converged { r.value } else { f64::INFINITY }
}

/// Inverse of [`flow_time`] on `(root, ∞)`.
#[allow(dead_code)]
pub(crate) fn flow_level(psi: &impl Fn(f64) -> f64, root: f64, t: f64) -> Option<f64> {
    let mut hi = root.max(1e-300) * 2.0 + 1.0;
    while flow_time(psi, hi) > t {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    let lo = root + 1e-12 * (1.0 + root);
    invert_monotone(|v| -flow_time(psi, v), -t, (lo, hi), 1e-12 * t.max(1.0)).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{BranchingMechanism, CompetitionSpec, EnvironmentSpec, LevyMeasure, Side};
    use approx::assert_relative_eq;

    fn model(b: f64, gamma: f64, comp: CompetitionSpec) -> ModelSpec {
        ModelSpec::new(BranchingMechanism::diffusive(b, gamma).unwrap(), EnvironmentSpec::default(), comp).unwrap()
    }

    #[test]
    fn grey_quadratic_holds_with_value_one() {
        let r = condition_report(&model(0.0, 1.0, CompetitionSpec::None));
        assert_eq!(r.grey.verdict, Verdict::Holds);
        assert_eq!(r.grey.lower_limit, 1.0);
        assert_relative_eq!(r.grey.value.unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn grey_linear_fails() {
        let r = condition_report(&model(-1.0, 0.0, CompetitionSpec::None));
        assert_eq!(r.grey.verdict, Verdict::Fails);
        let w = r.grey.witness.unwrap();
        assert_relative_eq!(w.increment_ratio, 1.0, max_relative = 1e-9);
        assert_relative_eq!(w.truncated_value, 8.0 * 10f64.ln(), max_relative = 1e-9);
    }

    #[test]
    fn grey_root_is_past_the_negative_region() {
        // ψ(u) = -4u + u² has root 4, so the integral starts at 8
        let r = condition_report(&model(4.0, 1.0, CompetitionSpec::None));
        assert_eq!(r.grey.verdict, Verdict::Holds);
        assert_relative_eq!(r.grey.lower_limit, 8.0, max_relative = 1e-12);
        // ∫_8^∞ du/(u(u-4)) = ln(2)/4
        assert_relative_eq!(r.grey.value.unwrap(), 2f64.ln() / 4.0, max_relative = 1e-8);
    }

    #[test]
    fn subordinator_fails_grey() {
        let r = condition_report(&model(1.0, 0.0, CompetitionSpec::None));
        assert!(r.grey.fails());
        assert!(r.grey.witness.is_some());
    }

    #[test]
    fn h2_logistic_value_one() {
        let r = condition_report(&model(0.0, 1.0, CompetitionSpec::Logistic { c: 1.0 }));
        assert_eq!(r.h2_competition.verdict, Verdict::Holds);
        assert_eq!(r.h2_competition.lower_limit, 1.0);
        assert_relative_eq!(r.h2_competition.value.unwrap(), 1.0, max_relative = 1e-12);
        // the numeric path agrees with the closed form
        let num = condition_report(&model(0.0, 1.0, CompetitionSpec::custom("z^2", |z| z * z)));
        assert_relative_eq!(num.h2_competition.value.unwrap(), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn h2_borderline_is_not_guessed() {
        // g = z ln(1+z): ∫dy/(y ln y) diverges too slowly for the decade rule
        let r = condition_report(&model(0.0, 1.0, CompetitionSpec::custom("z log", |z: f64| z * z.ln_1p())));
        assert_ne!(r.h2_competition.verdict, Verdict::Holds);
        let lin = condition_report(&model(0.0, 1.0, CompetitionSpec::Power { c: 1.0, p: 1.0 }));
        assert!(lin.h2_competition.fails());
        let none = condition_report(&model(0.0, 1.0, CompetitionSpec::None));
        assert!(none.h2_competition.fails());
    }

    #[test]
    fn moment_tests_follow_tail_exponent() {
        let heavy = |alpha: f64| {
            let mu = LevyMeasure::power_law(1.0, alpha, 0.0, None, Side::Positive).unwrap();
            ModelSpec::new(BranchingMechanism::new(0.0, 1.0, mu).unwrap(), EnvironmentSpec::default(), CompetitionSpec::None).unwrap()
        };
        let r = condition_report(&heavy(1.5));
        assert!(r.log_moment.holds());
        assert!(r.first_moment.holds());
        assert_relative_eq!(r.first_moment.value.unwrap(), 2.0, max_relative = 1e-8);
        // ∫_1^∞ ln z · z^{-5/2} dz = 4/9
        assert_relative_eq!(r.log_moment.value.unwrap(), 4.0 / 9.0, max_relative = 1e-8);
        let r = condition_report(&heavy(0.5));
        assert!(r.log_moment.holds());
        assert!(r.first_moment.fails());
        let empty = condition_report(&model(0.0, 1.0, CompetitionSpec::None));
        assert_eq!(empty.first_moment.value, Some(0.0));
    }

    #[test]
    fn verdicts_serialize_as_plain_words() {
        let r = condition_report(&model(-1.0, 0.0, CompetitionSpec::None));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["grey"]["verdict"], "fails");
        assert_eq!(v["h2_competition"]["verdict"], "fails");
        assert_eq!(v["first_moment"]["verdict"], "holds");
    }

    #[test]
    fn flow_time_round_trip() {
        // ψ(u) = u²: t(v) = 1/v
        let psi = |u: f64| u * u;
        assert_relative_eq!(flow_time(&psi, 4.0), 0.25, max_relative = 1e-10);
        assert_relative_eq!(flow_level(&psi, 0.0, 0.25).unwrap(), 4.0, max_relative = 1e-8);
    }
}
