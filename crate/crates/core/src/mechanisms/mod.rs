//! Model ingredients: the branching mechanism ψ, the Lévy environment S
//! and the competition map g, with the integral tests that classify them.

mod bounds;
mod classifier;
pub(crate) mod conditions;
mod measure;

pub use bounds::{bound_constants, c_of_a, check_bound_constants, BoundConstants};
pub use classifier::{extinction_classifier, ExtinctionReport};
pub use conditions::{condition_report, condition_report_with, decade_test, grey_root, ConditionCheck, ConditionReport, DivergenceWitness, Verdict};
pub use measure::{Interval, JumpLaw, JumpSampler, LevyMeasure, LevyMeasureSpec, Side};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CbreError, Result};
use crate::quadrature::exp_neg_m1_plus;

/// Branching mechanism `ψ(u) = -bu + γ²u² + ∫(e^{-uz} - 1 + uz 1_{z<1}) μ(dz)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BranchingRaw", into = "BranchingRaw")]
pub struct BranchingMechanism {
    pub b: f64,
    pub gamma: f64,
    pub mu: LevyMeasure,
    /// Validated subordinator case: `γ = 0`, `∫(1∧z)μ < ∞`, `δ >= 0`.
    pub is_subordinator: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BranchingRaw {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    mu: LevyMeasure,
    #[serde(default)]
    subordinator: bool,
}

impl TryFrom<BranchingRaw> for BranchingMechanism {
    type Error = CbreError;
    fn try_from(r: BranchingRaw) -> Result<Self> {
        let b = match (r.b, r.delta) {
            (Some(b), None) => b,
            (None, Some(delta)) => {
                let small = r.mu.moment(1.0, Interval::open(0.0, 1.0));
                if !small.is_finite() {
                    return Err(CbreError::InvalidModel("`delta` needs ∫(1∧z)μ < ∞".into()));
                }
                delta + small
            }
            (None, None) => 0.0,
            (Some(_), Some(_)) => return Err(CbreError::InvalidModel("give either `b` or `delta`, not both".into())),
        };
        let m = BranchingMechanism::new(b, r.gamma, r.mu)?;
        if r.subordinator { m.into_subordinator() } else { Ok(m) }
    }
}

impl From<BranchingMechanism> for BranchingRaw {
    fn from(m: BranchingMechanism) -> Self {
        BranchingRaw { b: Some(m.b), delta: None, gamma: m.gamma, mu: m.mu, subordinator: m.is_subordinator }
    }
}

impl BranchingMechanism {
    pub fn new(b: f64, gamma: f64, mu: LevyMeasure) -> Result<Self> {
        if !b.is_finite() || !(gamma.is_finite() && gamma >= 0.0) {
            return Err(CbreError::InvalidModel(format!("need finite b and gamma >= 0, got b={b}, gamma={gamma}")));
        }
        if !mu.is_positive_only() {
            return Err(CbreError::InvalidModel("branching Lévy measure must live on (0, ∞)".into()));
        }
        Ok(Self { b, gamma, mu, is_subordinator: false })
    }

    /// Jump-free mechanism `-bu + γ²u²`.
    pub fn diffusive(b: f64, gamma: f64) -> Result<Self> {
        Self::new(b, gamma, LevyMeasure::empty())
    }

    /// Check the subordinator constraints and set the flag.
    pub fn into_subordinator(mut self) -> Result<Self> {
        if self.gamma != 0.0 {
            return Err(CbreError::InvalidModel("subordinator needs gamma = 0".into()));
        }
        let d = self.delta();
        if !d.is_finite() {
            return Err(CbreError::InvalidModel("subordinator needs ∫(1∧z)μ < ∞".into()));
        }
        if d < 0.0 {
            return Err(CbreError::InvalidModel(format!("subordinator needs delta >= 0, got {d}")));
        }
        self.is_subordinator = true;
        Ok(self)
    }

    /// ψ(u) for `u >= 0`, or a domain error.
    pub fn psi_eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(CbreError::Domain(format!("psi needs u >= 0, got {u}")));
        }
        Ok(self.psi(u))
    }

    /// ψ(u); callers guarantee `u >= 0`.
    pub fn psi(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let mut v = -self.b * u + self.gamma * self.gamma * u * u;
        if !self.mu.is_empty() {
            v += self.mu.integrate(|z| exp_neg_m1_plus(u * z), Interval::open(0.0, 1.0)).value;
            v += self.mu.integrate(|z| (-u * z).exp_m1(), Interval::closed_open(1.0, f64::INFINITY)).value;
        }
        v
    }

    /// ψ′(u) for `u > 0`; at 0 it equals [`Self::psi_prime_0`].
    pub fn psi_prime(&self, u: f64) -> f64 {
        let mut v = -self.b + 2.0 * self.gamma * self.gamma * u;
        if !self.mu.is_empty() {
            v += self.mu.integrate(|z| -z * (-u * z).exp_m1(), Interval::open(0.0, 1.0)).value;
            v -= self.mu.integrate(|z| z * (-u * z).exp(), Interval::closed_open(1.0, f64::INFINITY)).value;
        }
        v
    }

    /// ψ″(u) `= 2γ² + ∫z²e^{-uz}μ(dz)`.
    pub fn psi_second(&self, u: f64) -> f64 {
        let mut v = 2.0 * self.gamma * self.gamma;
        if !self.mu.is_empty() {
            v += self.mu.integrate(|z| z * z * (-u * z).exp(), Interval::open(0.0, f64::INFINITY)).value;
        }
        v
    }

    /// `ψ′(0+) = -b - ∫_{[1,∞)} zμ(dz)`; `-inf` when the first moment diverges.
    pub fn psi_prime_0(&self) -> f64 {
        -self.b - self.mu.moment(1.0, Interval::closed_open(1.0, f64::INFINITY))
    }

    /// `δ = b - ∫_{(0,1)} zμ(dz)`; `-inf` when the small-jump mean diverges.
    pub fn delta(&self) -> f64 {
        self.b - self.mu.moment(1.0, Interval::open(0.0, 1.0))
    }

    /// `μ̄(x) = μ((x, ∞))`.
    pub fn mu_bar(&self, x: f64) -> f64 {
        self.mu.tail(x)
    }

    pub fn has_jumps(&self) -> bool {
        !self.mu.is_empty()
    }
}

/// Lévy environment `S_t = dt + σB_t + jumps with multipliers e^z - 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub pi: LevyMeasure,
}

/// Long-run direction of the auxiliary process `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftClass {
    ToMinusInf,
    Oscillates,
    ToPlusInf,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentReport {
    pub beta: f64,
    pub mean_k1: Option<f64>,
    pub drift_class: DriftClass,
}

impl EnvironmentSpec {
    pub fn new(d: f64, sigma: f64, pi: LevyMeasure) -> Result<Self> {
        let e = Self { d, sigma, pi };
        e.validate()?;
        Ok(e)
    }

    pub fn brownian(d: f64, sigma: f64) -> Result<Self> {
        Self::new(d, sigma, LevyMeasure::empty())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d.is_finite() || !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(CbreError::InvalidModel(format!("need finite d and sigma >= 0, got d={}, sigma={}", self.d, self.sigma)));
        }
        Ok(())
    }

    /// True for `σ = 0` and no jumps.
    pub fn is_deterministic(&self) -> bool {
        self.sigma == 0.0 && self.pi.is_empty()
    }

    /// `β = d - σ²/2 - ∫_{(-1,1)}(e^z - 1 - z)π(dz)`.
    pub fn beta(&self) -> f64 {
        let jumps = if self.pi.is_empty() { 0.0 } else { self.pi.integrate(|z| exp_neg_m1_plus(-z), Interval::open(-1.0, 1.0)).value };
        self.d - 0.5 * self.sigma * self.sigma - jumps
    }

    /// `π̄(1) = π((1, ∞))`.
    pub fn pi_bar(&self, x: f64) -> f64 {
        self.pi.tail(x)
    }

    pub fn report(&self) -> EnvironmentReport {
        let beta = self.beta();
        let big = self.pi.moment(1.0, Interval::closed_open(1.0, f64::INFINITY)) + self.pi.moment(1.0, Interval::open_closed(f64::NEG_INFINITY, -1.0));
        if !big.is_finite() {
            return EnvironmentReport { beta, mean_k1: None, drift_class: DriftClass::Unknown };
        }
        let signed = self.pi.moment(1.0, Interval::closed_open(1.0, f64::INFINITY)) - self.pi.moment(1.0, Interval::open_closed(f64::NEG_INFINITY, -1.0));
        let mean = beta + signed;
        let scale = 1e-12 * (self.d.abs() + self.sigma * self.sigma + big + 1.0);
        let drift_class = if mean.abs() <= scale {
            DriftClass::Oscillates
        } else if mean < 0.0 {
            DriftClass::ToMinusInf
        } else {
            DriftClass::ToPlusInf
        };
        EnvironmentReport { beta, mean_k1: Some(mean), drift_class }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied competition map, available from Rust only.
#[derive(Clone)]
pub struct CustomCompetition {
    pub name: String,
    pub g: ScalarFn,
    /// `z ↦ ∫_z^∞ dy/g(y)` when known in closed form.
    pub inverse_tail: Option<ScalarFn>,
}

impl fmt::Debug for CustomCompetition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCompetition").field("name", &self.name).field("inverse_tail", &self.inverse_tail.is_some()).finish()
    }
}

/// Competition map `g` with `g(0) = 0`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompetitionSpec {
    #[default]
    None,
    /// `g(z) = cz²`.
    Logistic { c: f64 },
    /// `g(z) = cz^p`.
    Power { c: f64, p: f64 },
    /// `g(z) = Σ_k coeffs[k] z^k`, `coeffs[0] = 0`; may be non-monotone.
    Polynomial { coeffs: Vec<f64> },
    #[serde(skip)]
    Custom(CustomCompetition),
}

impl PartialEq for CompetitionSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::None, Self::None) => true,
            (Self::Logistic { c: a }, Self::Logistic { c: b }) => a == b,
            (Self::Power { c: a, p: x }, Self::Power { c: b, p: y }) => a == b && x == y,
            (Self::Polynomial { coeffs: a }, Self::Polynomial { coeffs: b }) => a == b,
            (Self::Custom(a), Self::Custom(b)) => Arc::ptr_eq(&a.g, &b.g),
            _ => false,
        }
    }
}

impl CompetitionSpec {
    pub fn custom(name: &str, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(CustomCompetition { name: name.into(), g: Arc::new(g), inverse_tail: None })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CbreError::InvalidModel(m));
        match self {
            Self::None => Ok(()),
            Self::Logistic { c } if !(c.is_finite() && *c > 0.0) => bad(format!("logistic competition needs c > 0, got {c}")),
            Self::Power { c, p } if !(c.is_finite() && *c > 0.0 && p.is_finite() && *p > 0.0) => bad(format!("power competition needs c > 0 and p > 0, got c={c}, p={p}")),
            Self::Polynomial { coeffs } if coeffs.is_empty() || coeffs[0] != 0.0 || coeffs.iter().any(|c| !c.is_finite()) => {
                bad("polynomial competition needs finite coefficients with coeffs[0] = 0".into())
            }
            Self::Custom(c) if (c.g)(0.0) != 0.0 => bad(format!("custom competition `{}` must satisfy g(0) = 0", c.name)),
            _ => Ok(()),
        }
    }

    pub fn g(&self, z: f64) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Logistic { c } => c * z * z,
            Self::Power { c, p } => c * z.powf(*p),
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, k| acc * z + k),
            Self::Custom(c) => (c.g)(z),
        }
    }

    /// Closed-form `∫_z^∞ dy/g(y)` when available.
    pub fn inverse_tail(&self, z: f64) -> Option<f64> {
        match self {
            Self::Logistic { c } => Some(1.0 / (c * z)),
            Self::Power { c, p } if *p > 1.0 => Some(z.powf(1.0 - p) / (c * (p - 1.0))),
            Self::Custom(CustomCompetition { inverse_tail: Some(t), .. }) => Some(t(z)),
            _ => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }

    /// `c` of the logistic case.
    pub fn logistic_c(&self) -> Option<f64> {
        match self {
            Self::Logistic { c } => Some(*c),
            Self::Power { c, p } if *p == 2.0 => Some(*c),
            Self::Polynomial { coeffs } if coeffs.len() == 3 && coeffs[1] == 0.0 && coeffs[2] > 0.0 => Some(coeffs[2]),
            _ => None,
        }
    }

    /// Sampled check of monotonicity on `[0, 2^40]`.
    pub fn is_non_decreasing(&self) -> bool {
        let mut prev = self.g(0.0);
        for j in -400..=400 {
            let z = 2f64.powf(j as f64 / 10.0);
            let v = self.g(z);
            if v < prev - 1e-12 * prev.abs().max(1.0) {
                return false;
            }
            prev = v;
        }
        true
    }
}

/// Full description of the process `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub branching: BranchingMechanism,
    #[serde(default)]
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub competition: CompetitionSpec,
}

impl ModelSpec {
    pub fn new(branching: BranchingMechanism, environment: EnvironmentSpec, competition: CompetitionSpec) -> Result<Self> {
        let m = Self { branching, environment, competition };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.competition.validate()
    }

    /// Feller diffusion with logistic competition in a Brownian environment.
    pub fn feller_logistic(b: f64, gamma: f64, c: f64, d: f64, sigma: f64) -> Result<Self> {
        Self::new(BranchingMechanism::diffusive(b, gamma)?, EnvironmentSpec::brownian(d, sigma)?, CompetitionSpec::Logistic { c })
    }

    pub fn g(&self, z: f64) -> f64 {
        self.competition.g(z)
    }

    /// `θ = -ψ′(0+) + d`.
    pub fn theta(&self) -> f64 {
        -self.branching.psi_prime_0() + self.environment.d
    }

    /// True when `∫_{[1,∞)} zμ < ∞`.
    pub fn first_moment_regime(&self) -> bool {
        self.branching.psi_prime_0().is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn psi_examples() {
        assert_eq!(BranchingMechanism::diffusive(0.0, 1.0).unwrap().psi(2.0), 4.0);
        assert_eq!(BranchingMechanism::diffusive(1.0, 0.0).unwrap().psi(3.0), -3.0);
        let atom = BranchingMechanism::new(0.0, 0.0, LevyMeasure::atoms(&[(1.0, 1.0)]).unwrap()).unwrap();
        assert_relative_eq!(atom.psi(2f64.ln()), -0.5, max_relative = 1e-15);
        assert_eq!(atom.psi(0.0), 0.0);
        assert!(matches!(atom.psi_eval(-1.0), Err(CbreError::Domain(_))));
    }

    #[test]
    fn stable_psi_closed_form() {
        // μ(dz) = z^{-1-α}dz gives ψ(u) = Γ(-α)u^α - u/(α-1) when α ∈ (1,2)
        let alpha = 1.5;
        let mu = LevyMeasure::power_law(1.0, alpha, 0.0, None, Side::Positive).unwrap();
        let m = BranchingMechanism::new(0.0, 0.0, mu).unwrap();
        let gamma_neg = statrs::function::gamma::gamma(-alpha);
        for u in [0.3f64, 1.0, 7.0] {
            let exact = gamma_neg * u.powf(alpha) - u / (alpha - 1.0);
            assert_relative_eq!(m.psi(u), exact, max_relative = 1e-9);
        }
        assert_relative_eq!(m.psi_prime_0(), -1.0 / (alpha - 1.0), max_relative = 1e-14);
        let heavy = BranchingMechanism::new(0.0, 0.0, LevyMeasure::power_law(1.0, 0.8, 0.0, None, Side::Positive).unwrap()).unwrap();
        assert_eq!(heavy.psi_prime_0(), f64::NEG_INFINITY);
    }

    #[test]
    fn psi_derivatives_match_differences() {
        let mu = LevyMeasure::new(LevyMeasureSpec::CompoundPoisson { rate: 2.0, jumps: JumpLaw::Exponential { mean: 0.7 } }).unwrap();
        let m = BranchingMechanism::new(0.3, 0.5, mu).unwrap();
        for u in [0.2, 1.0, 4.0] {
            let h = 1e-5 * u;
            assert_relative_eq!(m.psi_prime(u), (m.psi(u + h) - m.psi(u - h)) / (2.0 * h), max_relative = 1e-7);
            assert_relative_eq!(m.psi_second(u), (m.psi_prime(u + h) - m.psi_prime(u - h)) / (2.0 * h), max_relative = 1e-6);
        }
        assert_relative_eq!(m.psi_prime(1e-9), m.psi_prime_0(), epsilon = 1e-7);
    }

    #[test]
    fn subordinator_validation() {
        let mu = LevyMeasure::power_law(1.0, 0.5, 0.0, None, Side::Positive).unwrap();
        let js = serde_json::json!({"delta": 1.0, "mu": serde_json::to_value(&mu).unwrap(), "subordinator": true});
        let m: BranchingMechanism = serde_json::from_value(js).unwrap();
        assert!(m.is_subordinator);
        assert_relative_eq!(m.delta(), 1.0, max_relative = 1e-12);
        for u in [0.1, 1.0, 10.0, 1000.0] {
            assert!(m.psi(u) <= 0.0);
        }
        assert!(BranchingMechanism::diffusive(1.0, 1.0).unwrap().into_subordinator().is_err());
        assert!(BranchingMechanism::diffusive(-1.0, 0.0).unwrap().into_subordinator().is_err());
    }

    #[test]
    fn environment_examples() {
        let cases = [(0.0, -0.5, DriftClass::ToMinusInf), (0.5, 0.0, DriftClass::Oscillates), (2.0, 1.5, DriftClass::ToPlusInf)];
        for (d, beta, class) in cases {
            let r = EnvironmentSpec::brownian(d, 1.0).unwrap().report();
            assert_eq!(r.beta, beta);
            assert_eq!(r.drift_class, class);
        }
    }

    #[test]
    fn beta_depends_only_on_small_jump_compensator() {
        // one atom at 0.5 of mass 2 versus two atoms at 0.5 of mass 1
        let a = EnvironmentSpec::new(0.0, 0.0, LevyMeasure::atoms(&[(0.5, 2.0)]).unwrap()).unwrap();
        let b = EnvironmentSpec::new(0.0, 0.0, LevyMeasure::atoms(&[(0.5, 1.0), (0.5, 1.0)]).unwrap()).unwrap();
        assert_relative_eq!(a.beta(), b.beta(), max_relative = 1e-15);
        assert_relative_eq!(a.beta(), -2.0 * (0.5f64.exp() - 1.5), max_relative = 1e-14);
        // heavy two-sided tails leave the drift class undetermined
        let heavy = EnvironmentSpec::new(0.0, 1.0, LevyMeasure::power_law(1.0, 0.8, 0.0, None, Side::Symmetric).unwrap()).unwrap();
        assert_eq!(heavy.report().drift_class, DriftClass::Unknown);
    }

    #[test]
    fn model_json() {
        let js = r#"{"branching":{"b":1,"gamma":1},"environment":{"d":0,"sigma":1},"competition":{"kind":"logistic","c":2}}"#;
        let m = ModelSpec::from_json(js).unwrap();
        assert_eq!(m.g(3.0), 18.0);
        assert_eq!(m.theta(), 1.0);
        let back = ModelSpec::from_json(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(ModelSpec::from_json(r#"{"branching":{},"competition":{"kind":"logistic","c":-1}}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"branching":{"gamma":-1}}"#).is_err());
    }

    #[test]
    fn competition_monotonicity() {
        assert!(CompetitionSpec::Logistic { c: 1.0 }.is_non_decreasing());
        assert!(!CompetitionSpec::Polynomial { coeffs: vec![0.0, -1.0] }.is_non_decreasing());
        assert_eq!(CompetitionSpec::Polynomial { coeffs: vec![0.0, 1.0, 2.0] }.g(2.0), 10.0);
    }

    proptest! {
        #[test]
        fn psi_is_convex(b in -2.0..2.0f64, gamma in 0.0..2.0f64, rate in 0.0..3.0f64, alpha in 0.2..1.9f64,
                         u1 in 0.0..20.0f64, du in 0.01..20.0f64, t in 0.05..0.95f64) {
            let mu = LevyMeasure::power_law(rate.max(1e-3), alpha, 0.0, Some(50.0), Side::Positive).unwrap();
            let m = BranchingMechanism::new(b, gamma, mu).unwrap();
            let u3 = u1 + du;
            let u2 = u1 + t * du;
            let lin = (1.0 - t) * m.psi(u1) + t * m.psi(u3);
            let scale = 1.0 + m.psi(u1).abs() + m.psi(u3).abs();
            prop_assert!(m.psi(u2) <= lin + 1e-9 * scale);
        }
    }
}
