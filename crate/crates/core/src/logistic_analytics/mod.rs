//! Analytics for the logistic model `g(z) = cz²` in a Brownian environment
//! with a general branching mechanism.
//!
//! Everything is expressed through `ω(u) = cu + σ²u²/2` and
//! `m(λ) = ∫_0^λ ψ/ω`. The Riccati solution `y_λ` is never built in the
//! `I`-variable directly: with `W(u) = I′(u) y_λ(I(u)) = e^{m(u)} y_λ(I(u))`
//! it satisfies `W′ = W² + (ψ/ω)W - λ/ω`, which the shared backward solver
//! integrates in `ln u`, and `∫_0^{I(u)} y_λ = ∫_0^u W`.

mod subordinator;
mod table;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{CbreError, Result};
use crate::mechanisms::{condition_report, grey_root, BranchingMechanism, CompetitionSpec, ConditionReport, EnvironmentSpec, Interval, ModelSpec, Verdict};
use crate::quadrature::{gauss10, integrate_improper, invert_monotone, Hints, Tolerance};
use crate::riccati::{self, RiccatiCoefficients, RiccatiSolution, RiccatiTable};

pub use subordinator::{
    adh_estimate, f_lambda_and_duhalde, invariant_law, ln_f_lambda, subordinator_classify, AdhEstimate, AdhVerdict, DuhaldeResult, InvariantLaw, SubordinatorRegime, SubordinatorReport,
};
use table::{MTable, RelaxInterp};

#[derive(Default)]
struct Caches {
    conditions: OnceLock<ConditionReport>,
    mtable: OnceLock<MTable>,
    h: RwLock<HashMap<u64, Arc<HTable>>>,
}

/// Logistic model: branching mechanism, competition rate `c > 0` and
/// environment amplitude `σ >= 0`.
#[derive(Clone)]
pub struct LogisticModel {
    branching: BranchingMechanism,
    c: f64,
    sigma: f64,
    caches: Arc<Caches>,
}

impl std::fmt::Debug for LogisticModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogisticModel").field("branching", &self.branching).field("c", &self.c).field("sigma", &self.sigma).finish()
    }
}

impl LogisticModel {
    pub fn new(branching: BranchingMechanism, c: f64, sigma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(CbreError::InvalidModel(format!("logistic rate must be positive, got c={c}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(CbreError::InvalidModel(format!("σ must be non-negative, got {sigma}")));
        }
        Ok(Self { branching, c, sigma, caches: Arc::default() })
    }

    /// From a full model with logistic competition and a Brownian
    /// environment; the environment drift is folded into `b`.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let c = model.competition.logistic_c().ok_or_else(|| CbreError::RegimeMismatch("logistic analytics need g(z) = cz²".into()))?;
        let env = &model.environment;
        if !env.pi.is_empty() {
            return Err(CbreError::RegimeMismatch("logistic analytics need a Brownian environment (π = 0)".into()));
        }
        let mut br = model.branching.clone();
        br.b += env.d;
        if br.is_subordinator {
            br = br.into_subordinator()?;
        }
        Self::new(br, c, env.sigma)
    }

    pub fn branching(&self) -> &BranchingMechanism {
        &self.branching
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Equivalent full model.
    pub fn to_model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.branching.clone(), EnvironmentSpec::brownian(0.0, self.sigma)?, CompetitionSpec::Logistic { c: self.c })
    }

    /// `ω(u) = cu + σ²u²/2`.
    pub fn omega(&self, u: f64) -> f64 {
        self.c * u + 0.5 * self.sigma * self.sigma * u * u
    }

    pub fn psi(&self, u: f64) -> f64 {
        self.branching.psi(u)
    }

    pub fn conditions(&self) -> &ConditionReport {
        self.caches.conditions.get_or_init(|| {
            let spec = self.to_model_spec().expect("validated parts");
            condition_report(&spec)
        })
    }

    fn table(&self) -> &MTable {
        self.caches.mtable.get_or_init(|| MTable::build(self))
    }

    fn require_log_moment(&self) -> Result<()> {
        let lm = &self.conditions().log_moment;
        match lm.verdict {
            Verdict::Holds => Ok(()),
            v => Err(CbreError::RegimeMismatch(format!("m needs the log-moment condition ∫_1^∞ ln z μ(dz) < ∞ (verdict: {v:?})").to_lowercase())),
        }
    }

    /// ψ > 0 beyond some `ϑ` and the log-moment condition.
    pub fn is_general(&self) -> bool {
        self.conditions().log_moment.holds() && grey_root(|u| self.psi(u)).is_some() && !self.branching.is_subordinator
    }

    fn require_general(&self) -> Result<()> {
        self.require_log_moment()?;
        if self.is_general() {
            Ok(())
        } else {
            Err(CbreError::RegimeMismatch("the branching mechanism is not general: ψ never becomes positive".into()))
        }
    }

    fn require_grey(&self) -> Result<()> {
        match self.conditions().grey.verdict {
            Verdict::Holds => Ok(()),
            v => Err(CbreError::RegimeMismatch(format!("Grey's condition is needed here (verdict: {v:?})"))),
        }
    }

    fn require_first_moment(&self) -> Result<()> {
        match self.conditions().first_moment.verdict {
            Verdict::Holds => Ok(()),
            v => Err(CbreError::RegimeMismatch(format!("∫(z∧z²)μ(dz) < ∞ is needed here (verdict: {v:?})"))),
        }
    }

    /// `m(λ)`; requires the log-moment condition.
    pub fn m(&self, lambda: f64) -> Result<f64> {
        m_of(self, lambda)
    }

    fn h_table(&self, lambda: f64) -> Result<Arc<HTable>> {
        let key = lambda.to_bits();
        if let Some(t) = self.caches.h.read().expect("cache lock").get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(HTable::build(self, lambda)?);
        let mut w = self.caches.h.write().expect("cache lock");
        Ok(w.entry(key).or_insert(t).clone())
    }
}

/// `m(λ) = ∫_0^λ ψ(u)/ω(u) du`.
pub fn m_of(model: &LogisticModel, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(CbreError::Domain(format!("m(λ) needs λ >= 0, got {lambda}")));
    }
    model.require_log_moment()?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(model.table().m(lambda))
}

/// `I(λ) = ∫_0^λ e^m`, its inverse `φ` and the coefficient
/// `r(z) = φ′(z)/√ω(φ(z))`, with `φ′ = e^{-m∘φ}`.
#[derive(Clone, Debug)]
pub struct IVarphi {
    model: LogisticModel,
}

pub fn i_and_varphi(model: &LogisticModel) -> Result<IVarphi> {
    model.require_general()?;
    Ok(IVarphi { model: model.clone() })
}

impl IVarphi {
    /// `I(λ)`.
    pub fn i(&self, lambda: f64) -> f64 {
        self.ln_i(lambda).exp()
    }

    /// `ln I(λ)`, finite where `I` itself overflows.
    pub fn ln_i(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.model.table().ln_i(lambda)
    }

    /// `φ(z) = I^{-1}(z)`.
    pub fn varphi(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        self.varphi_ln(z.ln())
    }

    /// `φ(e^t)`, usable for `z` beyond the f64 range.
    pub fn varphi_ln(&self, t: f64) -> Result<f64> {
        let tab = self.model.table();
        let (lo, hi) = tab.bracket_ln_i(t).ok_or_else(|| CbreError::Bijectivity(format!("ln z = {t} lies outside the tabulated range of I")))?;
        invert_monotone(|u| tab.ln_i(u), t, (lo, hi), 1e-15 * hi)
    }

    /// `φ′(z) = e^{-m(φ(z))}`.
    pub fn varphi_prime(&self, z: f64) -> Result<f64> {
        let u = self.varphi(z)?;
        Ok((-self.model.table().m(u)).exp())
    }

    /// `r(z) = φ′(z)/√ω(φ(z))`.
    pub fn r(&self, z: f64) -> Result<f64> {
        let u = self.varphi(z)?;
        Ok((-self.model.table().m(u)).exp() / self.model.omega(u).sqrt())
    }
}

/// Riccati solution and the functions assembled from it.
struct HTable {
    lambda: f64,
    ric: RiccatiTable,
    /// `B = e^{-M}∫_0^u e^M`, `M = m + 2J`, at the m-table nodes.
    b: RelaxInterp,
}

fn riccati_for(model: &LogisticModel, lambda: f64) -> Result<RiccatiTable> {
    let tab = model.table();
    let pq = |u: f64| {
        let w = model.omega(u);
        (model.psi(u) / w, lambda / w)
    };
    let lw = |u: f64| 2.0 * tab.m(u);
    let coeffs = RiccatiCoefficients { pq: &pq, kappa: lambda / model.c, scale: 1.0, log_weight: &lw };
    riccati::solve(&coeffs, lambda)
}

impl HTable {
    fn build(model: &LogisticModel, lambda: f64) -> Result<Self> {
        model.require_general()?;
        let ric = riccati_for(model, lambda)?;
        let tab = model.table();
        let nodes = &tab.nodes;
        let n = nodes.len();
        // M′ = ψ/ω + 2W and M″ = (ψ/ω)′ + 2(W² + (ψ/ω)W - λ/ω)
        let mut dmk = Vec::with_capacity(n);
        let mut d2mk = Vec::with_capacity(n);
        for (i, &u) in nodes.iter().enumerate() {
            let w = ric.v(u);
            dmk.push(tab.dm[i] + 2.0 * w);
            d2mk.push(tab.d2m[i] + 2.0 * (w * w + tab.dm[i] * w - lambda / model.omega(u)));
        }
        let mut b = Vec::with_capacity(n);
        // below the first node M is negligible and B(u) = u to leading order
        b.push(nodes[0]);
        for i in 0..n - 1 {
            let u1 = nodes[i + 1];
            let drop = tab.cells[i] + 2.0 * ric.integral(nodes[i], u1);
            let cell = tab.cell_weight(i, dmk[i + 1], d2mk[i + 1], |u| tab.to_next(i, u) - 2.0 * ric.integral(u, u1));
            b.push(b[i] * (-drop).exp() + cell);
        }
        let b = RelaxInterp::new(nodes, b, &dmk, &d2mk);
        Ok(Self { lambda, ric, b })
    }

    fn b_at(&self, tab: &MTable, i: usize, u: f64) -> f64 {
        self.b.eval(&tab.nodes, i, u, || tab.mrate(u) + 2.0 * self.ric.v(u))
    }

    /// `Φ(z) = e^{-m-J}/ω ∫_0^z e^{m+2J} = e^J B/ω` on cell `i`.
    fn phi_in(&self, model: &LogisticModel, tab: &MTable, i: usize, z: f64) -> f64 {
        self.ric.cumulative(z).exp() * self.b_at(tab, i, z) / model.omega(z)
    }

    /// `[∫e^{-xz}Φ, ∫z e^{-xz}Φ, ∫z² e^{-xz}Φ]` over `(0, ∞)`.
    fn laplace_moments(&self, model: &LogisticModel, x: f64, orders: usize) -> Result<[f64; 3]> {
        let tab = model.table();
        let nodes = &tab.nodes;
        let u_lo = nodes[0];
        let mut acc = [0.0; 3];
        // Φ(z) → 1/c as z → 0
        for (k, a) in acc.iter_mut().enumerate().take(orders) {
            *a += u_lo.powi(k as i32 + 1) / ((k + 1) as f64 * model.c);
        }
        for i in 0..nodes.len() - 1 {
            let (z0, z1) = (nodes[i], nodes[i + 1]);
            if x * z0 > 745.0 {
                return Ok(acc);
            }
            for (k, a) in acc.iter_mut().enumerate().take(orders) {
                *a += gauss10(|z| z.powi(k as i32) * (-x * z).exp() * self.phi_in(model, tab, i, z), z0, z1);
            }
        }
        // beyond the table B ≈ 1/M′, so Φ ≈ e^J/(ψ + 2ωW)
        let z_hi = *nodes.last().unwrap();
        if x * z_hi < 745.0 {
            for (k, a) in acc.iter_mut().enumerate().take(orders) {
                let tail = integrate_improper(
                    |z| {
                        // W underflows to 0 where ω overflows; skip the product then
                        let w = self.ric.v(z);
                        let coupling = if w > 0.0 { 2.0 * model.omega(z) * w } else { 0.0 };
                        z.powi(k as i32) * (-x * z).exp() * self.ric.cumulative(z).exp() / (model.psi(z) + coupling)
                    },
                    z_hi,
                    f64::INFINITY,
                    Hints::default(),
                    Tolerance::new(1e-10, 1e-300),
                );
                if !tail.converged {
                    return Err(CbreError::Divergence(format!("the h_λ integral diverges at x = {x}")));
                }
                *a += tail.value;
            }
        }
        Ok(acc)
    }
}

/// `h_λ` with its first two derivatives.
#[derive(Clone)]
pub struct HLambda {
    model: LogisticModel,
    table: Arc<HTable>,
}

impl HLambda {
    pub fn lambda(&self) -> f64 {
        self.table.lambda
    }

    /// `h_λ(0) = exp ∫_0^∞ y_λ`, when Grey's condition holds.
    pub fn at_zero(&self) -> Result<f64> {
        self.model.require_grey()?;
        self.table.ric.total().map(f64::exp).ok_or_else(|| CbreError::Divergence("∫_0^∞ y_λ is not finite".into()))
    }

    /// `1 + λ∫_0^∞ Φ`, the double-integral route to `h_λ(0)`.
    pub fn at_zero_by_quadrature(&self) -> Result<f64> {
        self.model.require_grey()?;
        let m = self.table.laplace_moments(&self.model, 0.0, 1)?;
        Ok(1.0 + self.table.lambda * m[0])
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return self.at_zero();
        }
        let m = self.table.laplace_moments(&self.model, x, 1)?;
        Ok(1.0 + self.table.lambda * m[0])
    }

    /// `[h, h′, h″]` at `x > 0`, differentiating under the integral.
    pub fn derivatives(&self, x: f64) -> Result<[f64; 3]> {
        if !(x > 0.0) {
            return Err(CbreError::Domain(format!("h_λ derivatives need x > 0, got {x}")));
        }
        let m = self.table.laplace_moments(&self.model, x, 3)?;
        let l = self.table.lambda;
        Ok([1.0 + l * m[0], -l * m[1], l * m[2]])
    }
}

pub fn h_lambda_fn(model: &LogisticModel, lambda: f64) -> Result<HLambda> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CbreError::Domain(format!("h_λ needs λ > 0, got {lambda}")));
    }
    model.require_first_moment()?;
    Ok(HLambda { model: model.clone(), table: model.h_table(lambda)? })
}

/// `h_λ(x)`.
pub fn h_lambda(model: &LogisticModel, x: f64, lambda: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(CbreError::Domain(format!("h_λ needs x >= 0, got {x}")));
    }
    h_lambda_fn(model, lambda)?.value(x)
}

/// Riccati solution `y_λ` in the `I`-variable.
pub fn riccati_solve(model: &LogisticModel, lambda: f64) -> Result<RiccatiSolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CbreError::Domain(format!("λ must be non-negative, got {lambda}")));
    }
    model.require_general()?;
    let tab = model.table();
    let node = |u: f64| (tab.ln_i(u), tab.m(u));
    if lambda == 0.0 {
        let mut out = RiccatiSolution { lambda, grid: vec![], y: vec![], r: vec![], max_scaled_residual: 0.0, bounds_hold: true, integral: Some(0.0), escalations: 0 };
        for &u in &tab.nodes {
            let (li, m) = node(u);
            if li < 700.0 {
                out.grid.push(li.exp());
                out.y.push(0.0);
                out.r.push((-m).exp() / model.omega(u).sqrt());
            }
        }
        return Ok(out);
    }
    let h = model.h_table(lambda)?;
    let ric = &h.ric;
    let mut out = RiccatiSolution {
        lambda,
        grid: vec![],
        y: vec![],
        r: vec![],
        max_scaled_residual: ric.max_scaled_residual,
        bounds_hold: ric.bounds_hold,
        integral: ric.total(),
        escalations: ric.escalations,
    };
    for (u, w) in ric.nodes() {
        let (li, m) = node(u);
        if li < 700.0 && m.abs() < 700.0 {
            out.grid.push(li.exp());
            out.y.push(w * (-m).exp());
            out.r.push((-m).exp() / model.omega(u).sqrt());
        }
    }
    Ok(out)
}

/// `E_x[e^{-λT_a}] = h_λ(x)/h_λ(a)`.
pub fn laplace_ta_logistic(model: &LogisticModel, x: f64, a: f64, lambda: f64) -> Result<f64> {
    if !(0.0 <= a && a <= x) {
        return Err(CbreError::Domain(format!("Laplace transform of T_a needs 0 <= a <= x, got a={a}, x={x}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CbreError::Domain(format!("λ must be non-negative, got {lambda}")));
    }
    if x == a {
        return Ok(1.0);
    }
    model.require_general()?;
    if lambda == 0.0 {
        // T_a < ∞ almost surely under Grey's condition
        model.require_grey()?;
        return Ok(1.0);
    }
    let h = h_lambda_fn(model, lambda)?;
    Ok(h.value(x)? / h.value(a)?)
}

/// `E_x[T_0] = ∫_0^∞ e^{m(u)}∫_u^∞ e^{-m(z)}(1 - e^{-zx})/ω(z) dz du`,
/// evaluated after exchanging the order as `∫ (1 - e^{-zx}) G(z)/ω(z) dz`
/// with `G = e^{-m}∫_0^z e^m` tabulated cumulatively. `x = ∞` is allowed.
pub fn mean_t0(model: &LogisticModel, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(CbreError::Domain(format!("E_x[T_0] needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    model.require_general()?;
    model.require_grey()?;
    model.require_first_moment()?;
    let tab = model.table();
    let one_minus = |z: f64| if x.is_infinite() { 1.0 } else { -(-z * x).exp_m1() };
    let nodes = &tab.nodes;
    let u_lo = nodes[0];
    // G(z) ≈ z and ω(z) ≈ cz below the first node
    let mut total = if x.is_infinite() { u_lo / model.c } else { x * u_lo * u_lo / (2.0 * model.c) };
    for i in 0..nodes.len() - 1 {
        total += gauss10(|z| one_minus(z) * tab.g_in(i, z) / model.omega(z), nodes[i], nodes[i + 1]);
    }
    // beyond the table G ≈ 1/m′ = ω/ψ
    let tail = integrate_improper(|z| one_minus(z) / model.psi(z), *nodes.last().unwrap(), f64::INFINITY, Hints::default(), Tolerance::new(1e-10, 1e-300));
    if !tail.converged {
        return Err(CbreError::Divergence("the E_x[T_0] integral does not converge".into()));
    }
    Ok(total + tail.value)
}

/// Smooth test function with analytic derivatives.
pub struct TestFunction<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub df: &'a dyn Fn(f64) -> f64,
    pub d2f: &'a dyn Fn(f64) -> f64,
}

/// `𝒰f(x) = (bx - cx²)f′ + (γ²x + σ²x²/2)f″ + x∫(f(x+z) - f(x) - zf′(x)1_{z<1})μ(dz)`.
pub fn generator_apply(model: &LogisticModel, f: &TestFunction, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(CbreError::Domain(format!("generator needs x >= 0, got {x}")));
    }
    let br = &model.branching;
    let (fx, d1, d2) = ((f.f)(x), (f.df)(x), (f.d2f)(x));
    let mut v = (br.b * x - model.c * x * x) * d1 + (br.gamma * br.gamma * x + 0.5 * model.sigma * model.sigma * x * x) * d2;
    if br.has_jumps() {
        let tol = Tolerance::new(1e-10, 1e-14);
        let small = br.mu.integrate_tol(&mut |z| (f.f)(x + z) - fx - z * d1, Interval::open(0.0, 1.0), tol);
        let large = br.mu.integrate_tol(&mut |z| (f.f)(x + z) - fx, Interval::closed_open(1.0, f64::INFINITY), tol);
        if !(small.converged && large.converged) {
            return Err(CbreError::Divergence(format!("jump part of the generator did not converge at x = {x}")));
        }
        v += x * (small.value + large.value);
    }
    Ok(v)
}

/// Report of [`riccati_solve`] shape checks used by the validation suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiShape {
    pub decreasing_initially: bool,
    pub decreasing_ultimately: bool,
}

/// `y_λ` decreases on the first and last tenth of its grid.
pub fn riccati_shape(sol: &RiccatiSolution) -> RiccatiShape {
    let n = sol.y.len();
    let k = (n / 10).max(2).min(n);
    let dec = |s: &[f64]| s.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    RiccatiShape { decreasing_initially: dec(&sol.y[..k]), decreasing_ultimately: dec(&sol.y[n - k..]) }
}

#[cfg(test)]
mod tests;
