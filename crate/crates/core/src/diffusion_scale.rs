//! Scale functions, hitting probabilities and Laplace transforms of hitting
//! times for the Feller diffusion with competition
//! `dZ = (bZ - g(Z))dt + √(2γ²Z) dB + σZ dB'`.
//!
//! With `𝚋(z) = g(z) - bz` and `𝚍(z) = γ²z + σ²z²/2`, the scale density is
//! `s(u) = exp ∫_ℓ^u 𝚋/𝚍` (base point `ℓ`, default 1) and `S(x) = ∫_0^x s`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{CbreError, Result};
use crate::mechanisms::{decade_test, CompetitionSpec, ConditionCheck, ModelSpec, Verdict};
use crate::quadrature::{gauss10, integrate, integrate_improper, invert_monotone, Hints, Tolerance};
use crate::riccati::{self, RiccatiCoefficients, RiccatiSolution, RiccatiTable};

const GRID_NODES: usize = 4096;
const GRID_LO: f64 = 1e-6;
const GRID_HI: f64 = 1e9;
/// Beyond this `ln s` the density overflows and `S` is reported infinite.
const LOG_OVERFLOW: f64 = 700.0;

#[derive(Default)]
struct Caches {
    scale: OnceLock<ScaleTable>,
    riccati: RwLock<HashMap<u64, Arc<RiccatiTable>>>,
}

/// Pure-diffusion model with a possibly non-monotone competition map.
#[derive(Clone)]
pub struct DiffusionModel {
    b: f64,
    gamma: f64,
    sigma: f64,
    g: CompetitionSpec,
    base: f64,
    caches: Arc<Caches>,
}

impl std::fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionModel").field("b", &self.b).field("gamma", &self.gamma).field("sigma", &self.sigma).field("g", &self.g).field("base", &self.base).finish()
    }
}

impl DiffusionModel {
    pub fn new(b: f64, gamma: f64, sigma: f64, g: CompetitionSpec) -> Result<Self> {
        if !b.is_finite() || !(gamma >= 0.0 && gamma.is_finite()) || !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(CbreError::InvalidModel(format!("diffusion needs finite b and γ, σ >= 0, got b={b}, γ={gamma}, σ={sigma}")));
        }
        if gamma == 0.0 && sigma == 0.0 {
            return Err(CbreError::InvalidModel("diffusion coefficient vanishes identically (γ = σ = 0)".into()));
        }
        g.validate()?;
        Ok(Self { b, gamma, sigma, g, base: 1.0, caches: Arc::default() })
    }

    /// Jump-free model in a Brownian environment; the environment drift `d`
    /// adds to the branching drift.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let br = &model.branching;
        let env = &model.environment;
        if br.has_jumps() || !env.pi.is_empty() {
            return Err(CbreError::RegimeMismatch("scale-function analytics need μ = 0 and π = 0".into()));
        }
        Self::new(br.b + env.d, br.gamma, env.sigma, model.competition.clone())
    }

    /// Same model with the inner integral based at `ℓ` instead of 1.
    pub fn with_base(&self, base: f64) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(CbreError::Domain(format!("scale base point must be positive, got {base}")));
        }
        Ok(Self { base, caches: Arc::default(), ..self.clone() })
    }

    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn competition(&self) -> &CompetitionSpec {
        &self.g
    }
    pub fn base(&self) -> f64 {
        self.base
    }

    /// `𝚋(z) = g(z) - bz`.
    pub fn drift_b(&self, z: f64) -> f64 {
        self.g.g(z) - self.b * z
    }

    /// `𝚍(z) = γ²z + σ²z²/2`.
    pub fn diffusion_d(&self, z: f64) -> f64 {
        self.gamma * self.gamma * z + 0.5 * self.sigma * self.sigma * z * z
    }

    fn ratio(&self, z: f64) -> f64 {
        self.drift_b(z) / self.diffusion_d(z)
    }

    fn require_gamma(&self) -> Result<()> {
        if self.gamma > 0.0 {
            Ok(())
        } else {
            Err(CbreError::Domain("the inner scale exponent is not integrable at 0 when γ = 0".into()))
        }
    }

    /// Cached scale table.
    pub fn scale(&self) -> Result<&ScaleTable> {
        self.require_gamma()?;
        Ok(self.caches.scale.get_or_init(|| ScaleTable::build(self)))
    }

    /// `S(x)`.
    pub fn scale_s(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(CbreError::Domain(format!("S(x) needs x >= 0, got {x}")));
        }
        Ok(self.scale()?.s(x))
    }

    /// `P_x(Z_t → ∞) = S(x)/S(∞)`, zero when `S(∞) = ∞`.
    pub fn p_to_infinity(&self, x: f64) -> Result<f64> {
        let table = self.scale()?;
        let check = table.s_infinity_check();
        match check.verdict {
            Verdict::Holds => Ok(table.s(x) / table.s_infinity().unwrap()),
            Verdict::Fails => Ok(0.0),
            Verdict::Inconclusive => Err(inconclusive(&check)),
        }
    }

    fn riccati_table(&self, lambda: f64) -> Result<Arc<RiccatiTable>> {
        let key = lambda.to_bits();
        if let Some(t) = self.caches.riccati.read().expect("cache lock").get(&key) {
            return Ok(t.clone());
        }
        let scale = self.scale()?;
        let pq = |x: f64| {
            let d = self.diffusion_d(x);
            (self.drift_b(x) / d, lambda / d)
        };
        let lw = |x: f64| 2.0 * scale.log_density(x);
        let coeffs = RiccatiCoefficients { pq: &pq, kappa: lambda / (self.gamma * self.gamma), scale: 1.0, log_weight: &lw };
        let table = Arc::new(riccati::solve(&coeffs, lambda)?);
        let mut w = self.caches.riccati.write().expect("cache lock");
        Ok(w.entry(key).or_insert(table).clone())
    }
}

fn inconclusive(check: &ConditionCheck) -> CbreError {
    let w = check.witness.map(|w| format!(" (cutoff {:e}, increment ratio {})", w.cutoff, w.increment_ratio)).unwrap_or_default();
    CbreError::Divergence(format!("S(∞) finiteness is inconclusive{w}"))
}

/// `S`, its density and inverse, tabulated on a geometric grid.
#[derive(Clone, Debug)]
pub struct ScaleTable {
    model: DiffusionModel,
    nodes: Vec<f64>,
    /// `ln s` at the nodes.
    log_s: Vec<f64>,
    /// `S` at the nodes.
    cum: Vec<f64>,
    s_inf: OnceLock<ConditionCheck>,
}

impl ScaleTable {
    fn build(model: &DiffusionModel) -> Self {
        let model = DiffusionModel { caches: Arc::default(), ..model.clone() };
        let step = (GRID_HI / GRID_LO).ln() / (GRID_NODES - 1) as f64;
        let nodes: Vec<f64> = (0..GRID_NODES).map(|i| GRID_LO * (step * i as f64).exp()).collect();
        let tight = Tolerance::new(1e-13, 1e-16);
        let ratio = |z: f64| model.ratio(z);
        // ln s at the first node, integrated from the base point
        let from_base = integrate_log_span(&ratio, model.base, GRID_LO, tight);
        let mut log_s = Vec::with_capacity(GRID_NODES);
        log_s.push(from_base);
        for w in nodes.windows(2) {
            let last = *log_s.last().unwrap();
            log_s.push(last + integrate(ratio, w[0], w[1], tight).value);
        }
        let mut table = Self { model, nodes, log_s, cum: Vec::new(), s_inf: OnceLock::new() };
        let head = integrate(|u| table.log_density(u).exp(), 0.0, GRID_LO, Tolerance::new(1e-12, 1e-300)).value;
        let mut cum = Vec::with_capacity(GRID_NODES);
        cum.push(head);
        for i in 0..GRID_NODES - 1 {
            let (lo, hi) = (table.nodes[i], table.nodes[i + 1]);
            if cum[i] == f64::INFINITY || table.log_s[i + 1].max(table.log_s[i]) > LOG_OVERFLOW {
                cum.push(f64::INFINITY);
                continue;
            }
            let cell = integrate(|u| table.log_density_in(i, u).exp(), lo, hi, Tolerance::new(1e-12, 1e-300)).value;
            cum.push(cum[i] + cell);
        }
        table.cum = cum;
        table
    }

    fn cell_of(&self, x: f64) -> usize {
        self.nodes.partition_point(|&n| n <= x).saturating_sub(1)
    }

    fn log_density_in(&self, i: usize, u: f64) -> f64 {
        let x0 = self.nodes[i];
        self.log_s[i] + gauss10(|z| self.model.ratio(z), x0, u)
    }

    /// `ln s(x)`.
    pub fn log_density(&self, x: f64) -> f64 {
        if x < GRID_LO {
            return self.log_s[0] - integrate(|z| self.model.ratio(z), x, GRID_LO, Tolerance::new(1e-13, 1e-16)).value;
        }
        if x > GRID_HI {
            let last = GRID_NODES - 1;
            return self.log_s[last] + integrate_log_span(&|z| self.model.ratio(z), GRID_HI, x, Tolerance::new(1e-13, 1e-16));
        }
        self.log_density_in(self.cell_of(x), x)
    }

    /// `s(x) = S′(x)`.
    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// `S(x)`.
    pub fn s(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x < GRID_LO {
            return integrate(|u| self.log_density(u).exp(), 0.0, x, Tolerance::new(1e-12, 1e-300)).value;
        }
        if x > GRID_HI {
            if self.cum[GRID_NODES - 1].is_infinite() {
                return f64::INFINITY;
            }
            let extra = integrate_log_span(&|u| self.log_density(u).exp(), GRID_HI, x, Tolerance::new(1e-12, 1e-300));
            return self.cum[GRID_NODES - 1] + extra;
        }
        let i = self.cell_of(x);
        if self.cum[i].is_infinite() {
            return f64::INFINITY;
        }
        self.cum[i] + gauss10(|u| self.log_density_in(i, u).exp(), self.nodes[i], x)
    }

    /// Decade-rule verdict on `∫^∞ s(u) du < ∞`; its value is `S(∞)`.
    pub fn s_infinity_check(&self) -> ConditionCheck {
        self.s_inf
            .get_or_init(|| {
                let u0 = 1.0;
                let mut check = decade_test(
                    |lo, hi| {
                        let top = self.s(hi);
                        if top.is_finite() { top - self.s(lo) } else { f64::INFINITY }
                    },
                    |lo| integrate_improper(|u| self.density(u), lo, f64::INFINITY, Hints::default(), Tolerance::new(1e-10, 1e-300)),
                    u0,
                );
                check.value = check.value.map(|v| v + self.s(u0));
                check
            })
            .clone()
    }

    /// `S(∞)` when finite.
    pub fn s_infinity(&self) -> Option<f64> {
        let c = self.s_infinity_check();
        if c.holds() { c.value } else { None }
    }

    /// `φ̄ = S^{-1}` on `(0, S(∞))`.
    pub fn inverse(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        let hi_idx = self.cum.partition_point(|&c| c < z);
        if hi_idx >= GRID_NODES {
            return Err(CbreError::Domain(format!("{z} is beyond the tabulated range of S")));
        }
        let lo = if hi_idx == 0 { 0.0 } else { self.nodes[hi_idx - 1] };
        let hi = self.nodes[hi_idx];
        invert_monotone(|x| self.s(x), z, (lo, hi), 1e-15 * hi)
    }
}

/// `∫_a^b f` for spans that may cover many decades, integrated in `ln z`.
fn integrate_log_span(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let r = integrate(|t| {
        let z = t.exp();
        f(z) * z
    }, lo.ln(), hi.ln(), tol);
    sign * r.value
}

/// Extinction classification of the diffusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionClassification {
    /// `P_x(T_0 < ∞) = 1` for every `x`.
    pub extinct_as: bool,
    /// `S(∞)` when finite.
    pub s_infinity: Option<f64>,
    pub check: ConditionCheck,
}

/// `extinct_as ⇔ S(∞) = ∞`, decided by the decade rule.
pub fn classify_diffusion(model: &DiffusionModel) -> Result<DiffusionClassification> {
    let table = model.scale()?;
    let check = table.s_infinity_check();
    match check.verdict {
        Verdict::Inconclusive => Err(inconclusive(&check)),
        v => Ok(DiffusionClassification { extinct_as: v == Verdict::Fails, s_infinity: table.s_infinity(), check }),
    }
}

/// `S(x)`.
pub fn scale_s(model: &DiffusionModel, x: f64) -> Result<f64> {
    model.scale_s(x)
}

/// `P_x(T_0 < T_y) = (S(x) - S(y))/(S(0) - S(y))`.
pub fn hitting_prob(model: &DiffusionModel, x: f64, y: f64) -> Result<f64> {
    if !(0.0 <= x && x <= y) {
        return Err(CbreError::Domain(format!("hitting_prob needs 0 <= x <= y, got x={x}, y={y}")));
    }
    if x == y {
        return Ok(0.0);
    }
    let t = model.scale()?;
    let (sx, sy) = (t.s(x), t.s(y));
    if sy.is_infinite() {
        return Ok(1.0);
    }
    Ok(((sy - sx) / sy).clamp(0.0, 1.0))
}

/// Riccati solution `ȳ_λ` on `(0, S(∞))`, in the scale variable.
pub fn riccati_bar_solve(model: &DiffusionModel, lambda: f64) -> Result<RiccatiSolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CbreError::Domain(format!("λ must be non-negative, got {lambda}")));
    }
    let scale = model.scale()?;
    let r_bar = |x: f64| (-scale.log_density(x)).exp() / model.diffusion_d(x).sqrt();
    if lambda == 0.0 {
        let grid: Vec<f64> = scale.nodes.iter().map(|&x| scale.s(x)).filter(|z| z.is_finite()).collect();
        let r = scale.nodes[..grid.len()].iter().map(|&x| r_bar(x)).collect();
        let y = vec![0.0; grid.len()];
        return Ok(RiccatiSolution { lambda, grid, y, r, max_scaled_residual: 0.0, bounds_hold: true, integral: Some(0.0), escalations: 0 });
    }
    let table = model.riccati_table(lambda)?;
    let mut out = RiccatiSolution {
        lambda,
        grid: Vec::new(),
        y: Vec::new(),
        r: Vec::new(),
        max_scaled_residual: table.max_scaled_residual,
        bounds_hold: table.bounds_hold,
        integral: table.total(),
        escalations: table.escalations,
    };
    for (x, v) in table.nodes() {
        let z = scale.s(x);
        let ls = scale.log_density(x);
        if !z.is_finite() || !ls.is_finite() || ls.abs() > 700.0 {
            continue;
        }
        out.grid.push(z);
        out.y.push(v * (-ls).exp());
        out.r.push(r_bar(x));
    }
    Ok(out)
}

/// `E_x[e^{-λT_a}] = exp(-∫_{S(a)}^{S(x)} ȳ_λ)`.
pub fn laplace_ta_diffusion(model: &DiffusionModel, x: f64, a: f64, lambda: f64) -> Result<f64> {
    if !(0.0 <= a && a <= x) {
        return Err(CbreError::Domain(format!("Laplace transform of T_a needs 0 <= a <= x, got a={a}, x={x}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CbreError::Domain(format!("λ must be non-negative, got {lambda}")));
    }
    model.require_gamma()?;
    if x == a {
        return Ok(1.0);
    }
    if lambda == 0.0 {
        // P_x(T_a < ∞) = (S(∞) - S(x))/(S(∞) - S(a))
        let t = model.scale()?;
        return Ok(match t.s_infinity() {
            None => {
                let c = t.s_infinity_check();
                if c.verdict == Verdict::Inconclusive {
                    return Err(inconclusive(&c));
                }
                1.0
            }
            Some(s_inf) => (s_inf - t.s(x)) / (s_inf - t.s(a)),
        });
    }
    let table = model.riccati_table(lambda)?;
    Ok((-table.integral(a, x)).exp())
}
